#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "tbm/harness.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string preset = "desk";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  std::string out;
};

void attach(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config, "flat key=value config file");
  sub->add_option("--preset", flags.preset, "base preset when no config file is given")
      ->check(CLI::IsMember({"desk", "paper"}));
  sub->add_option("--seed", flags.seed, "master seed (overrides config)")
      ->each([&](const std::string&) { flags.seed_set = true; });
  sub->add_option("--threads", flags.threads, "worker threads (overrides config)");
  sub->add_option("--out", flags.out, "output directory (overrides config)");
}

int run(tbm::ExperimentKind kind, const CommonFlags& flags) {
  tbm::ExperimentConfig cfg = flags.config.empty()
                                  ? tbm::ExperimentConfig::preset(kind, flags.preset)
                                  : tbm::ExperimentConfig::from_file(kind, flags.config);
  if (flags.seed_set) cfg.seed = flags.seed;
  if (flags.threads > 0) cfg.threads = flags.threads;
  if (!flags.out.empty()) cfg.out = flags.out;
  const auto files = tbm::run_experiment(cfg);
  for (const auto& f : files) std::printf("%s\n", f.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tensor-based modulation simulation toolkit"};
  app.require_subcommand(1);

  struct Entry {
    const char* name;
    const char* help;
    tbm::ExperimentKind kind;
  };
  const Entry entries[] = {
      {"mse-sweep", "factor-estimation MSE vs SNR with bound overlays", tbm::ExperimentKind::mse_sweep},
      {"per-sweep", "coded packet error rate vs SNR (full and equivalent pipelines)",
       tbm::ExperimentKind::per_sweep},
      {"dt-curve", "dependence-testing achievability estimate vs SNR", tbm::ExperimentKind::dt_curve},
      {"bounds-table", "exact and closed-form variance bounds on random instances",
       tbm::ExperimentKind::bounds_table},
      {"amp-curve", "asymptotic message-passing MSE prediction vs SNR", tbm::ExperimentKind::amp_curve},
  };
  CommonFlags flags[std::size(entries)];
  for (std::size_t i = 0; i < std::size(entries); ++i) {
    CLI::App* sub = app.add_subcommand(entries[i].name, entries[i].help);
    attach(sub, flags[i]);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (std::size_t i = 0; i < std::size(entries); ++i)
      if (app.get_subcommand(entries[i].name)->parsed()) return run(entries[i].kind, flags[i]);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
