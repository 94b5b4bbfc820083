#include "tbm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace tbm {

namespace {

constexpr const char* kVersion = "tbm-0.1.0";

std::uint64_t experiment_id(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::mse_sweep: return 1;
    case ExperimentKind::per_sweep: return 2;
    case ExperimentKind::dt_curve: return 3;
    case ExperimentKind::bounds_table: return 4;
    case ExperimentKind::amp_curve: return 5;
  }
  return 0;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<double> parse_grid(const std::string& v) {
  // "start:step:stop" (inclusive) or comma-separated list
  if (v.find(':') != std::string::npos) {
    auto parts = split(v, ':');
    if (parts.size() != 3) throw std::invalid_argument("grid: expected start:step:stop");
    const double start = std::stod(parts[0]);
    const double step = std::stod(parts[1]);
    const double stop = std::stod(parts[2]);
    if (step <= 0.0) throw std::invalid_argument("grid: step must be > 0");
    std::vector<double> g;
    for (int i = 0;; ++i) {
      const double x = start + i * step;
      if (x > stop + 1e-9 * std::abs(step)) break;
      g.push_back(x);
    }
    if (g.empty()) throw std::invalid_argument("grid: empty");
    return g;
  }
  std::vector<double> g;
  for (const auto& tok : split(v, ',')) g.push_back(std::stod(trim(tok)));
  return g;
}

double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double pos = p * (static_cast<double>(sorted.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mx;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mx);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name,
                       std::vector<std::string>& files) {
  std::filesystem::create_directories(cfg.out);
  const std::string path = (std::filesystem::path(cfg.out) / name).string();
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open output file " + path);
  std::ostringstream hash;
  hash << std::hex << cfg.config_hash();
  f << "# config_hash=" << hash.str() << " seed=" << cfg.seed << " version=" << kVersion << '\n';
  files.push_back(path);
  return f;
}

bool solver_diverged(const CpdResult& res) {
  return res.infeasible_rank || !std::isfinite(res.residual);
}

FactorSet random_truth(const TbmConfig& cfg, RngStream& rng) {
  FactorSet f;
  f.x.resize(static_cast<std::size_t>(cfg.d()));
  for (int i = 0; i < cfg.d(); ++i) {
    const Eigen::Index Ti = cfg.dims[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < cfg.Ka; ++k)
      f.x[static_cast<std::size_t>(i)].push_back(rng.sphere_vec(Ti, std::sqrt(static_cast<double>(Ti))));
  }
  for (Eigen::Index k = 0; k < cfg.Ka; ++k) f.h.push_back(rng.cnormal_vec(cfg.N));
  return f;
}

/// Greedy one-to-one matching of decoded payloads to the transmitted list;
/// returns the number of unmatched (erroneous) packets.
int unsourced_errors(const std::vector<std::vector<int>>& decoded,
                     const std::vector<std::vector<int>>& sent) {
  std::vector<char> claimed(sent.size(), 0);
  int matched = 0;
  for (const auto& dec : decoded) {
    for (std::size_t s = 0; s < sent.size(); ++s) {
      if (!claimed[s] && dec == sent[s]) {
        claimed[s] = 1;
        ++matched;
        break;
      }
    }
  }
  return static_cast<int>(sent.size()) - matched;
}

}  // namespace

std::string experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::mse_sweep: return "mse_sweep";
    case ExperimentKind::per_sweep: return "per_sweep";
    case ExperimentKind::dt_curve: return "dt_curve";
    case ExperimentKind::bounds_table: return "bounds_table";
    case ExperimentKind::amp_curve: return "amp_curve";
  }
  return "unknown";
}

void ExperimentConfig::validate() const {
  if (dims.size() < 2) throw std::invalid_argument("config: need at least two data modes");
  for (auto t : dims)
    if (t < 2) throw std::invalid_argument("config: every mode dim must be >= 2");
  if (N < 1 || Ka < 1) throw std::invalid_argument("config: N and Ka must be >= 1");
  if (snr_grid_db.empty()) throw std::invalid_argument("config: empty SNR grid");
  if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (codebook != "sphere" && codebook != "pilot_qam")
    throw std::invalid_argument("config: codebook must be sphere or pilot_qam");
  if (codebook == "sphere" && bits.size() != dims.size())
    throw std::invalid_argument("config: bits must list one value per data mode");
  if (mode_of_interest < 0 || mode_of_interest >= static_cast<int>(dims.size()))
    throw std::invalid_argument("config: mode out of range");
  if (user_of_interest < 0 || user_of_interest >= Ka)
    throw std::invalid_argument("config: user out of range");
  if (kind == ExperimentKind::per_sweep || kind == ExperimentKind::dt_curve) {
    if (polar_B < 1 || polar_B > polar_n) throw std::invalid_argument("config: need 1 <= polar_B <= polar_n");
  }
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (key == "dims") {
    dims.clear();
    for (const auto& t : split(value, ',')) dims.push_back(std::stoll(trim(t)));
  } else if (key == "N") {
    N = std::stoll(value);
  } else if (key == "Ka") {
    Ka = std::stoll(value);
  } else if (key == "codebook") {
    codebook = value;
  } else if (key == "bits") {
    bits.clear();
    for (const auto& t : split(value, ',')) bits.push_back(std::stoi(trim(t)));
  } else if (key == "qam_order") {
    qam_order = std::stoi(value);
  } else if (key == "codebook_seed") {
    codebook_seed = std::stoull(value);
  } else if (key == "snr_db") {
    snr_grid_db = parse_grid(value);
  } else if (key == "trials") {
    trials = std::stoi(value);
  } else if (key == "seed") {
    seed = std::stoull(value);
  } else if (key == "threads") {
    threads = std::stoi(value);
  } else if (key == "out") {
    out = value;
  } else if (key == "polar_n") {
    polar_n = std::stoi(value);
  } else if (key == "polar_B") {
    polar_B = std::stoi(value);
  } else if (key == "polar_design_snr_db") {
    polar_design_snr_db = std::stod(value);
  } else if (key == "n_mc") {
    n_mc = std::stoi(value);
  } else if (key == "hist_bins") {
    hist_bins = std::stoi(value);
  } else if (key == "solver_max_iters") {
    solver_max_iters = std::stoi(value);
  } else if (key == "solver_restarts") {
    solver_restarts = std::stoi(value);
  } else if (key == "bound_draws") {
    bound_draws = std::stoi(value);
  } else if (key == "mode") {
    mode_of_interest = std::stoi(value) - 1;  // 1-based in config files
  } else if (key == "user") {
    user_of_interest = std::stoll(value) - 1;
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

ExperimentConfig ExperimentConfig::preset(ExperimentKind kind, const std::string& name) {
  ExperimentConfig c;
  c.kind = kind;
  if (name == "desk") {
    switch (kind) {
      case ExperimentKind::mse_sweep:
        break;  // defaults: dims (8,6), N=4, Ka=1, 0..30 dB, 200 trials
      case ExperimentKind::per_sweep:
      case ExperimentKind::dt_curve:
        c.dims = {6, 5};
        c.bits = {16, 16};
        c.snr_grid_db = {-3, -2, -1, 0};
        c.trials = 600;
        break;
      case ExperimentKind::bounds_table:
        c.dims = {6, 5};
        c.bits = {4, 4};
        c.Ka = 2;
        c.snr_grid_db = {10};
        break;
      case ExperimentKind::amp_curve:
        c.snr_grid_db = parse_grid("-30:0.5:10");
        break;
    }
  } else if (name == "paper") {
    // Fig. 1-3 scale: T = 64*50 = 3200 channel uses, 50 antennas. Long
    // running for the Monte Carlo experiments.
    c.dims = {64, 50};
    c.N = 50;
    c.bits = {16, 16};
    switch (kind) {
      case ExperimentKind::mse_sweep:
        c.Ka = 1;
        c.snr_grid_db = parse_grid("-35:1:-20");
        c.trials = 100;
        break;
      case ExperimentKind::per_sweep:
      case ExperimentKind::dt_curve:
        c.Ka = 1;
        c.polar_n = 512;
        c.polar_B = 300;
        c.snr_grid_db = parse_grid("-30:1:-20");
        c.trials = 200;
        break;
      case ExperimentKind::bounds_table:
        c.Ka = 100;
        c.snr_grid_db = {-25};
        c.bound_draws = 5;
        break;
      case ExperimentKind::amp_curve:
        c.Ka = 1;
        c.snr_grid_db = parse_grid("-35:0.1:-20");
        break;
    }
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_file(ExperimentKind kind, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file " + path);
  ExperimentConfig c;
  c.kind = kind;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key = value");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

TbmConfig ExperimentConfig::tbm(double sigma2, bool with_codebooks) const {
  TbmConfig c;
  c.dims = dims;
  c.N = N;
  c.Ka = Ka;
  c.sigma2 = sigma2;
  if (with_codebooks) {
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (codebook == "sphere")
        c.codebooks.push_back(build_sphere_codebook(dims[i], bits[i], codebook_seed));
      else
        c.codebooks.push_back(build_pilot_qam_codebook(dims[i], qam_order, codebook_seed));
    }
  }
  return c;
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "kind=" << experiment_name(kind) << '\n';
  os << "dims=";
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << '\n' << "N=" << N << '\n' << "Ka=" << Ka << '\n';
  os << "codebook=" << codebook << '\n' << "bits=";
  for (std::size_t i = 0; i < bits.size(); ++i) os << (i ? "," : "") << bits[i];
  os << '\n' << "qam_order=" << qam_order << '\n' << "codebook_seed=" << codebook_seed << '\n';
  os << "snr_db=";
  for (std::size_t i = 0; i < snr_grid_db.size(); ++i) os << (i ? "," : "") << snr_grid_db[i];
  os << '\n' << "trials=" << trials << '\n' << "seed=" << seed << '\n';
  os << "polar_n=" << polar_n << '\n' << "polar_B=" << polar_B << '\n'
     << "polar_design_snr_db=" << polar_design_snr_db << '\n';
  os << "n_mc=" << n_mc << '\n' << "hist_bins=" << hist_bins << '\n'
     << "solver_max_iters=" << solver_max_iters << '\n' << "solver_restarts=" << solver_restarts
     << '\n' << "bound_draws=" << bound_draws << '\n';
  os << "mode=" << (mode_of_interest + 1) << '\n' << "user=" << (user_of_interest + 1) << '\n';
  return os.str();
}

std::uint64_t ExperimentConfig::config_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : canonical()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// mse-sweep

namespace {

struct MseTrialOut {
  double mse_genie = 0.0, mse_random = 0.0;
  double re_zx = 0.0;     // Re(z^H x) for the reported (mode, user), genie path
  double bound_lb = 0.0;  // per-realization Lemma bound through the xi approximation
  bool div_genie = false, div_random = false;
};

MseTrialOut mse_trial(const ExperimentConfig& ecfg, const TbmConfig& cfg, int g, int t) {
  RngStream rng = RngStream::derive(ecfg.seed, experiment_id(ExperimentKind::mse_sweep),
                                    static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(t));
  FactorSet truth = random_truth(cfg, rng);
  CTensor y = model_tensor(truth);
  const double s = std::sqrt(cfg.sigma2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()(i) += s * rng.cnormal();
  const std::uint64_t random_seed = rng.next_u64();

  const int i = ecfg.mode_of_interest;
  const Eigen::Index k = ecfg.user_of_interest;

  MseTrialOut out;
  out.bound_lb = mse_lower_bound(
      xi_approx(cfg, truth.h[static_cast<std::size_t>(k)].squaredNorm(), cfg.sigma2, i));

  SolverOptions opts;
  opts.max_iters = ecfg.solver_max_iters;
  opts.init = SolverOptions::Init::genie;
  CpdResult genie = solve_cpd(y, cfg.Ka, opts, &truth);
  out.div_genie = solver_diverged(genie);
  if (!out.div_genie) {
    Alignment al = align_to_truth(genie, truth);
    out.mse_genie = empirical_mse(al, i, k);
    out.re_zx = truth.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]
                    .dot(al.aligned.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)])
                    .real();
  }

  opts.init = SolverOptions::Init::random;
  opts.seed = random_seed;
  CpdResult rnd = solve_cpd(y, cfg.Ka, opts, nullptr);
  out.div_random = solver_diverged(rnd);
  if (!out.div_random) {
    Alignment al = align_to_truth(rnd, truth);
    out.mse_random = empirical_mse(al, i, k);
  }
  return out;
}

void write_histogram(const ExperimentConfig& cfg, const std::string& name,
                     const std::vector<double>& values, std::vector<std::string>& files) {
  // log10(MSE) bins over [-9, 0.5], out-of-range values clamped to the edges
  const double lo = -9.0, hi = 0.5;
  const int nb = cfg.hist_bins;
  std::vector<long> counts(static_cast<std::size_t>(nb), 0);
  for (double v : values) {
    const double l = std::log10(std::max(v, 1e-300));
    int b = static_cast<int>(std::floor((l - lo) / (hi - lo) * nb));
    b = std::clamp(b, 0, nb - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  std::ofstream f = open_out(cfg, name, files);
  f << "bin_left,bin_right,count\n";
  for (int b = 0; b < nb; ++b) {
    const double a = lo + (hi - lo) * b / nb;
    const double c = lo + (hi - lo) * (b + 1) / nb;
    f << fmt(a) << ',' << fmt(c) << ',' << counts[static_cast<std::size_t>(b)] << '\n';
  }
}

}  // namespace

MseSweepResult run_mse_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  MseSweepResult res;
  const int i = cfg.mode_of_interest;
  const double Ti = static_cast<double>(cfg.dims[static_cast<std::size_t>(i)]);

  for (std::size_t g = 0; g < cfg.snr_grid_db.size(); ++g) {
    const double sigma2 = std::pow(10.0, -cfg.snr_grid_db[g] / 10.0);
    const TbmConfig tcfg = cfg.tbm(sigma2, false);
    std::vector<MseTrialOut> outs(static_cast<std::size_t>(cfg.trials));
    parallel_for(cfg.trials, cfg.threads, [&](int t) {
      outs[static_cast<std::size_t>(t)] = mse_trial(cfg, tcfg, static_cast<int>(g), t);
    });

    MsePoint pt;
    pt.snr_db = cfg.snr_grid_db[g];
    pt.sigma2 = sigma2;
    pt.trials = cfg.trials;
    std::vector<double> vg, vr;
    double sum_re = 0.0, sum_lb = 0.0;
    for (const auto& o : outs) {
      if (o.div_genie) {
        ++pt.divergences_genie;
      } else {
        vg.push_back(o.mse_genie);
        sum_re += o.re_zx;
      }
      if (o.div_random)
        ++pt.divergences_random;
      else
        vr.push_back(o.mse_random);
      sum_lb += o.bound_lb;
    }
    auto reduce = [](std::vector<double>& v, double& mean, double& med, double& q10, double& q90) {
      if (v.empty()) return;
      double s = 0.0;
      for (double x : v) s += x;
      mean = s / static_cast<double>(v.size());
      std::sort(v.begin(), v.end());
      med = quantile(v, 0.5);
      q10 = quantile(v, 0.1);
      q90 = quantile(v, 0.9);
    };
    reduce(vg, pt.mean_genie, pt.median_genie, pt.q10_genie, pt.q90_genie);
    reduce(vr, pt.mean_random, pt.median_random, pt.q10_random, pt.q90_random);
    if (!vg.empty()) {
      pt.alpha_hat = sum_re / (static_cast<double>(vg.size()) * Ti);
      const double e2 = Ti - 2.0 * pt.alpha_hat * sum_re / static_cast<double>(vg.size()) +
                        pt.alpha_hat * pt.alpha_hat * Ti;
      pt.xi_hat = e2 / (Ti * pt.alpha_hat * pt.alpha_hat);
    }
    pt.mse_lb = sum_lb / cfg.trials;
    AmpResult amp = amp_fixed_point(tcfg, sigma2, AmpStart::informative);
    pt.mse_amp = amp.mse[static_cast<std::size_t>(i)][static_cast<std::size_t>(cfg.user_of_interest)];
    res.points.push_back(pt);

    write_histogram(cfg, "mse_hist_p" + std::to_string(g) + "_genie.csv", vg, res.files);
    write_histogram(cfg, "mse_hist_p" + std::to_string(g) + "_random.csv", vr, res.files);
  }

  std::ofstream f = open_out(cfg, "mse_sweep.csv", res.files);
  f << "snr_db,sigma2,trials,div_genie,div_random,mean_genie,median_genie,q10_genie,q90_genie,"
       "mean_random,median_random,q10_random,q90_random,alpha_hat,xi_hat,mse_lb,mse_amp\n";
  for (const auto& p : res.points) {
    f << fmt(p.snr_db) << ',' << fmt(p.sigma2) << ',' << p.trials << ',' << p.divergences_genie
      << ',' << p.divergences_random << ',' << fmt(p.mean_genie) << ',' << fmt(p.median_genie)
      << ',' << fmt(p.q10_genie) << ',' << fmt(p.q90_genie) << ',' << fmt(p.mean_random) << ','
      << fmt(p.median_random) << ',' << fmt(p.q10_random) << ',' << fmt(p.q90_random) << ','
      << fmt(p.alpha_hat) << ',' << fmt(p.xi_hat) << ',' << fmt(p.mse_lb) << ',' << fmt(p.mse_amp)
      << '\n';
  }
  return res;
}

// ---------------------------------------------------------------------------
// per-sweep

namespace {

struct PerTrialOut {
  int err_full_soft = 0, err_full_hard = 0, err_equiv_soft = 0, err_equiv_hard = 0;
  int divergences = 0;
};

int blocks_for(const TbmConfig& tcfg, int n) {
  const int bpb = tcfg.bits_per_block();
  return (n + bpb - 1) / bpb;
}

PerTrialOut per_trial(const ExperimentConfig& ecfg, const TbmConfig& cfg, const PolarCode& code,
                      int g, int t) {
  RngStream rng = RngStream::derive(ecfg.seed, experiment_id(ExperimentKind::per_sweep),
                                    static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(t));
  const int d = cfg.d();
  const Eigen::Index Ka = cfg.Ka;
  const int bpb = cfg.bits_per_block();
  const int blocks = blocks_for(cfg, code.n);
  PerTrialOut out;

  // Payloads and coded streams (padded with known zero filler bits).
  std::vector<std::vector<int>> payloads(static_cast<std::size_t>(Ka));
  std::vector<std::vector<int>> coded(static_cast<std::size_t>(Ka));
  for (Eigen::Index k = 0; k < Ka; ++k) {
    auto& pl = payloads[static_cast<std::size_t>(k)];
    pl.resize(static_cast<std::size_t>(code.B));
    for (auto& b : pl) b = rng.uniform() < 0.5 ? 1 : 0;
    coded[static_cast<std::size_t>(k)] = polar_encode(code, pl);
    coded[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(blocks * bpb), 0);
  }
  std::vector<CVec> channels = draw_channels(cfg, rng);

  // --- full pipeline: transmit + CPD per block ---
  std::vector<CpdResult> ests;
  bool diverged = false;
  for (int b = 0; b < blocks && !diverged; ++b) {
    std::vector<std::vector<int>> block_bits(static_cast<std::size_t>(Ka));
    for (Eigen::Index k = 0; k < Ka; ++k)
      block_bits[static_cast<std::size_t>(k)] =
          std::vector<int>(coded[static_cast<std::size_t>(k)].begin() + b * bpb,
                           coded[static_cast<std::size_t>(k)].begin() + (b + 1) * bpb);
    Transmission tx = transmit_with_channels(cfg, block_bits, channels, rng);
    // Multi-start: a spectral start first (much more reliable near the
    // estimation threshold), then random restarts; keep the lowest residual.
    CpdResult est;
    bool have = false;
    for (int r = 0; r < std::max(1, ecfg.solver_restarts); ++r) {
      SolverOptions opts;
      opts.max_iters = ecfg.solver_max_iters;
      opts.init = r == 0 ? SolverOptions::Init::svd : SolverOptions::Init::random;
      opts.seed = rng.next_u64();
      CpdResult cand = solve_cpd(tx.y, Ka, opts, nullptr);
      if (!have || (!solver_diverged(cand) && cand.residual < est.residual)) {
        est = std::move(cand);
        have = true;
      }
    }
    if (solver_diverged(est)) diverged = true;
    ests.push_back(std::move(est));
  }
  if (diverged) {
    out.divergences = 1;
    out.err_full_soft = out.err_full_hard = static_cast<int>(Ka);
  } else {
    // Associate users across blocks by channel-estimate correlation against
    // block 0 (the fading is constant over the packet).
    std::vector<std::vector<Eigen::Index>> assoc(static_cast<std::size_t>(blocks));
    for (Eigen::Index k = 0; k < Ka; ++k) assoc[0].push_back(k);
    for (int b = 1; b < blocks; ++b) {
      std::vector<char> used(static_cast<std::size_t>(Ka), 0);
      assoc[static_cast<std::size_t>(b)].assign(static_cast<std::size_t>(Ka), 0);
      for (Eigen::Index m = 0; m < Ka; ++m) {
        const CVec& href = ests[0].factors.h[static_cast<std::size_t>(m)];
        double best = -1.0;
        Eigen::Index best_j = 0;
        for (Eigen::Index j = 0; j < Ka; ++j) {
          if (used[static_cast<std::size_t>(j)]) continue;
          const CVec& hb = ests[static_cast<std::size_t>(b)].factors.h[static_cast<std::size_t>(j)];
          const double c = std::abs(href.dot(hb)) / (href.norm() * hb.norm() + 1e-300);
          if (c > best) {
            best = c;
            best_j = j;
          }
        }
        used[static_cast<std::size_t>(best_j)] = 1;
        assoc[static_cast<std::size_t>(b)][static_cast<std::size_t>(m)] = best_j;
      }
    }
    std::vector<std::vector<int>> dec_soft, dec_hard;
    for (Eigen::Index m = 0; m < Ka; ++m) {
      std::vector<double> llrs;
      std::vector<int> hard_bits;
      for (int b = 0; b < blocks; ++b) {
        const Eigen::Index j = assoc[static_cast<std::size_t>(b)][static_cast<std::size_t>(m)];
        const CpdResult& est = ests[static_cast<std::size_t>(b)];
        const double hn2 = est.factors.h[static_cast<std::size_t>(j)].squaredNorm();
        for (int i = 0; i < d; ++i) {
          const CVec& z = est.factors.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
          const Codebook& cb = cfg.codebooks[static_cast<std::size_t>(i)];
          const auto l = compute_llrs(z, cb, llr_factor(hn2, cfg, i));
          llrs.insert(llrs.end(), l.begin(), l.end());
          const auto hd = demap_hard(cb, z);
          hard_bits.insert(hard_bits.end(), hd.bits.begin(), hd.bits.end());
        }
      }
      llrs.resize(static_cast<std::size_t>(code.n));  // drop filler positions
      hard_bits.resize(static_cast<std::size_t>(code.n));
      dec_soft.push_back(polar_decode_sc(code, llrs));
      dec_hard.push_back(decode_hard(code, hard_bits));
    }
    out.err_full_soft = unsourced_errors(dec_soft, payloads);
    out.err_full_hard = unsourced_errors(dec_hard, payloads);
  }

  // --- equivalent-channel pipeline (per user, no tensor solve) ---
  for (Eigen::Index k = 0; k < Ka; ++k) {
    const double hn2 = channels[static_cast<std::size_t>(k)].squaredNorm();
    std::vector<double> llrs;
    std::vector<int> hard_bits;
    for (int b = 0; b < blocks; ++b) {
      int off = b * bpb;
      for (int i = 0; i < d; ++i) {
        const Codebook& cb = cfg.codebooks[static_cast<std::size_t>(i)];
        const int nb = cb.bits_per_symbol();
        std::vector<int> sym_bits(coded[static_cast<std::size_t>(k)].begin() + off,
                                  coded[static_cast<std::size_t>(k)].begin() + off + nb);
        off += nb;
        const CVec& x = map_bits(cb, sym_bits);
        const EquivChannel ch = EquivChannel::from_xi(xi_approx(cfg, hn2, cfg.sigma2, i), cb.dim());
        const CVec z = sample_equiv_channel(x, ch, rng);
        const auto l = compute_llrs(z, cb, llr_factor(hn2, cfg, i));
        llrs.insert(llrs.end(), l.begin(), l.end());
        const auto hd = demap_hard(cb, z);
        hard_bits.insert(hard_bits.end(), hd.bits.begin(), hd.bits.end());
      }
    }
    llrs.resize(static_cast<std::size_t>(code.n));
    hard_bits.resize(static_cast<std::size_t>(code.n));
    if (polar_decode_sc(code, llrs) != payloads[static_cast<std::size_t>(k)]) ++out.err_equiv_soft;
    if (decode_hard(code, hard_bits) != payloads[static_cast<std::size_t>(k)]) ++out.err_equiv_hard;
  }
  return out;
}

}  // namespace

PerSweepResult run_per_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  PerSweepResult res;
  const PolarCode code = polar_construct(cfg.polar_n, cfg.polar_B, cfg.polar_design_snr_db);
  {
    const TbmConfig probe = cfg.tbm(1.0, true);
    res.blocks_per_packet = blocks_for(probe, code.n);
  }

  for (std::size_t g = 0; g < cfg.snr_grid_db.size(); ++g) {
    const double sigma2 = std::pow(10.0, -cfg.snr_grid_db[g] / 10.0);
    const TbmConfig tcfg = cfg.tbm(sigma2, true);
    std::vector<PerTrialOut> outs(static_cast<std::size_t>(cfg.trials));
    parallel_for(cfg.trials, cfg.threads, [&](int t) {
      outs[static_cast<std::size_t>(t)] = per_trial(cfg, tcfg, code, static_cast<int>(g), t);
    });
    PerPoint pt;
    pt.snr_db = cfg.snr_grid_db[g];
    pt.packets = cfg.trials * static_cast<int>(cfg.Ka);
    for (const auto& o : outs) {
      pt.errors_full_soft += o.err_full_soft;
      pt.errors_full_hard += o.err_full_hard;
      pt.errors_equiv_soft += o.err_equiv_soft;
      pt.errors_equiv_hard += o.err_equiv_hard;
      pt.solver_divergences += o.divergences;
    }
    res.points.push_back(pt);
  }

  std::ofstream f = open_out(cfg, "per_sweep.csv", res.files);
  f << "snr_db,packets,errors_full_soft,errors_full_hard,errors_equiv_soft,errors_equiv_hard,"
       "solver_divergences,per_full_soft,per_full_hard,per_equiv_soft,per_equiv_hard\n";
  for (const auto& p : res.points) {
    f << fmt(p.snr_db) << ',' << p.packets << ',' << p.errors_full_soft << ','
      << p.errors_full_hard << ',' << p.errors_equiv_soft << ',' << p.errors_equiv_hard << ','
      << p.solver_divergences << ',' << fmt(p.per_full_soft()) << ',' << fmt(p.per_full_hard())
      << ',' << fmt(p.per_equiv_soft()) << ',' << fmt(p.per_equiv_hard()) << '\n';
  }
  return res;
}

// ---------------------------------------------------------------------------
// dt-curve

DtCurveResult run_dt_curve(const ExperimentConfig& cfg) {
  cfg.validate();
  DtCurveResult res;
  const TbmConfig tcfg = cfg.tbm(1.0, true);
  res.blocks_per_packet = blocks_for(tcfg, cfg.polar_n);
  res.points = dt_bound(tcfg, cfg.polar_B, res.blocks_per_packet, cfg.snr_grid_db, cfg.n_mc,
                        cfg.seed);
  std::ofstream f = open_out(cfg, "dt_curve.csv", res.files);
  f << "snr_db,epsilon,n_mc,B\n";
  for (const auto& p : res.points)
    f << fmt(p.snr_db) << ',' << fmt(p.epsilon) << ',' << cfg.n_mc << ',' << cfg.polar_B << '\n';
  return res;
}

// ---------------------------------------------------------------------------
// bounds-table

BoundsTableResult run_bounds_table(const ExperimentConfig& cfg) {
  cfg.validate();
  BoundsTableResult res;
  const double sigma2 = std::pow(10.0, -cfg.snr_grid_db.front() / 10.0);
  const TbmConfig tcfg = cfg.tbm(sigma2, false);
  const AmpResult amp = amp_fixed_point(tcfg, sigma2, AmpStart::informative);

  for (int draw = 0; draw < cfg.bound_draws; ++draw) {
    RngStream rng = RngStream::derive(cfg.seed, experiment_id(ExperimentKind::bounds_table), 0,
                                      static_cast<std::uint64_t>(draw));
    FactorSet truth = random_truth(tcfg, rng);
    try {
      auto exact = crb_exact(truth, sigma2);
      for (int i = 0; i < tcfg.d(); ++i) {
        for (Eigen::Index k = 0; k < tcfg.Ka; ++k) {
          BoundRow row;
          row.i = i;
          row.k = k;
          row.xi_exact = exact[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
          row.xi_prop1 = xi_prop1(truth, sigma2, i, k);
          const XiStarResult xs = xi_star(truth, sigma2, i, k);
          row.xi_star = xs.xi_star;
          row.eta_minus = xs.eta_minus;
          row.eta_plus = xs.eta_plus;
          row.xi_approx = xi_approx(tcfg, truth.h[static_cast<std::size_t>(k)].squaredNorm(),
                                    sigma2, i);
          row.mse_lb = mse_lower_bound(xs.xi_star);
          row.alpha = alpha_from_xi(row.xi_exact);
          row.mse_amp = amp.mse[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
          res.rows.push_back(row);
          res.draw_of_row.push_back(draw);
        }
      }
    } catch (const std::runtime_error&) {
      ++res.skipped;
    }
  }

  std::ofstream f = open_out(cfg, "bounds_table.csv", res.files);
  f << "draw," << bound_report_csv_header() << '\n';
  for (std::size_t r = 0; r < res.rows.size(); ++r)
    f << res.draw_of_row[r] << ',' << bound_row_csv(res.rows[r]) << '\n';
  f << "# skipped_singular=" << res.skipped << '\n';
  return res;
}

// ---------------------------------------------------------------------------
// amp-curve

AmpCurveResult run_amp_curve(const ExperimentConfig& cfg) {
  cfg.validate();
  AmpCurveResult res;
  for (double snr : cfg.snr_grid_db) {
    const double sigma2 = std::pow(10.0, -snr / 10.0);
    const TbmConfig tcfg = cfg.tbm(sigma2, false);
    const AmpResult amp = amp_fixed_point(tcfg, sigma2, AmpStart::informative);
    AmpPoint pt;
    pt.snr_db = snr;
    pt.sigma2 = sigma2;
    pt.converged = amp.converged;
    for (std::size_t i = 0; i < amp.mse.size(); ++i)
      pt.mse_per_mode.push_back(amp.mse[i][static_cast<std::size_t>(cfg.user_of_interest)]);
    res.points.push_back(std::move(pt));
  }
  std::ofstream f = open_out(cfg, "amp_curve.csv", res.files);
  f << "snr_db,sigma2,converged";
  for (std::size_t i = 0; i < res.points.front().mse_per_mode.size(); ++i)
    f << ",mse_mode" << (i + 1);
  f << '\n';
  for (const auto& p : res.points) {
    f << fmt(p.snr_db) << ',' << fmt(p.sigma2) << ',' << (p.converged ? 1 : 0);
    for (double m : p.mse_per_mode) f << ',' << fmt(m);
    f << '\n';
  }
  return res;
}

std::vector<std::string> run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::mse_sweep: return run_mse_sweep(cfg).files;
    case ExperimentKind::per_sweep: return run_per_sweep(cfg).files;
    case ExperimentKind::dt_curve: return run_dt_curve(cfg).files;
    case ExperimentKind::bounds_table: return run_bounds_table(cfg).files;
    case ExperimentKind::amp_curve: return run_amp_curve(cfg).files;
  }
  throw std::logic_error("run_experiment: bad kind");
}

}  // namespace tbm
