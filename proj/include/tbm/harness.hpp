#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tbm/bounds.hpp"
#include "tbm/cpd.hpp"
#include "tbm/equiv.hpp"
#include "tbm/polar.hpp"
#include "tbm/system_model.hpp"

namespace tbm {

enum class ExperimentKind { mse_sweep, per_sweep, dt_curve, bounds_table, amp_curve };

std::string experiment_name(ExperimentKind kind);

/// Flat key=value experiment configuration. Unknown keys are rejected.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::mse_sweep;
  std::vector<Eigen::Index> dims{8, 6};
  Eigen::Index N = 4;
  Eigen::Index Ka = 1;
  std::string codebook = "sphere";  // sphere | pilot_qam
  std::vector<int> bits{12, 12};    // per-mode bits (sphere codebooks)
  int qam_order = 4;                // pilot_qam codebooks
  std::uint64_t codebook_seed = 7;
  std::vector<double> snr_grid_db{0, 5, 10, 15, 20, 25, 30};
  int trials = 200;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out = ".";
  int polar_n = 128;
  int polar_B = 64;
  double polar_design_snr_db = 3.0;
  int n_mc = 1000;
  int hist_bins = 40;
  int solver_max_iters = 100;
  int solver_restarts = 3;  // random-init restarts in the coded receiver
  int bound_draws = 50;
  int mode_of_interest = 0;          // 0-based data mode reported in sweeps
  Eigen::Index user_of_interest = 0; // 0-based user reported in sweeps

  void validate() const;
  void set(const std::string& key, const std::string& value);

  static ExperimentConfig preset(ExperimentKind kind, const std::string& name);
  static ExperimentConfig from_file(ExperimentKind kind, const std::string& path);

  /// TbmConfig at one grid point; codebooks attached when with_codebooks.
  TbmConfig tbm(double sigma2, bool with_codebooks) const;

  /// Canonical key=value dump (sorted, normalized) and its FNV-1a hash.
  std::string canonical() const;
  std::uint64_t config_hash() const;
};

struct MsePoint {
  double snr_db = 0.0;
  double sigma2 = 0.0;
  int trials = 0;
  int divergences_random = 0;
  int divergences_genie = 0;
  double mean_genie = 0.0, median_genie = 0.0, q10_genie = 0.0, q90_genie = 0.0;
  double mean_random = 0.0, median_random = 0.0, q10_random = 0.0, q90_random = 0.0;
  double alpha_hat = 0.0;  // genie path, mean Re(z^H x)/T_i
  double xi_hat = 0.0;     // measured normalized variance against alpha_hat
  double mse_lb = 0.0;     // Lemma-style bound, fading-averaged
  double mse_amp = 0.0;    // asymptotic fixed-point prediction
};

struct MseSweepResult {
  std::vector<MsePoint> points;
  std::vector<std::string> files;
};

struct PerPoint {
  double snr_db = 0.0;
  int packets = 0;  // trials * Ka
  int errors_full_soft = 0;
  int errors_full_hard = 0;
  int errors_equiv_soft = 0;
  int errors_equiv_hard = 0;
  int solver_divergences = 0;

  double per_full_soft() const { return static_cast<double>(errors_full_soft) / packets; }
  double per_full_hard() const { return static_cast<double>(errors_full_hard) / packets; }
  double per_equiv_soft() const { return static_cast<double>(errors_equiv_soft) / packets; }
  double per_equiv_hard() const { return static_cast<double>(errors_equiv_hard) / packets; }
};

struct PerSweepResult {
  std::vector<PerPoint> points;
  int blocks_per_packet = 0;
  std::vector<std::string> files;
};

struct DtCurveResult {
  std::vector<DtPoint> points;
  int blocks_per_packet = 0;
  std::vector<std::string> files;
};

struct BoundsTableResult {
  std::vector<BoundRow> rows;  // bound_draws * d * Ka rows (minus skipped draws)
  std::vector<int> draw_of_row;
  int skipped = 0;
  std::vector<std::string> files;
};

struct AmpPoint {
  double snr_db = 0.0;
  double sigma2 = 0.0;
  std::vector<double> mse_per_mode;  // user user_of_interest
  bool converged = true;
};

struct AmpCurveResult {
  std::vector<AmpPoint> points;
  std::vector<std::string> files;
};

MseSweepResult run_mse_sweep(const ExperimentConfig& cfg);
PerSweepResult run_per_sweep(const ExperimentConfig& cfg);
DtCurveResult run_dt_curve(const ExperimentConfig& cfg);
BoundsTableResult run_bounds_table(const ExperimentConfig& cfg);
AmpCurveResult run_amp_curve(const ExperimentConfig& cfg);

/// Dispatch on cfg.kind; returns the list of files written.
std::vector<std::string> run_experiment(const ExperimentConfig& cfg);

}  // namespace tbm
