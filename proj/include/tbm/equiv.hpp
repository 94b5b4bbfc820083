#pragma once

#include <vector>

#include "tbm/constellation.hpp"
#include "tbm/rng.hpp"
#include "tbm/system_model.hpp"
#include "tbm/tensor.hpp"

namespace tbm {

/// Parameters of the equivalent point-to-point channel
///   z = e^{i phi} alpha x + xi^{1/2} alpha w,  phi ~ U[0,2pi), w ~ CN(0,I).
/// alpha is tied to xi through alpha^2 = 1/(1+xi).
struct EquivChannel {
  double alpha;
  double xi;
  Eigen::Index T;

  static EquivChannel from_xi(double xi, Eigen::Index T);
};

/// Per-user LLRs for one mode, natural-log domain; positive means bit 1 is
/// more likely.
struct LlrFrame {
  std::vector<double> llr;
  EquivChannel channel;
  double h_hat_norm2;
};

CVec sample_equiv_channel(const CVec& x, const EquivChannel& ch, RngStream& rng);

/// 1/xi (infinite-SNR sentinel for xi == 0).
double equiv_snr(const EquivChannel& ch);

/// The receiver-side plug-in for 1/(alpha xi): the closed-form variance
/// approximation with the estimated channel norm substituted for the true
/// one. cfg only supplies dims/N/Ka/sigma2; i is the 0-based data mode.
double llr_factor(double h_hat_norm2, const TbmConfig& cfg, int i);

/// Closed-form approximate variance xi for mode i given a channel norm.
double xi_approx(const TbmConfig& cfg, double h_norm2, double sigma2, int i);

/// Max-log bitwise LLRs: factor * 2 * (max_{C1j}|z^H x| - max_{C0j}|z^H x|).
std::vector<double> compute_llrs(const CVec& z_hat, const Codebook& cb, double factor);

/// Exact bitwise LLRs from the Bessel-sum ratio (log-domain).
std::vector<double> exact_bitwise_llr(const CVec& z_hat, const Codebook& cb,
                                      const EquivChannel& ch);

/// Information density i(x; z) in bits for the equivalent channel.
double information_density(const CVec& x, const CVec& z_hat, const EquivChannel& ch);

/// Large-T deterministic limit of the per-channel-use information density
/// (bits per channel use).
double info_density_asymptotic(Eigen::Index T, const EquivChannel& ch);

struct DtPoint {
  double snr_db;
  double epsilon;
};

/// Dependence-testing achievability estimate over an average-SNR grid for
/// blocks x d parallel equivalent channels (xi drawn through the fading and
/// the closed-form approximation; fading constant across the blocks of one
/// packet), B payload bits, n_mc Monte Carlo draws.
std::vector<DtPoint> dt_bound(const TbmConfig& cfg, int B, int blocks,
                              const std::vector<double>& snr_grid_db, int n_mc,
                              std::uint64_t seed);

}  // namespace tbm
