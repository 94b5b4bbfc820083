#pragma once

#include <vector>

#include "tbm/constellation.hpp"
#include "tbm/rng.hpp"
#include "tbm/tensor.hpp"

namespace tbm {

/// Dimensions and noise level of one TBM block. sigma2 is the noise variance
/// per complex entry of y, so the total noise energy in a block is
/// sigma2 * T * N and the average SNR is 1/sigma2.
struct TbmConfig {
  std::vector<Eigen::Index> dims;  // T_1..T_d, each > 1
  Eigen::Index N = 1;              // antennas
  Eigen::Index Ka = 1;             // active users
  double sigma2 = 1.0;
  std::vector<Codebook> codebooks;  // one per data mode (optional for bound-only use)

  int d() const { return static_cast<int>(dims.size()); }
  int p() const { return d() + 1; }
  Eigen::Index T() const {
    Eigen::Index t = 1;
    for (auto s : dims) t *= s;
    return t;
  }
  std::vector<Eigen::Index> tensor_shape() const {
    auto s = dims;
    s.push_back(N);
    return s;
  }
  int bits_per_block() const {
    int b = 0;
    for (const auto& cb : codebooks) b += cb.bits_per_symbol();
    return b;
  }
  void validate() const;
};

/// The tensor parameter theta: per-user factors for every mode, with the
/// channel as mode p = d+1. x[i][k] has length T_{i+1}; h[k] has length N.
struct FactorSet {
  std::vector<std::vector<CVec>> x;  // x[i][k], i = 0..d-1
  std::vector<CVec> h;               // h[k]

  int d() const { return static_cast<int>(x.size()); }
  Eigen::Index Ka() const { return static_cast<Eigen::Index>(h.size()); }

  /// All p factors of user k, channel last.
  std::vector<CVec> user_factors(Eigen::Index k) const;
};

struct Transmission {
  std::vector<std::vector<int>> payloads;  // per-user coded bits for this block
  FactorSet factors;
  CTensor y;
  std::vector<double> snr_inst;  // realized per-user instantaneous SNR
};

/// Ka i.i.d. CN(0, I_N) channel vectors.
std::vector<CVec> draw_channels(const TbmConfig& cfg, RngStream& rng);

/// Builds y = sum_k x_{1,k} (x) ... (x) x_{d,k} (x) h_k + w with
/// w ~ CN(0, sigma2) per entry. Each payload must have exactly
/// bits_per_block() bits; they are split sequentially across the modes.
Transmission transmit(const TbmConfig& cfg, const std::vector<std::vector<int>>& payloads,
                      RngStream& rng);

/// Same but with externally supplied channels (held fixed across blocks).
Transmission transmit_with_channels(const TbmConfig& cfg,
                                    const std::vector<std::vector<int>>& payloads,
                                    const std::vector<CVec>& channels, RngStream& rng);

/// SNR_k = ||h_k||^2 / (N sigma2).
double snr_instantaneous(const TbmConfig& cfg, const CVec& h_k);

}  // namespace tbm
