#pragma once

#include <string>
#include <vector>

#include "tbm/system_model.hpp"
#include "tbm/tensor.hpp"

namespace tbm {

/// Mode-removed signature matrix S_{-i} and its Gram. Mode index i is
/// 0-based over the p = d+1 modes (channel mode last).
struct GramData {
  CMat S;      // columns s_{-i,k}
  CMat gamma;  // S^H S, Ka x Ka, Hermitian PSD
};

GramData gram_data(const FactorSet& truth, int i);

/// ||P^perp_{S_{-i,-k}} s_{-i,k}||^2 = 1/(Gamma_i^{-1})_{kk}.
double proj_residual_norm2(const GramData& g, Eigen::Index k);

struct XiStarResult {
  double xi_star;
  double eta_minus;
  double eta_plus;
};

/// Exact constrained Cramer-Rao value of the normalized variance xi_{i,k}
/// for every data mode and user, from the full constrained Fisher matrix.
/// size_cap limits Ka * sum(T_i) for the dense assembly.
std::vector<std::vector<double>> crb_exact(const FactorSet& truth, double sigma2,
                                           Eigen::Index size_cap = 2000);

/// Closed-form lower bound on xi_{i,k} (projection + basis-overlap form).
double xi_prop1(const FactorSet& truth, double sigma2, int i, Eigen::Index k);

/// The more explicit lower bound with the eigenvalue correction factor.
XiStarResult xi_star(const FactorSet& truth, double sigma2, int i, Eigen::Index k);

/// alpha = 1/sqrt(1+xi).
double alpha_from_xi(double xi);

/// MSE lower bound 2(1 - 1/sqrt(1+xi_star)).
double mse_lower_bound(double xi_star);

struct AmpResult {
  std::vector<double> delta;              // per mode
  std::vector<Eigen::MatrixXd> m;         // per-mode Ka x Ka fixed point
  std::vector<std::vector<double>> mse;   // mse[i][k]
  bool converged = true;
  int iterations = 0;
};

enum class AmpStart { informative, zero };

/// Fixed point of the asymptotic state evolution of the Bayes-optimal
/// low-rank decomposition, iterated from M_i = I (informative branch) or 0.
AmpResult amp_fixed_point(const TbmConfig& cfg, double sigma2,
                          AmpStart start = AmpStart::informative);

struct BoundRow {
  int i;
  Eigen::Index k;
  double xi_exact, xi_prop1, xi_star, xi_approx, mse_lb, alpha, eta_minus, eta_plus, mse_amp;
};

std::string bound_report_csv_header();
std::string bound_row_csv(const BoundRow& row);

}  // namespace tbm
