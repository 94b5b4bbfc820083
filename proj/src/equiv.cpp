#include "tbm/equiv.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "tbm/bessel.hpp"

namespace tbm {

namespace {
constexpr double kLn2 = 0.6931471805599453;

double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}
}  // namespace

EquivChannel EquivChannel::from_xi(double xi, Eigen::Index T) {
  if (xi < 0.0) throw std::invalid_argument("EquivChannel: xi must be >= 0");
  return EquivChannel{1.0 / std::sqrt(1.0 + xi), xi, T};
}

CVec sample_equiv_channel(const CVec& x, const EquivChannel& ch, RngStream& rng) {
  const std::complex<double> I(0.0, 1.0);
  const double phi = 2.0 * M_PI * rng.uniform();
  CVec out = std::exp(I * phi) * ch.alpha * x;
  if (ch.xi > 0.0) {
    const double s = std::sqrt(ch.xi) * ch.alpha;
    for (Eigen::Index t = 0; t < out.size(); ++t) out(t) += s * rng.cnormal();
  }
  return out;
}

double equiv_snr(const EquivChannel& ch) {
  if (ch.xi == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / ch.xi;
}

double xi_approx(const TbmConfig& cfg, double h_norm2, double sigma2, int i) {
  const double Ti = static_cast<double>(cfg.dims.at(static_cast<std::size_t>(i)));
  const double TN = static_cast<double>(cfg.T() * cfg.N);
  const double denom = TN - Ti * static_cast<double>(cfg.Ka - 1);
  if (denom <= 0.0) throw std::invalid_argument("xi_approx: too many users for these dimensions");
  return (Ti - 1.0) * sigma2 / denom * static_cast<double>(cfg.N) / h_norm2;
}

double llr_factor(double h_hat_norm2, const TbmConfig& cfg, int i) {
  const double Ti = static_cast<double>(cfg.dims.at(static_cast<std::size_t>(i)));
  const double xi = xi_approx(cfg, h_hat_norm2, cfg.sigma2, i);
  // Plug-in for 1/(alpha xi) = (1/xi) sqrt(1 + xi/T_i), with the estimated
  // channel norm inside xi.
  return std::sqrt(1.0 + xi / Ti) / xi;
}

std::vector<double> compute_llrs(const CVec& z_hat, const Codebook& cb, double factor) {
  if (factor <= 0.0) throw std::invalid_argument("compute_llrs: factor must be > 0");
  const int nb = cb.bits_per_symbol();
  std::vector<double> corr(static_cast<std::size_t>(cb.num_symbols()));
  for (Eigen::Index s = 0; s < cb.num_symbols(); ++s)
    corr[static_cast<std::size_t>(s)] = std::abs(z_hat.dot(cb.symbol(s)));
  std::vector<double> llrs(static_cast<std::size_t>(nb));
  for (int j = 0; j < nb; ++j) {
    double max1 = -1.0, max0 = -1.0;
    for (Eigen::Index s = 0; s < cb.num_symbols(); ++s) {
      const int bit = static_cast<int>((s >> (nb - 1 - j)) & 1);
      double& m = bit ? max1 : max0;
      m = std::max(m, corr[static_cast<std::size_t>(s)]);
    }
    llrs[static_cast<std::size_t>(j)] = 2.0 * factor * (max1 - max0);
  }
  return llrs;
}

std::vector<double> exact_bitwise_llr(const CVec& z_hat, const Codebook& cb,
                                      const EquivChannel& ch) {
  if (cb.num_symbols() > (Eigen::Index(1) << 16))
    throw std::invalid_argument("exact_bitwise_llr: codebook too large for exhaustive sums");
  const double beta = 1.0 / (ch.alpha * ch.xi);
  const int nb = cb.bits_per_symbol();
  std::vector<double> logs(static_cast<std::size_t>(cb.num_symbols()));
  for (Eigen::Index s = 0; s < cb.num_symbols(); ++s)
    logs[static_cast<std::size_t>(s)] = log_bessel_i(0, 2.0 * beta * std::abs(z_hat.dot(cb.symbol(s))));
  std::vector<double> llrs(static_cast<std::size_t>(nb));
  std::vector<double> cls1, cls0;
  for (int j = 0; j < nb; ++j) {
    cls1.clear();
    cls0.clear();
    for (Eigen::Index s = 0; s < cb.num_symbols(); ++s) {
      const int bit = static_cast<int>((s >> (nb - 1 - j)) & 1);
      (bit ? cls1 : cls0).push_back(logs[static_cast<std::size_t>(s)]);
    }
    llrs[static_cast<std::size_t>(j)] = log_sum_exp(cls1) - log_sum_exp(cls0);
  }
  return llrs;
}

double information_density(const CVec& x, const CVec& z_hat, const EquivChannel& ch) {
  if (ch.xi <= 0.0) throw std::invalid_argument("information_density: xi must be > 0");
  const double T = static_cast<double>(ch.T);
  const double beta = 1.0 / (ch.alpha * ch.xi);
  const double zx = std::abs(z_hat.dot(x));
  const double zn = z_hat.norm();
  const double kappa = 2.0 * beta * std::sqrt(T) * zn;
  const double nats = log_bessel_i(0, 2.0 * beta * zx) + (T - 1.0) * std::log(0.5 * kappa) -
                      std::log(2.0) - std::lgamma(T + 1.0) -
                      log_bessel_i(static_cast<int>(ch.T) - 1, kappa);
  return nats / kLn2;
}

double info_density_asymptotic(Eigen::Index T, const EquivChannel& ch) {
  if (T < 2) throw std::invalid_argument("info_density_asymptotic: T must be >= 2");
  if (ch.xi <= 0.0) throw std::invalid_argument("info_density_asymptotic: xi must be > 0");
  const double Td = static_cast<double>(T);
  const double log2e = 1.0 / kLn2;
  const double beta = 1.0 / (ch.alpha * ch.xi);
  // Large-T limit of the exact expression: |z^H x|/T -> alpha, ||z||/sqrt(T)
  // -> 1, log I_n(y) ~ y; the residual terms are O(log T / T) per use.
  return (1.0 - 1.0 / Td) * std::log2(beta * Td) +
         2.0 * beta * (ch.alpha - 1.0) * log2e -
         (1.0 + std::lgamma(Td + 1.0) / kLn2) / Td;
}

std::vector<DtPoint> dt_bound(const TbmConfig& cfg, int B, int blocks,
                              const std::vector<double>& snr_grid_db, int n_mc,
                              std::uint64_t seed) {
  if (n_mc < 1) throw std::invalid_argument("dt_bound: n_mc must be >= 1");
  if (blocks < 1) throw std::invalid_argument("dt_bound: blocks must be >= 1");
  const int d = cfg.d();
  const int nch = blocks * d;
  // log2((2^B - 1)/2), stable for large B
  const double thr =
      (B > 50) ? static_cast<double>(B) - 1.0
               : std::log2(std::pow(2.0, static_cast<double>(B)) - 1.0) - 1.0;

  std::vector<double> acc(snr_grid_db.size(), 0.0);
  for (int trial = 0; trial < n_mc; ++trial) {
    // Common random numbers across the SNR grid: one draw of fading, inputs
    // and noise per trial, reused at every grid point. The fading is shared
    // by all blocks of the packet.
    RngStream rng = RngStream::derive(seed, 0xd7b0, static_cast<std::uint64_t>(trial));
    const CVec h = rng.cnormal_vec(cfg.N);
    const double hn2 = h.squaredNorm();
    std::vector<CVec> xs(static_cast<std::size_t>(nch));
    std::vector<double> phis(static_cast<std::size_t>(nch));
    std::vector<CVec> ws(static_cast<std::size_t>(nch));
    for (int c = 0; c < nch; ++c) {
      const Eigen::Index Ti = cfg.dims[static_cast<std::size_t>(c % d)];
      xs[static_cast<std::size_t>(c)] = rng.sphere_vec(Ti, std::sqrt(static_cast<double>(Ti)));
      phis[static_cast<std::size_t>(c)] = 2.0 * M_PI * rng.uniform();
      ws[static_cast<std::size_t>(c)] = rng.cnormal_vec(Ti);
    }
    for (std::size_t g = 0; g < snr_grid_db.size(); ++g) {
      const double sigma2 = std::pow(10.0, -snr_grid_db[g] / 10.0);
      double info = 0.0;
      const std::complex<double> I(0.0, 1.0);
      for (int c = 0; c < nch; ++c) {
        const int i = c % d;
        const double xi = xi_approx(cfg, hn2, sigma2, i);
        const EquivChannel ch = EquivChannel::from_xi(xi, cfg.dims[static_cast<std::size_t>(i)]);
        const CVec z = std::exp(I * phis[static_cast<std::size_t>(c)]) * ch.alpha *
                           xs[static_cast<std::size_t>(c)] +
                       std::sqrt(ch.xi) * ch.alpha * ws[static_cast<std::size_t>(c)];
        info += information_density(xs[static_cast<std::size_t>(c)], z, ch);
      }
      const double expo = std::max(info - thr, 0.0);
      acc[g] += std::exp2(-expo);
    }
  }
  std::vector<DtPoint> out;
  out.reserve(snr_grid_db.size());
  for (std::size_t g = 0; g < snr_grid_db.size(); ++g)
    out.push_back({snr_grid_db[g], acc[g] / n_mc});
  return out;
}

}  // namespace tbm
