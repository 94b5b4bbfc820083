#include "tbm/bounds.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace tbm {

namespace {

// All p factor matrices of the truth, channel mode last.
std::vector<CMat> stack_modes(const FactorSet& f) {
  const int d = f.d();
  const Eigen::Index Ka = f.Ka();
  std::vector<CMat> X(static_cast<std::size_t>(d) + 1);
  for (int i = 0; i < d; ++i) {
    CMat m(f.x[static_cast<std::size_t>(i)][0].size(), Ka);
    for (Eigen::Index k = 0; k < Ka; ++k) m.col(k) = f.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    X[static_cast<std::size_t>(i)] = m;
  }
  CMat h(f.h[0].size(), Ka);
  for (Eigen::Index k = 0; k < Ka; ++k) h.col(k) = f.h[static_cast<std::size_t>(k)];
  X[static_cast<std::size_t>(d)] = h;
  return X;
}

CVec kron_omit(const std::vector<CMat>& X, Eigen::Index k, int omit1, int omit2 = -1) {
  CVec v;
  bool first = true;
  for (int j = 0; j < static_cast<int>(X.size()); ++j) {
    if (j == omit1 || j == omit2) continue;
    if (first) {
      v = X[static_cast<std::size_t>(j)].col(k);
      first = false;
    } else {
      v = kron(v, X[static_cast<std::size_t>(j)].col(k));
    }
  }
  return v;
}

CMat gamma_of(const std::vector<CMat>& X, int i, int j) {
  const Eigen::Index Ka = X[0].cols();
  CMat g = CMat::Ones(Ka, Ka);
  for (int m = 0; m < static_cast<int>(X.size()); ++m) {
    if (m == i || m == j) continue;
    g = g.cwiseProduct((X[static_cast<std::size_t>(m)].adjoint() * X[static_cast<std::size_t>(m)]).eval());
  }
  return g;
}

CMat inv_hermitian(const CMat& a, const char* what) {
  Eigen::FullPivLU<CMat> lu(a);
  if (!lu.isInvertible()) throw std::runtime_error(std::string(what) + ": singular matrix");
  return lu.inverse();
}

CMat inv_sqrt_hermitian(const CMat& a, const char* what) {
  Eigen::SelfAdjointEigenSolver<CMat> es(a);
  if (es.info() != Eigen::Success) throw std::runtime_error(std::string(what) + ": eig failed");
  const auto& w = es.eigenvalues();
  if (w.minCoeff() <= 0.0) throw std::runtime_error(std::string(what) + ": not positive definite");
  Eigen::VectorXd inv_sqrt = w.array().rsqrt();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

GramData gram_data(const FactorSet& truth, int i) {
  auto X = stack_modes(truth);
  const Eigen::Index Ka = truth.Ka();
  GramData g;
  Eigen::Index rows = 1;
  for (int j = 0; j < static_cast<int>(X.size()); ++j)
    if (j != i) rows *= X[static_cast<std::size_t>(j)].rows();
  g.S.resize(rows, Ka);
  for (Eigen::Index k = 0; k < Ka; ++k) g.S.col(k) = kron_omit(X, k, i);
  g.gamma = g.S.adjoint() * g.S;
  return g;
}

double proj_residual_norm2(const GramData& g, Eigen::Index k) {
  CMat ginv = inv_hermitian(g.gamma, "proj_residual_norm2");
  return 1.0 / ginv(k, k).real();
}

std::vector<std::vector<double>> crb_exact(const FactorSet& truth, double sigma2,
                                           Eigen::Index size_cap) {
  auto X = stack_modes(truth);
  const int p = static_cast<int>(X.size());
  const Eigen::Index Ka = X[0].cols();
  std::vector<Eigen::Index> dims(static_cast<std::size_t>(p));
  Eigen::Index sum_t = 0;
  for (int i = 0; i < p; ++i) {
    dims[static_cast<std::size_t>(i)] = X[static_cast<std::size_t>(i)].rows();
    sum_t += dims[static_cast<std::size_t>(i)];
  }
  if (Ka * sum_t > size_cap) throw std::invalid_argument("crb_exact: problem exceeds size cap");

  const Eigen::Index n = Ka * sum_t;
  // G = bdiag(Gamma_ii kron I_Ti): parameter order within a mode is user-major
  // (vec(X_i) stacks columns), coordinate fastest.
  CMat info = CMat::Zero(n, n);
  std::vector<Eigen::Index> mode_off(static_cast<std::size_t>(p), 0);
  {
    Eigen::Index off = 0;
    for (int i = 0; i < p; ++i) {
      mode_off[static_cast<std::size_t>(i)] = off;
      CMat gi = gamma_of(X, i, i);
      for (Eigen::Index k = 0; k < Ka; ++k)
        for (Eigen::Index kk = 0; kk < Ka; ++kk)
          info.block(off + k * dims[static_cast<std::size_t>(i)], off + kk * dims[static_cast<std::size_t>(i)],
                     dims[static_cast<std::size_t>(i)], dims[static_cast<std::size_t>(i)]) =
              gi(k, kk) * CMat::Identity(dims[static_cast<std::size_t>(i)], dims[static_cast<std::size_t>(i)]);
      off += Ka * dims[static_cast<std::size_t>(i)];
    }
  }
  // Z K Z^H with Z = bdiag(I_K kron X_i), K_ij = (1-delta_ij) P diag(vec(Gamma_ij)),
  // P the vec-transpose permutation (column-major vec).
  {
    const Eigen::Index K2 = Ka * Ka;
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < p; ++j) {
        if (i == j) continue;
        CMat gij = gamma_of(X, i, j);
        // K_ij entry (a + b*Ka, c + e*Ka): P diag(vec(Gamma_ij)) has
        // row a+b*Ka carrying vec(Gamma)^T... build explicitly.
        CMat kij = CMat::Zero(K2, K2);
        for (Eigen::Index a = 0; a < Ka; ++a)
          for (Eigen::Index b = 0; b < Ka; ++b)
            // vec(M)[a+b*Ka] = vec(M^T)[b+a*Ka]; diag scales entry (b+a*Ka)
            kij(a + b * Ka, b + a * Ka) = gij(b, a);
        // block (i,j) of Z K Z^H: (I kron X_i) kij (I kron X_j)^H
        CMat zi(Ka * dims[static_cast<std::size_t>(i)], K2);
        zi.setZero();
        for (Eigen::Index k = 0; k < Ka; ++k)
          zi.block(k * dims[static_cast<std::size_t>(i)], k * Ka, dims[static_cast<std::size_t>(i)], Ka) =
              X[static_cast<std::size_t>(i)];
        CMat zj(Ka * dims[static_cast<std::size_t>(j)], K2);
        zj.setZero();
        for (Eigen::Index k = 0; k < Ka; ++k)
          zj.block(k * dims[static_cast<std::size_t>(j)], k * Ka, dims[static_cast<std::size_t>(j)], Ka) =
              X[static_cast<std::size_t>(j)];
        info.block(mode_off[static_cast<std::size_t>(i)], mode_off[static_cast<std::size_t>(j)],
                   Ka * dims[static_cast<std::size_t>(i)], Ka * dims[static_cast<std::size_t>(j)]) +=
            zi * kij * zj.adjoint();
      }
    }
  }
  info /= sigma2;

  // Constraint nullspace basis: per data-mode/user an orthonormal complement
  // of the truth vector; identity blocks for the channel mode.
  Eigen::Index red = 0;
  for (int i = 0; i < p - 1; ++i) red += Ka * (dims[static_cast<std::size_t>(i)] - 1);
  red += Ka * dims[static_cast<std::size_t>(p) - 1];
  CMat nu = CMat::Zero(n, red);
  {
    Eigen::Index r0 = 0, c0 = 0;
    for (int i = 0; i < p - 1; ++i) {
      for (Eigen::Index k = 0; k < Ka; ++k) {
        auto basis = orth_complement_basis(X[static_cast<std::size_t>(i)].col(k));
        nu.block(r0, c0, dims[static_cast<std::size_t>(i)], dims[static_cast<std::size_t>(i)] - 1) = basis.columns;
        r0 += dims[static_cast<std::size_t>(i)];
        c0 += dims[static_cast<std::size_t>(i)] - 1;
      }
    }
    for (Eigen::Index k = 0; k < Ka; ++k) {
      nu.block(r0, c0, dims[static_cast<std::size_t>(p) - 1], dims[static_cast<std::size_t>(p) - 1]) =
          CMat::Identity(dims[static_cast<std::size_t>(p) - 1], dims[static_cast<std::size_t>(p) - 1]);
      r0 += dims[static_cast<std::size_t>(p) - 1];
      c0 += dims[static_cast<std::size_t>(p) - 1];
    }
  }

  CMat proj = nu.adjoint() * info * nu;
  Eigen::FullPivLU<CMat> lu(proj);
  if (!lu.isInvertible()) {
    Eigen::JacobiSVD<CMat> svd(proj);
    const double cond = svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
    std::ostringstream os;
    os << "crb_exact: singular projected Fisher matrix (cond ~ " << cond << ")";
    throw std::runtime_error(os.str());
  }
  CMat pinv = lu.inverse();

  // xi_{i,k} = trace of the (i,k) diagonal block of nu * pinv * nu^H,
  // divided by T_i; with the orthonormal per-block nu this is just the
  // matching diagonal sub-block trace of pinv.
  std::vector<std::vector<double>> out(static_cast<std::size_t>(p) - 1,
                                       std::vector<double>(static_cast<std::size_t>(Ka), 0.0));
  Eigen::Index c0 = 0;
  for (int i = 0; i < p - 1; ++i) {
    for (Eigen::Index k = 0; k < Ka; ++k) {
      const Eigen::Index w = dims[static_cast<std::size_t>(i)] - 1;
      const double tr = pinv.block(c0, c0, w, w).trace().real();
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] =
          tr / static_cast<double>(dims[static_cast<std::size_t>(i)]);
      c0 += w;
    }
  }
  return out;
}

double xi_prop1(const FactorSet& truth, double sigma2, int i, Eigen::Index k) {
  auto X = stack_modes(truth);
  if (i < 0 || i >= static_cast<int>(X.size()) - 1)
    throw std::invalid_argument("xi_prop1: data-mode index out of range");
  const Eigen::Index Ka = X[0].cols();
  const Eigen::Index Ti = X[static_cast<std::size_t>(i)].rows();
  CMat gamma = gamma_of(X, i, i);
  CMat gm12 = inv_sqrt_hermitian(gamma, "xi_prop1");
  CMat ginv = gm12 * gm12;

  double overlap2 = 0.0;
  if (Ka > 1) {
    CMat gen(Ka * Ti, Ka - 1);
    Eigen::Index c = 0;
    for (Eigen::Index kp = 0; kp < Ka; ++kp) {
      if (kp == k) continue;
      CVec col(Ka * Ti);
      for (Eigen::Index a = 0; a < Ka; ++a)
        col.segment(a * Ti, Ti) = gm12(a, kp) * X[static_cast<std::size_t>(i)].col(kp);
      gen.col(c++) = col;
    }
    CMat u = orthonormalize(gen);
    auto basis = orth_complement_basis(X[static_cast<std::size_t>(i)].col(k));
    CVec lam = gm12.col(k) / gm12.col(k).norm();
    CMat v(Ka * Ti, Ti - 1);
    for (Eigen::Index a = 0; a < Ka; ++a)
      v.block(a * Ti, 0, Ti, Ti - 1) = lam(a) * basis.columns;
    overlap2 = (u.adjoint() * v).squaredNorm();
  }
  const double pn2 = 1.0 / ginv(k, k).real();
  return (static_cast<double>(Ti) - 1.0 - overlap2) * sigma2 / (static_cast<double>(Ti) * pn2);
}

XiStarResult xi_star(const FactorSet& truth, double sigma2, int i, Eigen::Index k) {
  auto X = stack_modes(truth);
  if (i < 0 || i >= static_cast<int>(X.size()) - 1)
    throw std::invalid_argument("xi_star: data-mode index out of range");
  const Eigen::Index Ti = X[static_cast<std::size_t>(i)].rows();
  CMat gamma = gamma_of(X, i, i);
  CMat ginv = inv_hermitian(gamma, "xi_star");
  Eigen::VectorXd dinv_sqrt = ginv.diagonal().real().array().rsqrt();
  CMat pencil = dinv_sqrt.asDiagonal() * ginv * dinv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<CMat> es(pencil);
  const double eta_minus = es.eigenvalues().minCoeff();
  const double eta_plus = es.eigenvalues().maxCoeff();
  const double pn2 = 1.0 / ginv(k, k).real();
  const double corr = 1.0 - (eta_plus * eta_plus - 1.0) / ((static_cast<double>(Ti) - 1.0) * eta_minus);
  // Under severe user overlap the correction can turn negative; 0 is still a
  // valid (trivial) lower bound there.
  const double xi = std::max(
      0.0, sigma2 * (static_cast<double>(Ti) - 1.0) / (static_cast<double>(Ti) * pn2) * corr);
  return {xi, eta_minus, eta_plus};
}

double alpha_from_xi(double xi) {
  if (xi < 0.0) throw std::invalid_argument("alpha_from_xi: xi must be >= 0");
  return 1.0 / std::sqrt(1.0 + xi);
}

double mse_lower_bound(double xi_star) {
  if (xi_star < 0.0) throw std::invalid_argument("mse_lower_bound: xi must be >= 0");
  return 2.0 * (1.0 - 1.0 / std::sqrt(1.0 + xi_star));
}

AmpResult amp_fixed_point(const TbmConfig& cfg, double sigma2, AmpStart start) {
  const int d = cfg.d();
  const int p = d + 1;
  const Eigen::Index Ka = cfg.Ka;
  std::vector<Eigen::Index> dims_all = cfg.tensor_shape();
  double prod = 1.0;
  for (auto t : dims_all) prod *= static_cast<double>(t);
  const double expo = (1.0 - d) / (1.0 + d);

  AmpResult res;
  res.delta.resize(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i)
    res.delta[static_cast<std::size_t>(i)] =
        sigma2 / static_cast<double>(dims_all[static_cast<std::size_t>(i)]) * std::pow(prod, expo);

  std::vector<Eigen::MatrixXd> m(static_cast<std::size_t>(p));
  for (auto& mi : m)
    mi = (start == AmpStart::informative) ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(Ka, Ka))
                                          : Eigen::MatrixXd(Eigen::MatrixXd::Zero(Ka, Ka));

  auto had_except = [&](const std::vector<Eigen::MatrixXd>& ms, int i) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Ones(Ka, Ka);
    for (int j = 0; j < p; ++j)
      if (j != i) acc = acc.cwiseProduct(ms[static_cast<std::size_t>(j)]);
    return acc;
  };

  const int max_iters = 10000;
  double damping = 1.0;
  double prev_diff = 0.0;
  int oscillations = 0;
  int it = 0;
  for (; it < max_iters; ++it) {
    std::vector<Eigen::MatrixXd> mn(static_cast<std::size_t>(p));
    double diff = 0.0;
    for (int i = 0; i < p; ++i) {
      Eigen::MatrixXd pi = had_except(m, i);
      Eigen::MatrixXd target =
          (res.delta[static_cast<std::size_t>(i)] * Eigen::MatrixXd::Identity(Ka, Ka) + pi)
              .ldlt()
              .solve(pi);
      Eigen::MatrixXd next =
          damping * target + (1.0 - damping) * m[static_cast<std::size_t>(i)];
      diff = std::max(diff, (next - m[static_cast<std::size_t>(i)]).cwiseAbs().maxCoeff());
      mn[static_cast<std::size_t>(i)] = std::move(next);
    }
    // oscillation detection: alternating non-shrinking updates
    if (it > 10 && diff > 0.999 * prev_diff && diff > 1e-12) {
      if (++oscillations > 50) damping = 0.5;
    } else {
      oscillations = 0;
    }
    prev_diff = diff;
    m = std::move(mn);
    if (diff < 1e-12) break;
  }
  res.iterations = it;
  res.converged = it < max_iters;
  res.m = m;

  res.mse.assign(static_cast<std::size_t>(p), std::vector<double>(static_cast<std::size_t>(Ka), 0.0));
  for (int i = 0; i < p; ++i) {
    Eigen::MatrixXd pi = had_except(m, i);
    Eigen::MatrixXd core =
        (pi + res.delta[static_cast<std::size_t>(i)] * Eigen::MatrixXd::Identity(Ka, Ka))
            .ldlt()
            .solve(pi);
    for (Eigen::Index k = 0; k < Ka; ++k)
      res.mse[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] =
          1.0 + core(k, k) - 2.0 * m[static_cast<std::size_t>(i)](k, k);
  }
  return res;
}

std::string bound_report_csv_header() {
  return "i,k,xi_exact,xi_prop1,xi_star,xi_approx,mse_lb,alpha,eta_minus,eta_plus,mse_amp";
}

std::string bound_row_csv(const BoundRow& row) {
  std::ostringstream os;
  os.precision(12);
  os << row.i << ',' << row.k << ',' << row.xi_exact << ',' << row.xi_prop1 << ',' << row.xi_star
     << ',' << row.xi_approx << ',' << row.mse_lb << ',' << row.alpha << ',' << row.eta_minus
     << ',' << row.eta_plus << ',' << row.mse_amp;
  return os.str();
}

}  // namespace tbm
