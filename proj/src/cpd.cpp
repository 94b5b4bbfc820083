#include "tbm/cpd.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "tbm/rng.hpp"

namespace tbm {

void SolverOptions::validate() const {
  if (max_iters < 1) throw std::invalid_argument("SolverOptions: max_iters must be >= 1");
  if (grad_tol <= 0 || rel_residual_tol <= 0 || lambda_scale <= 0 || cg_max_iters < 1)
    throw std::invalid_argument("SolverOptions: tolerances must be positive");
  if (init == Init::provided && init_factors == nullptr)
    throw std::invalid_argument("SolverOptions: provided init needs init_factors");
}

namespace {

using Factors = std::vector<CMat>;  // Z[i] is dims[i] x Ka, i = 0..p-1

// Khatri-Rao of A and B with A varying slowest.
CMat khatri_rao(const CMat& a, const CMat& b) {
  CMat out(a.rows() * b.rows(), a.cols());
  for (Eigen::Index k = 0; k < a.cols(); ++k)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.col(k).segment(i * b.rows(), b.rows()) = a(i, k) * b.col(k);
  return out;
}

// KR over all modes except i, highest mode slowest is NOT what unfold wants:
// unfold's columns have the lowest remaining mode fastest, i.e. the kron is
// taken in descending mode order.
CMat kr_except(const Factors& z, int i) {
  CMat w;
  bool first = true;
  for (int j = static_cast<int>(z.size()) - 1; j >= 0; --j) {
    if (j == i) continue;
    if (first) {
      w = z[static_cast<std::size_t>(j)];
      first = false;
    } else {
      w = khatri_rao(w, z[static_cast<std::size_t>(j)]);
    }
  }
  return w;
}

CTensor model_from(const Factors& z, const std::vector<Eigen::Index>& shape) {
  CMat w = kr_except(z, 0);
  return fold(z[0] * w.transpose(), 1, shape);
}

double sq_norm(const Factors& v) {
  double s = 0.0;
  for (const auto& m : v) s += m.squaredNorm();
  return s;
}

double dot_re(const Factors& a, const Factors& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += (a[i].conjugate().cwiseProduct(b[i])).sum().real();
  return s;
}

struct GnWork {
  const CTensor& y;
  std::vector<Eigen::Index> shape;
  int p;
  std::vector<CMat> w;  // kr_except per mode, refreshed per outer iteration

  explicit GnWork(const CTensor& y_) : y(y_), shape(y_.shape()), p(static_cast<int>(shape.size())) {}

  void refresh(const Factors& z) {
    w.resize(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) w[static_cast<std::size_t>(i)] = kr_except(z, i);
  }

  CTensor apply_j(const Factors& v) const {
    CTensor out(shape);
    for (int i = 0; i < p; ++i)
      out.data() += fold(v[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)].transpose(),
                         i + 1, shape)
                        .data();
    return out;
  }

  Factors apply_jh(const CTensor& u) const {
    Factors out(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i)
      out[static_cast<std::size_t>(i)] =
          unfold(u, i + 1) * w[static_cast<std::size_t>(i)].conjugate();
    return out;
  }

  Factors normal_op(const Factors& v, double lambda) const {
    Factors out = apply_jh(apply_j(v));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += lambda * v[i];
    return out;
  }
};

// CG on (J^H J + lambda I) delta = g.
Factors solve_normal_cg(const GnWork& work, const Factors& g, double lambda, int max_iters) {
  Factors x(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) x[i] = CMat::Zero(g[i].rows(), g[i].cols());
  Factors r = g;
  Factors p = r;
  double rs = sq_norm(r);
  const double tol = 1e-12 * rs;
  for (int it = 0; it < max_iters && rs > tol; ++it) {
    Factors ap = work.normal_op(p, lambda);
    const double denom = dot_re(p, ap);
    if (!(denom > 0.0)) break;
    const double alpha = rs / denom;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    const double rs_new = sq_norm(r);
    const double beta = rs_new / rs;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    rs = rs_new;
  }
  return x;
}

// One exact ALS sweep; never increases the objective.
void als_sweep(const CTensor& y, Factors& z) {
  const int p = static_cast<int>(z.size());
  for (int i = 0; i < p; ++i) {
    CMat w = kr_except(z, i);
    CMat gram = CMat::Identity(z[0].cols(), z[0].cols());
    {
      // Hadamard product of the per-mode Grams equals w^H w.
      CMat acc = CMat::Ones(z[0].cols(), z[0].cols());
      for (int j = 0; j < p; ++j) {
        if (j == i) continue;
        acc = acc.cwiseProduct(
            (z[static_cast<std::size_t>(j)].adjoint() * z[static_cast<std::size_t>(j)]).eval());
      }
      gram = acc;
    }
    const double ridge = 1e-12 * std::max(1.0, gram.real().trace());
    gram += ridge * CMat::Identity(gram.rows(), gram.cols());
    CMat a = unfold(y, i + 1) * w.conjugate();
    // Z_i = A * conj(gram)^-1  (gram is Hermitian PSD)
    z[static_cast<std::size_t>(i)] =
        gram.conjugate().partialPivLu().solve(a.transpose()).transpose();
  }
}

Factors init_factors_random(const std::vector<Eigen::Index>& shape, Eigen::Index Ka,
                            std::uint64_t seed) {
  const int p = static_cast<int>(shape.size());
  Factors z(static_cast<std::size_t>(p));
  RngStream rng = RngStream::derive(seed, 0xcdf0);
  for (int i = 0; i < p; ++i) {
    CMat m(shape[static_cast<std::size_t>(i)], Ka);
    for (Eigen::Index k = 0; k < Ka; ++k) {
      if (i < p - 1)
        m.col(k) = rng.sphere_vec(shape[static_cast<std::size_t>(i)],
                                  std::sqrt(static_cast<double>(shape[static_cast<std::size_t>(i)])));
      else
        m.col(k) = rng.cnormal_vec(shape[static_cast<std::size_t>(i)]);
    }
    z[static_cast<std::size_t>(i)] = m;
  }
  return z;
}

// Spectral start: mode i takes the top-Ka eigenvectors of the unfolding
// Gram U U^H. Phases and scales across modes are arbitrary at this point;
// one exact ALS sweep straight after makes them mutually consistent.
Factors init_factors_svd(const CTensor& y, Eigen::Index Ka, std::uint64_t seed) {
  const auto& shape = y.shape();
  const int p = static_cast<int>(shape.size());
  RngStream rng = RngStream::derive(seed, 0x5bd1);
  Factors z(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) {
    const Eigen::Index Ti = shape[static_cast<std::size_t>(i)];
    CMat u = unfold(y, i + 1);
    Eigen::SelfAdjointEigenSolver<CMat> eig(u * u.adjoint());
    CMat m(Ti, Ka);
    const double scale = (i < p - 1) ? std::sqrt(static_cast<double>(Ti)) : 1.0;
    for (Eigen::Index k = 0; k < Ka; ++k) {
      if (k < Ti)
        m.col(k) = eig.eigenvectors().col(Ti - 1 - k) * scale;  // descending order
      else
        m.col(k) = rng.sphere_vec(Ti, scale);
    }
    z[static_cast<std::size_t>(i)] = m;
  }
  als_sweep(y, z);
  return z;
}

Factors factors_from_set(const FactorSet& f) {
  const int d = f.d();
  const Eigen::Index Ka = f.Ka();
  Factors z(static_cast<std::size_t>(d) + 1);
  for (int i = 0; i < d; ++i) {
    const auto& mode = f.x[static_cast<std::size_t>(i)];
    CMat m(mode[0].size(), Ka);
    for (Eigen::Index k = 0; k < Ka; ++k) m.col(k) = mode[static_cast<std::size_t>(k)];
    z[static_cast<std::size_t>(i)] = m;
  }
  CMat h(f.h[0].size(), Ka);
  for (Eigen::Index k = 0; k < Ka; ++k) h.col(k) = f.h[static_cast<std::size_t>(k)];
  z[static_cast<std::size_t>(d)] = h;
  return z;
}

FactorSet set_from_factors(const Factors& z) {
  FactorSet f;
  const int p = static_cast<int>(z.size());
  const Eigen::Index Ka = z[0].cols();
  f.x.resize(static_cast<std::size_t>(p) - 1);
  for (int i = 0; i + 1 < p; ++i) {
    f.x[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(Ka));
    for (Eigen::Index k = 0; k < Ka; ++k)
      f.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] =
          z[static_cast<std::size_t>(i)].col(k);
  }
  f.h.resize(static_cast<std::size_t>(Ka));
  for (Eigen::Index k = 0; k < Ka; ++k)
    f.h[static_cast<std::size_t>(k)] = z[static_cast<std::size_t>(p) - 1].col(k);
  return f;
}

// Push all scale into the channel mode so data factors sit on their spheres.
void normalize_factors(Factors& z) {
  const int p = static_cast<int>(z.size());
  const Eigen::Index Ka = z[0].cols();
  for (Eigen::Index k = 0; k < Ka; ++k) {
    double carry = 1.0;
    for (int i = 0; i + 1 < p; ++i) {
      auto col = z[static_cast<std::size_t>(i)].col(k);
      const double n = col.norm();
      const double target = std::sqrt(static_cast<double>(col.size()));
      if (n > 0.0) {
        col *= target / n;
        carry *= n / target;
      }
    }
    z[static_cast<std::size_t>(p) - 1].col(k) *= carry;
  }
}

}  // namespace

CTensor model_tensor(const FactorSet& f) {
  Factors z = factors_from_set(f);
  std::vector<Eigen::Index> shape;
  for (const auto& m : z) shape.push_back(m.rows());
  return model_from(z, shape);
}

CpdResult solve_cpd(const CTensor& y, Eigen::Index Ka, const SolverOptions& opts,
                    const FactorSet* truth) {
  opts.validate();
  if (Ka < 1) throw std::invalid_argument("solve_cpd: Ka must be >= 1");
  if (y.order() < 2) throw std::invalid_argument("solve_cpd: tensor order must be >= 2");
  if (opts.init == SolverOptions::Init::genie && truth == nullptr)
    throw std::invalid_argument("solve_cpd: genie init requires truth");

  const auto& shape = y.shape();
  const int p = static_cast<int>(shape.size());

  CpdResult res;
  for (int i = 0; i < p; ++i) {
    Eigen::Index rest = 1;
    for (int j = 0; j < p; ++j)
      if (j != i) rest *= shape[static_cast<std::size_t>(j)];
    if (Ka > rest) res.infeasible_rank = true;
  }

  Factors z;
  switch (opts.init) {
    case SolverOptions::Init::genie:
      z = factors_from_set(*truth);
      break;
    case SolverOptions::Init::provided:
      z = factors_from_set(*opts.init_factors);
      break;
    case SolverOptions::Init::random:
      z = init_factors_random(shape, Ka, opts.seed);
      break;
    case SolverOptions::Init::svd:
      z = init_factors_svd(y, Ka, opts.seed);
      break;
  }

  GnWork work(y);
  const double ynorm2 = y.data().squaredNorm();
  const double entries = static_cast<double>(y.size());

  double f = (y.data() - model_from(z, shape).data()).squaredNorm();
  if (!std::isfinite(f)) throw std::runtime_error("solve_cpd: non-finite initial residual");
  double lambda = opts.lambda_scale * f / entries;
  if (!(lambda > 0.0)) lambda = 1e-16;

  int stall_count = 0;
  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    work.refresh(z);
    CTensor r(shape);
    r.data() = y.data() - model_from(z, shape).data();
    Factors g = work.apply_jh(r);
    const double gnorm = std::sqrt(sq_norm(g));
    if (opts.keep_trace) res.trace.push_back({iter, f, gnorm});
    if (gnorm <= opts.grad_tol * std::max(ynorm2, 1e-300)) {
      res.converged = true;
      break;
    }

    double f_new = f;
    bool accepted = false;
    for (int attempt = 0; attempt < 8 && !accepted; ++attempt) {
      Factors delta = solve_normal_cg(work, g, lambda, opts.cg_max_iters);
      Factors cand = z;
      for (std::size_t i = 0; i < cand.size(); ++i) cand[i] += delta[i];
      const double fc = (y.data() - model_from(cand, shape).data()).squaredNorm();
      if (!std::isfinite(fc)) throw std::runtime_error("solve_cpd: non-finite residual (divergence)");
      if (fc <= f) {
        z = std::move(cand);
        f_new = fc;
        lambda = std::max(lambda * 0.1, 1e-300);
        accepted = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted) {
      // GN cannot make progress at any damping tried; fall back to ALS.
      als_sweep(y, z);
      f_new = (y.data() - model_from(z, shape).data()).squaredNorm();
    }

    const double rel_dec = (f - f_new) / std::max(f, 1e-300);
    f = f_new;
    if (rel_dec < 1e-12)
      ++stall_count;
    else
      stall_count = 0;
    if (stall_count >= 5) {
      als_sweep(y, z);
      const double fa = (y.data() - model_from(z, shape).data()).squaredNorm();
      if (fa <= f) f = fa;
      stall_count = 0;
    }
    if (rel_dec >= 0.0 && rel_dec < opts.rel_residual_tol && iter > 0) {
      res.converged = true;
      ++iter;
      break;
    }
  }

  normalize_factors(z);
  res.factors = set_from_factors(z);
  res.residual = (y.data() - model_from(z, shape).data()).squaredNorm();
  res.iterations = iter;
  if (!std::isfinite(res.residual)) throw std::runtime_error("solve_cpd: non-finite residual");
  return res;
}

Alignment align_to_truth(const CpdResult& est, const FactorSet& truth) {
  const int d = truth.d();
  const Eigen::Index Ka = truth.Ka();
  if (est.factors.d() != d || est.factors.Ka() != Ka)
    throw std::invalid_argument("align_to_truth: dimension mismatch");

  Eigen::MatrixXd score = Eigen::MatrixXd::Zero(Ka, Ka);
  for (Eigen::Index kt = 0; kt < Ka; ++kt) {
    for (Eigen::Index ke = 0; ke < Ka; ++ke) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) {
        const auto& x = truth.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(kt)];
        const auto& zc = est.factors.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(ke)];
        s += std::abs(zc.dot(x)) / static_cast<double>(x.size());
      }
      const auto& h = truth.h[static_cast<std::size_t>(kt)];
      const auto& hh = est.factors.h[static_cast<std::size_t>(ke)];
      const double denom = h.norm() * hh.norm();
      if (denom > 0.0) s += std::abs(hh.dot(h)) / denom;
      score(kt, ke) = s;
    }
  }

  // Greedy matching: at the separations where decoding works the score
  // matrix is strongly diagonal-dominant, so greedy == optimal in practice.
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(Ka), -1);
  std::vector<bool> row_used(static_cast<std::size_t>(Ka), false), col_used(static_cast<std::size_t>(Ka), false);
  for (Eigen::Index step = 0; step < Ka; ++step) {
    double best = -1.0;
    Eigen::Index br = 0, bc = 0;
    for (Eigen::Index r = 0; r < Ka; ++r) {
      if (row_used[static_cast<std::size_t>(r)]) continue;
      for (Eigen::Index c = 0; c < Ka; ++c) {
        if (col_used[static_cast<std::size_t>(c)]) continue;
        if (score(r, c) > best) {
          best = score(r, c);
          br = r;
          bc = c;
        }
      }
    }
    perm[static_cast<std::size_t>(br)] = bc;
    row_used[static_cast<std::size_t>(br)] = true;
    col_used[static_cast<std::size_t>(bc)] = true;
  }

  Alignment al;
  al.permutation = perm;
  al.phase.assign(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(Ka), 0.0));
  al.mse.assign(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(Ka), 0.0));
  al.aligned.x.resize(static_cast<std::size_t>(d));
  for (auto& mode : al.aligned.x) mode.resize(static_cast<std::size_t>(Ka));
  al.aligned.h.resize(static_cast<std::size_t>(Ka));

  const std::complex<double> I(0.0, 1.0);
  for (Eigen::Index kt = 0; kt < Ka; ++kt) {
    const Eigen::Index ke = perm[static_cast<std::size_t>(kt)];
    double phase_sum = 0.0;
    for (int i = 0; i < d; ++i) {
      const auto& x = truth.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(kt)];
      CVec zc = est.factors.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(ke)];
      const std::complex<double> ip = x.dot(zc);  // x^H z
      double phi = std::arg(ip);
      zc *= std::exp(-I * phi);
      double stored = phi < 0.0 ? phi + 2.0 * M_PI : phi;
      al.phase[static_cast<std::size_t>(i)][static_cast<std::size_t>(kt)] = stored;
      phase_sum += phi;
      al.aligned.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(kt)] = zc;
      al.mse[static_cast<std::size_t>(i)][static_cast<std::size_t>(kt)] =
          (zc - x).squaredNorm() / static_cast<double>(x.size());
    }
    al.aligned.h[static_cast<std::size_t>(kt)] =
        est.factors.h[static_cast<std::size_t>(ke)] * std::exp(I * phase_sum);
  }
  return al;
}

double empirical_mse(const Alignment& aligned, int i, Eigen::Index k) {
  return aligned.mse.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k));
}

void write_trace_csv(const CpdResult& res, const std::string& path) {
  std::ofstream os(path);
  os << "iter,residual,grad_norm\n";
  for (const auto& row : res.trace)
    os << row.iter << ',' << row.residual << ',' << row.grad_norm << '\n';
}

}  // namespace tbm
