#include <doctest.h>

#include <cmath>
#include <complex>

#include "tbm/bounds.hpp"
#include "tbm/equiv.hpp"
#include "tbm/rng.hpp"

using namespace tbm;

namespace {

FactorSet random_truth(const std::vector<Eigen::Index>& dims, Eigen::Index N, Eigen::Index Ka,
                       std::uint64_t seed) {
  RngStream rng(seed);
  FactorSet f;
  f.x.resize(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i)
    for (Eigen::Index k = 0; k < Ka; ++k)
      f.x[i].push_back(rng.sphere_vec(dims[i], std::sqrt(static_cast<double>(dims[i]))));
  for (Eigen::Index k = 0; k < Ka; ++k) f.h.push_back(rng.cnormal_vec(N));
  return f;
}

double single_user_closed_form(const FactorSet& f, double sigma2, int i) {
  double prod = 1.0;
  for (int j = 0; j < f.d(); ++j)
    if (j != i) prod *= f.x[static_cast<std::size_t>(j)][0].squaredNorm();
  prod *= f.h[0].squaredNorm();
  const double Ti = static_cast<double>(f.x[static_cast<std::size_t>(i)][0].size());
  return sigma2 * (Ti - 1.0) / (Ti * prod);
}

}  // namespace

TEST_CASE("single-user exact value equals the closed form") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    FactorSet f = random_truth({4, 3}, 2, 1, 100 + s);
    auto xi = crb_exact(f, 0.07);
    for (int i = 0; i < 2; ++i)
      CHECK(xi[static_cast<std::size_t>(i)][0] ==
            doctest::Approx(single_user_closed_form(f, 0.07, i)).epsilon(1e-8));
  }
}

TEST_CASE("exact value scales linearly in the noise variance") {
  FactorSet f = random_truth({5, 4}, 3, 2, 7);
  auto a = crb_exact(f, 0.02);
  auto b = crb_exact(f, 0.06);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i].size(); ++k)
      CHECK(b[i][k] == doctest::Approx(3.0 * a[i][k]).epsilon(1e-10));
}

TEST_CASE("closed-form bounds stay below the exact value") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    FactorSet f = random_truth({6, 5}, 4, 2, 300 + s);
    auto exact = crb_exact(f, 0.05);
    for (int i = 0; i < 2; ++i)
      for (Eigen::Index k = 0; k < 2; ++k) {
        const double p1 = xi_prop1(f, 0.05, i, k);
        const double st = xi_star(f, 0.05, i, k).xi_star;
        CHECK(p1 <= exact[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] + 1e-9);
        CHECK(st <= p1 + 1e-9);
      }
  }
}

TEST_CASE("first closed-form bound, single-user arithmetic") {
  // T_i = 4, sigma2 = 0.1, product of the other factor energies = 24
  FactorSet f;
  RngStream rng(9);
  f.x.resize(2);
  f.x[0].push_back(rng.sphere_vec(4, 2.0));                 // ||x_1||^2 = 4
  f.x[1].push_back(rng.sphere_vec(3, std::sqrt(3.0)));      // ||x_2||^2 = 3
  f.h.push_back(rng.sphere_vec(2, std::sqrt(8.0)));         // ||h||^2 = 8 -> 3*8 = 24
  CHECK(xi_prop1(f, 0.1, 0, 0) == doctest::Approx(0.1 * 3.0 / (4.0 * 24.0)).epsilon(1e-12));
  CHECK(xi_prop1(f, 0.2, 0, 0) == doctest::Approx(2.0 * xi_prop1(f, 0.1, 0, 0)).epsilon(1e-12));
}

TEST_CASE("orthogonal users remove the overlap term") {
  // Mode-2 factors orthogonal across users makes every Gram diagonal.
  RngStream rng(17);
  FactorSet f;
  f.x.resize(2);
  CVec a = rng.sphere_vec(6, std::sqrt(6.0));
  f.x[0] = {a, CVec(orth_complement_basis(a).columns.col(0) * std::sqrt(6.0))};
  CVec b = rng.sphere_vec(5, std::sqrt(5.0));
  f.x[1] = {b, CVec(orth_complement_basis(b).columns.col(0) * std::sqrt(5.0))};
  CVec h = rng.cnormal_vec(4);
  f.h = {h, CVec(orth_complement_basis(h).columns.col(0) * h.norm())};

  const double sigma2 = 0.03;
  for (int i = 0; i < 2; ++i) {
    GramData g = gram_data(f, i);
    CHECK(std::abs(g.gamma(0, 1)) < 1e-9);
    for (Eigen::Index k = 0; k < 2; ++k) {
      const double Ti = static_cast<double>(f.x[static_cast<std::size_t>(i)][0].size());
      const double expect = sigma2 * (Ti - 1.0) / (Ti * proj_residual_norm2(g, k));
      CHECK(xi_prop1(f, sigma2, i, k) == doctest::Approx(expect).epsilon(1e-9));
      const XiStarResult xs = xi_star(f, sigma2, i, k);
      CHECK(xs.eta_minus == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(xs.eta_plus == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(xs.xi_star == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("single-user eigenvalue pair degenerates to one") {
  FactorSet f = random_truth({4, 3}, 2, 1, 23);
  const XiStarResult xs = xi_star(f, 0.1, 0, 0);
  CHECK(xs.eta_minus == doctest::Approx(1.0));
  CHECK(xs.eta_plus == doctest::Approx(1.0));
  CHECK(xs.xi_star == doctest::Approx(single_user_closed_form(f, 0.1, 0)).epsilon(1e-10));
}

TEST_CASE("second bound sits below the first on random three-user draws") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    FactorSet f = random_truth({6, 5}, 4, 3, 900 + s);
    for (int i = 0; i < 2; ++i)
      for (Eigen::Index k = 0; k < 3; ++k)
        CHECK(xi_star(f, 0.05, i, k).xi_star <= xi_prop1(f, 0.05, i, k) + 1e-9);
  }
}

TEST_CASE("variance approximation arithmetic") {
  TbmConfig cfg;
  cfg.dims = {4, 3};
  cfg.N = 2;
  cfg.Ka = 1;
  cfg.sigma2 = 0.1;
  CHECK(xi_approx(cfg, 2.0, 0.1, 0) == doctest::Approx(0.0125).epsilon(1e-12));
  cfg.Ka = 3;
  CHECK(xi_approx(cfg, 2.0, 0.1, 0) == doctest::Approx(0.01875).epsilon(1e-12));
  cfg.Ka = 7;  // denominator 24 - 4*6 = 0
  CHECK_THROWS(xi_approx(cfg, 2.0, 0.1, 0));
}

TEST_CASE("variance approximation matches the isotropic average") {
  TbmConfig cfg;
  cfg.dims = {12, 10};
  cfg.N = 8;
  cfg.Ka = 2;
  cfg.sigma2 = 0.05;
  double ratio_acc = 0.0;
  const int draws = 200;
  for (int t = 0; t < draws; ++t) {
    FactorSet f = random_truth(cfg.dims, cfg.N, cfg.Ka, 5000 + static_cast<std::uint64_t>(t));
    const double st = xi_star(f, cfg.sigma2, 0, 0).xi_star;
    const double ap = xi_approx(cfg, f.h[0].squaredNorm(), cfg.sigma2, 0);
    ratio_acc += st / ap;
  }
  CHECK(ratio_acc / draws == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("bias-variance coupling scalars") {
  CHECK(alpha_from_xi(0.0) == 1.0);
  CHECK(alpha_from_xi(3.0) == doctest::Approx(0.5));
  CHECK(alpha_from_xi(0.5) < alpha_from_xi(0.2));
  CHECK_THROWS(alpha_from_xi(-0.1));

  CHECK(mse_lower_bound(0.0) == 0.0);
  CHECK(mse_lower_bound(0.0125) == doctest::Approx(0.012346).epsilon(1e-4));
  for (double xi : {1e-3, 5e-3, 9e-3})
    CHECK(mse_lower_bound(xi) == doctest::Approx(xi).epsilon(0.01));
}

TEST_CASE("exact value is invariant under the scale ambiguity") {
  FactorSet f = random_truth({5, 4}, 3, 2, 77);
  auto base = crb_exact(f, 0.04);
  const std::complex<double> c = std::exp(std::complex<double>(0.0, 0.83));
  FactorSet g = f;
  for (Eigen::Index k = 0; k < 2; ++k) {
    g.x[0][static_cast<std::size_t>(k)] *= c;
    g.x[1][static_cast<std::size_t>(k)] *= std::conj(c);
  }
  auto twisted = crb_exact(g, 0.04);
  for (std::size_t i = 0; i < base.size(); ++i)
    for (std::size_t k = 0; k < base[i].size(); ++k)
      CHECK(std::abs(twisted[i][k] - base[i][k]) < 1e-9);
}

TEST_CASE("size cap guard") {
  FactorSet f = random_truth({5, 4}, 3, 2, 78);
  CHECK_THROWS(crb_exact(f, 0.04, 10));
}

TEST_CASE("fixed point of the asymptotic recursion") {
  TbmConfig cfg;
  cfg.dims = {4, 3};
  cfg.N = 2;
  cfg.Ka = 1;
  cfg.sigma2 = 1.0;

  SUBCASE("zero start stays at the uninformative point") {
    AmpResult res = amp_fixed_point(cfg, 1.0, AmpStart::zero);
    CHECK(res.mse[0][0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(res.m[0](0, 0) == doctest::Approx(0.0));
  }
  SUBCASE("effective-noise arithmetic") {
    AmpResult res = amp_fixed_point(cfg, 1.0, AmpStart::informative);
    CHECK(res.delta[0] == doctest::Approx(0.25 * std::pow(24.0, -1.0 / 3.0)).epsilon(1e-10));
  }
  SUBCASE("high-SNR limit and range") {
    AmpResult res = amp_fixed_point(cfg, 1e-8, AmpStart::informative);
    CHECK(res.mse[0][0] < 1e-6);
    double prev = 2.0;
    for (double snr_db = -20.0; snr_db <= 20.0; snr_db += 2.0) {
      AmpResult r = amp_fixed_point(cfg, std::pow(10.0, -snr_db / 10.0), AmpStart::informative);
      CHECK(r.mse[0][0] >= -1e-12);
      CHECK(r.mse[0][0] <= 2.0 + 1e-12);
      CHECK(r.mse[0][0] <= prev + 1e-9);
      prev = r.mse[0][0];
    }
  }
}

TEST_CASE("csv row serialization") {
  BoundRow row{0, 1, 1e-3, 9e-4, 8e-4, 9.5e-4, 7.9e-4, 0.999, 0.8, 1.2, 1e-2};
  const std::string line = bound_row_csv(row);
  CHECK(line.find("0,1,0.001") == 0);
  CHECK(bound_report_csv_header().find("xi_exact") != std::string::npos);
}
