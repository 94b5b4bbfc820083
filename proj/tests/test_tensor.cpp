#include <doctest.h>

#include <complex>

#include "tbm/rng.hpp"
#include "tbm/tensor.hpp"

using namespace tbm;
using namespace std::complex_literals;

TEST_CASE("kron basics") {
  CVec a(2), b(1), c(2);
  a << 1.0, 1.0i;
  b << 2.0;
  CVec ab = kron(a, b);
  REQUIRE(ab.size() == 2);
  CHECK(ab(0) == 2.0 + 0.0i);
  CHECK(ab(1) == 2.0i);

  CVec e1(2), e2(2);
  e1 << 1.0, 0.0;
  e2 << 0.0, 1.0;
  CVec k = kron(e1, e2);  // second factor varies fastest
  REQUIRE(k.size() == 4);
  CHECK(k(0) == 0.0 + 0.0i);
  CHECK(k(1) == 1.0 + 0.0i);
  CHECK(k(2) == 0.0 + 0.0i);
  CHECK(k(3) == 0.0 + 0.0i);
}

TEST_CASE("kron norm multiplicativity and associativity") {
  RngStream rng(11);
  CVec a = rng.cnormal_vec(4), b = rng.cnormal_vec(3), c = rng.cnormal_vec(5);
  CHECK(kron(a, b).squaredNorm() ==
        doctest::Approx(a.squaredNorm() * b.squaredNorm()).epsilon(1e-12));
  CVec l = kron(kron(a, b), c);
  CVec r = kron(a, kron(b, c));
  CHECK((l - r).lpNorm<Eigen::Infinity>() < 1e-12 * l.lpNorm<Eigen::Infinity>());
}

TEST_CASE("kron rejects empty input") {
  CVec a(0), b(2);
  b << 1.0, 2.0;
  CHECK_THROWS(kron(a, b));
}

TEST_CASE("rank1 canonical cases") {
  CVec e1(3);
  e1 << 1.0, 0.0, 0.0;
  CTensor t = rank1({e1, e1.head(2), e1});
  CHECK(t.size() == 18);
  CHECK(t.at({0, 0, 0}) == 1.0 + 0.0i);
  CHECK(t.data().squaredNorm() == doctest::Approx(1.0));

  CVec ones2 = CVec::Ones(2), ones3 = CVec::Ones(3);
  CTensor u = rank1({ones2, ones3, ones2});
  for (Eigen::Index i = 0; i < u.size(); ++i) CHECK(u.data()(i) == 1.0 + 0.0i);
}

TEST_CASE("rank1 entry equals product of factor entries") {
  RngStream rng(3);
  CVec a = rng.cnormal_vec(4), b = rng.cnormal_vec(3), c = rng.cnormal_vec(2);
  CTensor t = rank1({a, b, c});
  CHECK(std::abs(t.at({2, 1, 0}) - a(2) * b(1) * c(0)) < 1e-14);
  CHECK(std::abs(t.at({3, 2, 1}) - a(3) * b(2) * c(1)) < 1e-14);
}

TEST_CASE("unfoldings of a rank-1 tensor have numerical rank 1") {
  RngStream rng(5);
  CTensor t = rank1({rng.cnormal_vec(4), rng.cnormal_vec(3), rng.cnormal_vec(2)});
  for (int m = 1; m <= 3; ++m) {
    Eigen::JacobiSVD<CMat> svd(unfold(t, m));
    CHECK(svd.singularValues()(1) < 1e-12 * svd.singularValues()(0));
  }
}

TEST_CASE("unfold/fold round trip and shapes") {
  RngStream rng(7);
  CTensor t({4, 3, 2}, rng.cnormal_vec(24));
  for (int m = 1; m <= 3; ++m) {
    CMat u = unfold(t, m);
    CTensor back = fold(u, m, t.shape());
    CHECK((back.data() - t.data()).lpNorm<Eigen::Infinity>() == 0.0);
  }
  CHECK(unfold(t, 2).rows() == 3);
  CHECK(unfold(t, 2).cols() == 8);
  CHECK_THROWS(unfold(t, 4));
  CHECK_THROWS(unfold(t, 0));
}

TEST_CASE("unfold mode-1 of rank1 is a * kron(c,b)^T") {
  RngStream rng(9);
  CVec a = rng.cnormal_vec(4), b = rng.cnormal_vec(3), c = rng.cnormal_vec(2);
  CMat u = unfold(rank1({a, b, c}), 1);
  CMat expect = a * kron(c, b).transpose();
  CHECK((u - expect).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("partial_kron_omit") {
  RngStream rng(13);
  CVec x1 = rng.cnormal_vec(4), x2 = rng.cnormal_vec(3), h = rng.cnormal_vec(2);
  CVec s = partial_kron_omit({x1, x2, h}, 1);
  CHECK((s - kron(x2, h)).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK(s.squaredNorm() ==
        doctest::Approx(x2.squaredNorm() * h.squaredNorm()).epsilon(1e-12));
  CHECK_THROWS(partial_kron_omit({x1, x2, h}, 4));

  CVec one(1);
  one << 1.0;
  CVec t = partial_kron_omit({one, one, x1}, 3);
  CHECK(t.size() == 1);
  CHECK(std::abs(t(0) - 1.0) < 1e-15);
}

TEST_CASE("orth_complement_basis") {
  CVec e1(2);
  e1 << 1.0, 0.0;
  auto basis = orth_complement_basis(e1);
  REQUIRE(basis.columns.cols() == 1);
  CHECK(std::abs(std::abs(basis.columns(1, 0)) - 1.0) < 1e-12);
  CHECK(std::abs(basis.columns(0, 0)) < 1e-12);

  RngStream rng(17);
  CVec v = rng.cnormal_vec(6);
  auto b6 = orth_complement_basis(v);
  REQUIRE(b6.columns.cols() == 5);
  CHECK((b6.columns.adjoint() * v).lpNorm<Eigen::Infinity>() < 1e-10 * v.norm());
  CMat g = b6.columns.adjoint() * b6.columns;
  CHECK((g - CMat::Identity(5, 5)).lpNorm<Eigen::Infinity>() < 1e-10);

  CHECK_THROWS(orth_complement_basis(CVec::Zero(3)));
}

TEST_CASE("project_orth") {
  RngStream rng(19);
  CVec target = rng.cnormal_vec(6);
  SUBCASE("empty column set leaves the target unchanged") {
    CMat empty(6, 0);
    CHECK((project_orth(empty, target) - target).lpNorm<Eigen::Infinity>() < 1e-14);
  }
  SUBCASE("target inside the span maps to zero") {
    CMat cols(6, 2);
    cols.col(0) = rng.cnormal_vec(6);
    cols.col(1) = rng.cnormal_vec(6);
    CVec in_span = cols * rng.cnormal_vec(2);
    CHECK(project_orth(cols, in_span).norm() < 1e-10 * in_span.norm());
  }
  SUBCASE("Pythagoras and idempotence") {
    CMat cols(6, 3);
    for (int j = 0; j < 3; ++j) cols.col(j) = rng.cnormal_vec(6);
    CVec p = project_orth(cols, target);
    const double complement = target.squaredNorm() - p.squaredNorm();
    CMat q = orthonormalize(cols);
    CHECK((q.adjoint() * target).squaredNorm() == doctest::Approx(complement).epsilon(1e-10));
    CHECK((project_orth(cols, p) - p).lpNorm<Eigen::Infinity>() < 1e-10);
  }
  SUBCASE("rank-deficient columns are handled") {
    CMat cols(6, 3);
    cols.col(0) = rng.cnormal_vec(6);
    cols.col(1) = 2.0 * cols.col(0);
    cols.col(2) = rng.cnormal_vec(6);
    CVec in_span = cols.col(0) + cols.col(2);
    CHECK(project_orth(cols, in_span).norm() < 1e-9 * in_span.norm());
  }
}
