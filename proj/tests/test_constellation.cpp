#include <doctest.h>

#include <cmath>
#include <complex>
#include <set>

#include "tbm/constellation.hpp"
#include "tbm/rng.hpp"

using namespace tbm;

TEST_CASE("sphere codebook construction") {
  Codebook cb = build_sphere_codebook(6, 5, 42);
  CHECK(cb.dim() == 6);
  CHECK(cb.bits_per_symbol() == 5);
  CHECK(cb.num_symbols() == 32);
  for (Eigen::Index s = 0; s < cb.num_symbols(); ++s)
    CHECK(cb.symbol(s).squaredNorm() == doctest::Approx(6.0).epsilon(1e-10));

  Codebook again = build_sphere_codebook(6, 5, 42);
  for (Eigen::Index s = 0; s < cb.num_symbols(); ++s)
    CHECK((cb.symbol(s) - again.symbol(s)).norm() == 0.0);

  Codebook other = build_sphere_codebook(6, 5, 43);
  CHECK((cb.symbol(0) - other.symbol(0)).norm() > 1e-6);
}

TEST_CASE("sphere codebook cross-correlation statistics") {
  // For isotropic unit vectors u, v in C^T, E|u^H v|^2 = 1/T.
  const Eigen::Index T = 8;
  Codebook cb = build_sphere_codebook(T, 10, 7);
  double acc = 0.0;
  int n = 0;
  for (Eigen::Index a = 0; a < 256; ++a) {
    for (Eigen::Index b = a + 1; b < 256; ++b) {
      const double c = std::abs(cb.symbol(a).dot(cb.symbol(b)));
      acc += c * c / (static_cast<double>(T) * T);
      ++n;
    }
  }
  const double mean = acc / n;
  // var of |u^H v|^2/T^2 is ~1/T^2; 3 sigma over ~32k pairs (correlated, be loose)
  CHECK(mean == doctest::Approx(1.0 / static_cast<double>(T)).epsilon(0.1));
}

TEST_CASE("pilot qam codebook") {
  Codebook cb = build_pilot_qam_codebook(2, 4, 0);
  CHECK(cb.num_symbols() == 4);
  CHECK(cb.bits_per_symbol() == 2);
  for (Eigen::Index s = 1; s < 4; ++s)
    CHECK(std::abs(cb.symbol(s)(0) - cb.symbol(0)(0)) < 1e-12);
  for (Eigen::Index s = 0; s < 4; ++s)
    CHECK(cb.symbol(s).squaredNorm() == doctest::Approx(2.0).epsilon(1e-10));

  Codebook cb16 = build_pilot_qam_codebook(4, 16, 0);
  CHECK(cb16.bits_per_symbol() == 3 * 4);

  double min_chordal = 1e300;
  for (Eigen::Index a = 0; a < cb.num_symbols(); ++a)
    for (Eigen::Index b = a + 1; b < cb.num_symbols(); ++b) {
      const double ip = std::abs(cb.symbol(a).dot(cb.symbol(b))) / 2.0;
      min_chordal = std::min(min_chordal, 1.0 - ip * ip);
    }
  CHECK(min_chordal > 0.0);

  CHECK_THROWS(build_pilot_qam_codebook(4, 8, 0));
}

TEST_CASE("bit labeling round trip") {
  Codebook cb = build_sphere_codebook(5, 4, 99);
  std::vector<int> zero(4, 0);
  CHECK((map_bits(cb, zero) - cb.symbol(0)).norm() == 0.0);

  std::set<Eigen::Index> seen;
  for (Eigen::Index s = 0; s < cb.num_symbols(); ++s) {
    auto bits = symbol_index_to_bits(cb, s);
    CHECK(bits_to_symbol_index(cb, bits) == s);
    seen.insert(bits_to_symbol_index(cb, bits));
    auto hd = demap_hard(cb, cb.symbol(s));
    CHECK(hd.symbol_index == s);
    CHECK(hd.bits == bits);
  }
  CHECK(seen.size() == static_cast<std::size_t>(cb.num_symbols()));
  CHECK_THROWS(map_bits(cb, std::vector<int>(3, 0)));
}

TEST_CASE("bit classes partition the codebook") {
  Codebook cb = build_sphere_codebook(4, 4, 5);
  for (int j = 0; j < cb.bits_per_symbol(); ++j) {
    int ones = 0;
    for (Eigen::Index s = 0; s < cb.num_symbols(); ++s)
      ones += symbol_index_to_bits(cb, s)[static_cast<std::size_t>(j)];
    CHECK(ones == cb.num_symbols() / 2);
  }
}

TEST_CASE("demap_hard phase invariance and robustness") {
  RngStream rng(123);
  Codebook cb = build_sphere_codebook(6, 6, 21);
  const Eigen::Index s = 17;
  auto ref = demap_hard(cb, cb.symbol(s));
  CHECK(ref.score == doctest::Approx(6.0).epsilon(1e-10));
  for (int trial = 0; trial < 100; ++trial) {
    const double phi = 2.0 * M_PI * rng.uniform();
    CVec z = std::exp(std::complex<double>(0.0, phi)) * cb.symbol(s);
    CHECK(demap_hard(cb, z).bits == ref.bits);
  }
  CVec noisy = cb.symbol(s) + 1e-3 * rng.cnormal_vec(6);
  CHECK(demap_hard(cb, noisy).bits == ref.bits);
}

TEST_CASE("codebook descriptor round trip") {
  Codebook cb = build_sphere_codebook(6, 5, 42);
  Codebook back = Codebook::from_descriptor(cb.descriptor());
  CHECK(back.num_symbols() == cb.num_symbols());
  for (Eigen::Index s = 0; s < cb.num_symbols(); ++s)
    CHECK((cb.symbol(s) - back.symbol(s)).norm() == 0.0);

  Codebook pq = build_pilot_qam_codebook(3, 4, 9);
  Codebook pq_back = Codebook::from_descriptor(pq.descriptor());
  CHECK((pq.symbol(2) - pq_back.symbol(2)).norm() == 0.0);
}
