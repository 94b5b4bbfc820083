#include "tbm/polar.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tbm {

namespace {

// Gaussian-approximation phi function (Chung et al. parametrization),
// monotone decreasing from 1 at x=0.
double ga_phi(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 10.0) return std::exp(0.0218 - 0.4527 * std::pow(x, 0.859));
  return std::sqrt(M_PI / x) * std::exp(-0.25 * x) * (1.0 - 10.0 / (7.0 * x));
}

double ga_phi_inv(double y) {
  if (y >= 1.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (ga_phi(hi) > y) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ga_phi(mid) > y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void encode_in_place(std::vector<int>& u) {
  const int n = static_cast<int>(u.size());
  for (int half = n / 2; half >= 1; half /= 2)
    for (int blk = 0; blk < n; blk += 2 * half)
      for (int i = 0; i < half; ++i) u[blk + i] ^= u[blk + half + i];
}

struct ScDecoder {
  const PolarCode& code;
  std::vector<int> u;  // decided u-domain bits

  // Decodes the sub-block of length len whose u-bits start at u_off, from
  // channel LLRs llr (internal convention: positive => bit 0). Returns the
  // re-encoded codeword bits of the sub-block.
  std::vector<int> run(const std::vector<double>& llr, int u_off, int len) {
    if (len == 1) {
      int bit = 0;
      if (code.is_info[static_cast<std::size_t>(u_off)]) bit = llr[0] < 0.0 ? 1 : 0;
      u[static_cast<std::size_t>(u_off)] = bit;
      return {bit};
    }
    const int half = len / 2;
    std::vector<double> l1(static_cast<std::size_t>(half));
    for (int i = 0; i < half; ++i) {
      const double a = llr[static_cast<std::size_t>(i)];
      const double b = llr[static_cast<std::size_t>(i + half)];
      const double s = (a < 0.0) == (b < 0.0) ? 1.0 : -1.0;
      l1[static_cast<std::size_t>(i)] = s * std::min(std::abs(a), std::abs(b));
    }
    std::vector<int> xa = run(l1, u_off, half);
    std::vector<double> l2(static_cast<std::size_t>(half));
    for (int i = 0; i < half; ++i)
      l2[static_cast<std::size_t>(i)] =
          (1.0 - 2.0 * xa[static_cast<std::size_t>(i)]) * llr[static_cast<std::size_t>(i)] +
          llr[static_cast<std::size_t>(i + half)];
    std::vector<int> xb = run(l2, u_off + half, half);
    std::vector<int> out(static_cast<std::size_t>(len));
    for (int i = 0; i < half; ++i) {
      out[static_cast<std::size_t>(i)] = xa[static_cast<std::size_t>(i)] ^ xb[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(i + half)] = xb[static_cast<std::size_t>(i)];
    }
    return out;
  }
};

}  // namespace

std::string PolarCode::descriptor() const {
  std::uint64_t h = 1469598103934665603ull;
  for (int pos : info_set) {
    h ^= static_cast<std::uint64_t>(pos);
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << n << ' ' << B << ' ' << design_snr_db << ' ' << h;
  return os.str();
}

PolarCode polar_construct(int n, int B, double design_snr_db) {
  if (!is_pow2(n)) throw std::invalid_argument("polar_construct: n must be a power of two");
  if (B < 1 || B > n) throw std::invalid_argument("polar_construct: need 1 <= B <= n");
  // Density evolution under the Gaussian approximation. The all-zero BPSK
  // channel LLR is N(2/sigma2, 4/sigma2).
  const double sigma2 = std::pow(10.0, -design_snr_db / 10.0);
  std::vector<double> mean{2.0 / sigma2};
  int len = 1;
  while (len < n) {
    std::vector<double> next(static_cast<std::size_t>(2 * len));
    for (int i = 0; i < len; ++i) {
      const double m = mean[static_cast<std::size_t>(i)];
      const double q = ga_phi(m);
      next[static_cast<std::size_t>(2 * i)] = ga_phi_inv(q * (2.0 - q));
      next[static_cast<std::size_t>(2 * i + 1)] = 2.0 * m;
    }
    mean = std::move(next);
    len *= 2;
  }
  // next[2i] belongs to the bit decoded first in each pair; with the natural
  // u ordering used by the decoder that is u-index with the extra low bit 0,
  // and the doubling above already walks indices in natural order.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return mean[static_cast<std::size_t>(a)] > mean[static_cast<std::size_t>(b)]; });
  PolarCode code;
  code.n = n;
  code.B = B;
  code.design_snr_db = design_snr_db;
  code.info_set.assign(order.begin(), order.begin() + B);
  std::sort(code.info_set.begin(), code.info_set.end());
  code.is_info.assign(static_cast<std::size_t>(n), 0);
  for (int pos : code.info_set) code.is_info[static_cast<std::size_t>(pos)] = 1;
  return code;
}

std::vector<int> polar_encode(const PolarCode& code, const std::vector<int>& payload) {
  if (static_cast<int>(payload.size()) != code.B)
    throw std::invalid_argument("polar_encode: payload length mismatch");
  std::vector<int> u(static_cast<std::size_t>(code.n), 0);
  for (int j = 0; j < code.B; ++j)
    u[static_cast<std::size_t>(code.info_set[static_cast<std::size_t>(j)])] =
        payload[static_cast<std::size_t>(j)] & 1;
  encode_in_place(u);
  return u;
}

std::vector<int> polar_decode_sc(const PolarCode& code, const std::vector<double>& llrs) {
  if (static_cast<int>(llrs.size()) != code.n)
    throw std::invalid_argument("polar_decode_sc: llr length mismatch");
  // External convention: positive => bit 1. Internally positive => bit 0.
  std::vector<double> internal(llrs.size());
  for (std::size_t i = 0; i < llrs.size(); ++i) internal[i] = -llrs[i];
  ScDecoder dec{code, std::vector<int>(static_cast<std::size_t>(code.n), 0)};
  dec.run(internal, 0, code.n);
  std::vector<int> payload(static_cast<std::size_t>(code.B));
  for (int j = 0; j < code.B; ++j)
    payload[static_cast<std::size_t>(j)] =
        dec.u[static_cast<std::size_t>(code.info_set[static_cast<std::size_t>(j)])];
  return payload;
}

std::vector<int> decode_hard(const PolarCode& code, const std::vector<int>& bits) {
  if (static_cast<int>(bits.size()) != code.n)
    throw std::invalid_argument("decode_hard: length mismatch");
  std::vector<double> llrs(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) llrs[i] = bits[i] ? 1.0 : -1.0;
  return polar_decode_sc(code, llrs);
}

}  // namespace tbm
