#include "tbm/constellation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "tbm/rng.hpp"

namespace tbm {

namespace {

int gray_encode(int v) { return v ^ (v >> 1); }

// Gray-labeled square QAM constellation points with unit average energy.
// For order 4 this is QPSK {(+-1 +-i)/sqrt(2)}, for 16 the {+-1,+-3}/sqrt(10)
// grid. Index bits split evenly between I and Q, each Gray-coded.
std::vector<std::complex<double>> qam_points(int order) {
  if (order != 4 && order != 16) throw std::invalid_argument("unsupported qam_order");
  const int side = order == 4 ? 2 : 4;
  const int bits_per_axis = order == 4 ? 1 : 2;
  // PAM levels in Gray order: level index g maps to amplitude 2*g - (side-1).
  std::vector<double> level(side);
  for (int g = 0; g < side; ++g) level[static_cast<std::size_t>(g)] = 2.0 * g - (side - 1);
  double energy = 0.0;
  for (int a = 0; a < side; ++a)
    for (int b = 0; b < side; ++b)
      energy += level[a] * level[a] + level[b] * level[b];
  const double scale = 1.0 / std::sqrt(energy / order);
  std::vector<std::complex<double>> pts(static_cast<std::size_t>(order));
  for (int idx = 0; idx < order; ++idx) {
    const int bi = idx >> bits_per_axis;           // I bits (most significant)
    const int bq = idx & ((1 << bits_per_axis) - 1);
    // invert Gray code: position of gray_encode(g) == bits
    int gi = 0, gq = 0;
    for (int g = 0; g < side; ++g) {
      if (gray_encode(g) == bi) gi = g;
      if (gray_encode(g) == bq) gq = g;
    }
    pts[static_cast<std::size_t>(idx)] = {level[static_cast<std::size_t>(gi)] * scale,
                                          level[static_cast<std::size_t>(gq)] * scale};
  }
  return pts;
}

void check_distinct(const std::vector<CVec>& symbols) {
  // Sort by the real part of the first coordinate; duplicates must land in
  // the same neighborhood, so only a local window needs full comparisons.
  std::vector<std::size_t> order(symbols.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return symbols[a](0).real() < symbols[b](0).real();
  });
  for (std::size_t a = 0; a + 1 < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      if (symbols[order[b]](0).real() - symbols[order[a]](0).real() >= 1e-12) break;
      if ((symbols[order[a]] - symbols[order[b]]).norm() < 1e-12)
        throw std::runtime_error("codebook: duplicate symbols");
    }
  }
}

}  // namespace

Codebook build_sphere_codebook(Eigen::Index T_i, int n_bits, std::uint64_t seed) {
  if (T_i <= 1) throw std::invalid_argument("build_sphere_codebook: T_i must be > 1");
  if (n_bits < 1) throw std::invalid_argument("build_sphere_codebook: need at least 1 bit");
  if (n_bits > 16) throw std::invalid_argument("build_sphere_codebook: codebook too large to enumerate");
  Codebook cb;
  cb.dim_ = T_i;
  cb.bits_per_symbol_ = n_bits;
  cb.kind_ = CodebookKind::sphere;
  cb.seed_ = seed;
  const Eigen::Index count = Eigen::Index(1) << n_bits;
  RngStream rng = RngStream::derive(seed, 0x5bce, static_cast<std::uint64_t>(T_i),
                                    static_cast<std::uint64_t>(n_bits));
  cb.symbols_.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index s = 0; s < count; ++s)
    cb.symbols_.push_back(rng.sphere_vec(T_i, std::sqrt(static_cast<double>(T_i))));
  check_distinct(cb.symbols_);
  return cb;
}

Codebook build_pilot_qam_codebook(Eigen::Index T_i, int qam_order, std::uint64_t seed) {
  if (T_i < 2) throw std::invalid_argument("build_pilot_qam_codebook: T_i must be >= 2");
  const auto pts = qam_points(qam_order);
  const int bits_per_coord = qam_order == 4 ? 2 : 4;
  const int n_bits = static_cast<int>(T_i - 1) * bits_per_coord;
  if (n_bits > 16)
    throw std::invalid_argument("build_pilot_qam_codebook: codebook too large to enumerate");
  Codebook cb;
  cb.dim_ = T_i;
  cb.bits_per_symbol_ = n_bits;
  cb.kind_ = CodebookKind::pilot_qam;
  cb.seed_ = seed;
  cb.qam_order_ = qam_order;
  const Eigen::Index count = Eigen::Index(1) << n_bits;
  cb.symbols_.reserve(static_cast<std::size_t>(count));
  // Pilot amplitude = per-coordinate RMS of the QAM part (unit here).
  const double pilot = 1.0;
  for (Eigen::Index s = 0; s < count; ++s) {
    CVec v(T_i);
    v(0) = pilot;
    Eigen::Index idx = s;
    // first bits map to the first data coordinate
    for (Eigen::Index c = T_i - 1; c >= 1; --c) {
      v(c) = pts[static_cast<std::size_t>(idx % qam_order)];
      idx /= qam_order;
    }
    v *= std::sqrt(static_cast<double>(T_i)) / v.norm();
    cb.symbols_.push_back(std::move(v));
  }
  check_distinct(cb.symbols_);
  return cb;
}

std::vector<int> symbol_index_to_bits(const Codebook& cb, Eigen::Index idx) {
  std::vector<int> bits(static_cast<std::size_t>(cb.bits_per_symbol()));
  for (int j = 0; j < cb.bits_per_symbol(); ++j)
    bits[static_cast<std::size_t>(j)] =
        static_cast<int>((idx >> (cb.bits_per_symbol() - 1 - j)) & 1);
  return bits;
}

Eigen::Index bits_to_symbol_index(const Codebook& cb, const std::vector<int>& bits) {
  if (static_cast<int>(bits.size()) != cb.bits_per_symbol())
    throw std::invalid_argument("bit-string length mismatch");
  Eigen::Index idx = 0;
  for (int b : bits) idx = (idx << 1) | (b & 1);
  return idx;
}

const CVec& map_bits(const Codebook& cb, const std::vector<int>& bits) {
  return cb.symbol(bits_to_symbol_index(cb, bits));
}

HardDecision demap_hard(const Codebook& cb, const CVec& z) {
  if (z.size() != cb.dim()) throw std::invalid_argument("demap_hard: dimension mismatch");
  Eigen::Index best = 0;
  double best_score = -1.0;
  for (Eigen::Index s = 0; s < cb.num_symbols(); ++s) {
    const double score = std::abs(z.dot(cb.symbol(s)));
    if (score > best_score) {
      best_score = score;
      best = s;
    }
  }
  return HardDecision{symbol_index_to_bits(cb, best), best_score, best};
}

std::string Codebook::descriptor() const {
  std::ostringstream os;
  if (kind_ == CodebookKind::sphere)
    os << "sphere " << dim_ << ' ' << bits_per_symbol_ << ' ' << seed_;
  else
    os << "pilot_qam " << dim_ << ' ' << qam_order_ << ' ' << seed_;
  return os.str();
}

Codebook Codebook::from_descriptor(const std::string& line) {
  std::istringstream is(line);
  std::string kind;
  is >> kind;
  if (kind == "sphere") {
    Eigen::Index dim;
    int n_bits;
    std::uint64_t seed;
    if (!(is >> dim >> n_bits >> seed)) throw std::invalid_argument("bad codebook descriptor");
    return build_sphere_codebook(dim, n_bits, seed);
  }
  if (kind == "pilot_qam") {
    Eigen::Index dim;
    int order;
    std::uint64_t seed;
    if (!(is >> dim >> order >> seed)) throw std::invalid_argument("bad codebook descriptor");
    return build_pilot_qam_codebook(dim, order, seed);
  }
  throw std::invalid_argument("unknown codebook kind: " + kind);
}

}  // namespace tbm
