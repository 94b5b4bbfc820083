#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tbm/tensor.hpp"

namespace tbm {

enum class CodebookKind { sphere, pilot_qam };

/// Vector sub-constellation C_i with its bit labeling. Bit-string b maps to
/// the symbol with index value(b) (bit 0 is the most significant), so the
/// all-zero string maps to symbol 0. |C_i| is always a power of two and
/// every symbol satisfies ||s||^2 = T_i.
class Codebook {
 public:
  Eigen::Index dim() const { return dim_; }
  int bits_per_symbol() const { return bits_per_symbol_; }
  Eigen::Index num_symbols() const { return static_cast<Eigen::Index>(symbols_.size()); }
  CodebookKind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  int qam_order() const { return qam_order_; }

  const CVec& symbol(Eigen::Index idx) const { return symbols_[static_cast<std::size_t>(idx)]; }
  const std::vector<CVec>& symbols() const { return symbols_; }

  /// Descriptor line "kind dim n_bits seed [qam_order]"; symbols are
  /// regenerated from it, not stored.
  std::string descriptor() const;
  static Codebook from_descriptor(const std::string& line);

  friend Codebook build_sphere_codebook(Eigen::Index T_i, int n_bits, std::uint64_t seed);
  friend Codebook build_pilot_qam_codebook(Eigen::Index T_i, int qam_order, std::uint64_t seed);

 private:
  Eigen::Index dim_ = 0;
  int bits_per_symbol_ = 0;
  CodebookKind kind_ = CodebookKind::sphere;
  std::uint64_t seed_ = 0;
  int qam_order_ = 0;  // 0 for sphere codebooks
  std::vector<CVec> symbols_;
};

/// 2^n_bits i.i.d. uniform-on-sphere vectors with ||s||^2 = T_i,
/// deterministic given the seed.
Codebook build_sphere_codebook(Eigen::Index T_i, int n_bits, std::uint64_t seed);

/// First coordinate is a fixed pilot, the remaining T_i-1 carry independent
/// Gray-mapped QAM symbols; each symbol rescaled to ||s||^2 = T_i.
Codebook build_pilot_qam_codebook(Eigen::Index T_i, int qam_order, std::uint64_t seed);

/// Bits (size bits_per_symbol, bit 0 most significant) -> symbol.
const CVec& map_bits(const Codebook& cb, const std::vector<int>& bits);

std::vector<int> symbol_index_to_bits(const Codebook& cb, Eigen::Index idx);
Eigen::Index bits_to_symbol_index(const Codebook& cb, const std::vector<int>& bits);

struct HardDecision {
  std::vector<int> bits;
  double score;  // achieved |z^H x|
  Eigen::Index symbol_index;
};

/// Noncoherent correlation demapper: argmax over the codebook of |z^H x|,
/// ties broken by lowest symbol index.
HardDecision demap_hard(const Codebook& cb, const CVec& z);

}  // namespace tbm
