#pragma once

#include <string>
#include <vector>

namespace tbm {

/// Polar code with a Gaussian-approximation construction. Frozen bits are 0.
struct PolarCode {
  int n = 0;  // block length, power of two
  int B = 0;  // payload bits
  double design_snr_db = 0.0;
  std::vector<int> info_set;       // sorted ascending, |info_set| = B
  std::vector<char> is_info;       // size n

  double rate() const { return static_cast<double>(B) / n; }
  /// "n B design_snr_db <fnv1a hash of the info set>"
  std::string descriptor() const;
};

PolarCode polar_construct(int n, int B, double design_snr_db);

/// Natural-order polar transform: for n=2, (u1,u2) -> (u1^u2, u2).
std::vector<int> polar_encode(const PolarCode& code, const std::vector<int>& payload);

/// Successive cancellation with the min-sum check-node rule. Input LLRs use
/// the convention positive => bit 1 (see LlrFrame); ties decide 0.
std::vector<int> polar_decode_sc(const PolarCode& code, const std::vector<double>& llrs);

/// Hard-decision path: the same SC decoder fed with saturated +/-1 LLRs.
std::vector<int> decode_hard(const PolarCode& code, const std::vector<int>& bits);

}  // namespace tbm
