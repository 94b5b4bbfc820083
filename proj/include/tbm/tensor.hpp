#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace tbm {

using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// Dense complex tensor with a fixed linearization: the LAST mode varies
/// fastest. For a shape (T_1,...,T_p) the linear index of (i_1,...,i_p) is
/// ((i_1*T_2 + i_2)*T_3 + ...)*T_p + i_p, which is exactly the ordering of
/// x_1 (x) x_2 (x) ... (x) x_p under kron() below.
class CTensor {
 public:
  CTensor() = default;
  CTensor(std::vector<Eigen::Index> shape, CVec data);
  explicit CTensor(std::vector<Eigen::Index> shape);

  const std::vector<Eigen::Index>& shape() const { return shape_; }
  Eigen::Index order() const { return static_cast<Eigen::Index>(shape_.size()); }
  Eigen::Index size() const { return data_.size(); }

  const CVec& data() const { return data_; }
  CVec& data() { return data_; }

  std::complex<double> at(const std::vector<Eigen::Index>& idx) const;
  Eigen::Index linear_index(const std::vector<Eigen::Index>& idx) const;

 private:
  std::vector<Eigen::Index> shape_;
  CVec data_;
};

/// Orthonormal columns spanning a subspace (columns mutually orthonormal to
/// 1e-10, count <= ambient dimension).
struct ProjectorBasis {
  CMat columns;
};

/// Kronecker product, first factor slowest.
CVec kron(const CVec& a, const CVec& b);

/// Rank-1 tensor from d+1 factor vectors (iterated kron).
CTensor rank1(const std::vector<CVec>& factors);

/// Mode-m unfolding (m is 1-based). Rows index mode m; among the remaining
/// modes the LOWEST-numbered one varies fastest along columns, so
/// unfold(rank1({a,b,c}), 1) == a * kron(c,b)^T.
CMat unfold(const CTensor& t, int mode);

/// Inverse of unfold for the same mode.
CTensor fold(const CMat& m, int mode, const std::vector<Eigen::Index>& shape);

/// Kronecker product of all factors except the one at `omit` (1-based),
/// keeping the original order of the remaining factors.
CVec partial_kron_omit(const std::vector<CVec>& factors, int omit);

/// Orthonormal basis of the orthogonal complement of span{v}: dim(v)-1
/// columns, each orthogonal to v. Deterministic (Householder).
ProjectorBasis orth_complement_basis(const CVec& v);

/// (I - QQ^H) * target where Q orthonormalizes `columns` by column-pivoted
/// QR with drop tolerance 1e-10 * (largest column norm).
CVec project_orth(const CMat& columns, const CVec& target);

/// Orthonormalization used by project_orth, exposed for the bound code.
CMat orthonormalize(const CMat& columns);

}  // namespace tbm
