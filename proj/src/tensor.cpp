#include "tbm/tensor.hpp"

#include <numeric>
#include <stdexcept>

namespace tbm {

CTensor::CTensor(std::vector<Eigen::Index> shape, CVec data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  Eigen::Index n = 1;
  for (Eigen::Index s : shape_) {
    if (s <= 0) throw std::invalid_argument("CTensor: nonpositive dimension");
    n *= s;
  }
  if (n != data_.size()) throw std::invalid_argument("CTensor: shape/data size mismatch");
}

CTensor::CTensor(std::vector<Eigen::Index> shape) : shape_(std::move(shape)) {
  Eigen::Index n = 1;
  for (Eigen::Index s : shape_) {
    if (s <= 0) throw std::invalid_argument("CTensor: nonpositive dimension");
    n *= s;
  }
  data_ = CVec::Zero(n);
}

Eigen::Index CTensor::linear_index(const std::vector<Eigen::Index>& idx) const {
  if (idx.size() != shape_.size()) throw std::invalid_argument("CTensor: index arity mismatch");
  Eigen::Index lin = 0;
  for (std::size_t m = 0; m < shape_.size(); ++m) {
    if (idx[m] < 0 || idx[m] >= shape_[m]) throw std::out_of_range("CTensor: index out of range");
    lin = lin * shape_[m] + idx[m];
  }
  return lin;
}

std::complex<double> CTensor::at(const std::vector<Eigen::Index>& idx) const {
  return data_(linear_index(idx));
}

CVec kron(const CVec& a, const CVec& b) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("kron: empty input");
  CVec out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

CTensor rank1(const std::vector<CVec>& factors) {
  if (factors.empty()) throw std::invalid_argument("rank1: no factors");
  CVec v = factors[0];
  for (std::size_t i = 1; i < factors.size(); ++i) v = kron(v, factors[i]);
  std::vector<Eigen::Index> shape;
  shape.reserve(factors.size());
  for (const auto& f : factors) shape.push_back(f.size());
  return CTensor(std::move(shape), std::move(v));
}

CMat unfold(const CTensor& t, int mode) {
  const auto& shape = t.shape();
  const int p = static_cast<int>(shape.size());
  if (mode < 1 || mode > p) throw std::invalid_argument("unfold: mode out of range");
  const int m = mode - 1;
  const Eigen::Index rows = shape[m];
  const Eigen::Index cols = t.size() / rows;
  // Column strides: among modes j != m, lower j varies fastest.
  std::vector<Eigen::Index> stride(p, 0);
  Eigen::Index s = 1;
  for (int j = 0; j < p; ++j) {
    if (j == m) continue;
    stride[j] = s;
    s *= shape[j];
  }
  CMat out(rows, cols);
  std::vector<Eigen::Index> idx(p, 0);
  for (Eigen::Index lin = 0; lin < t.size(); ++lin) {
    // decode linear index (last mode fastest)
    Eigen::Index rem = lin;
    for (int j = p - 1; j >= 0; --j) {
      idx[j] = rem % shape[j];
      rem /= shape[j];
    }
    Eigen::Index col = 0;
    for (int j = 0; j < p; ++j)
      if (j != m) col += idx[j] * stride[j];
    out(idx[m], col) = t.data()(lin);
  }
  return out;
}

CTensor fold(const CMat& mat, int mode, const std::vector<Eigen::Index>& shape) {
  const int p = static_cast<int>(shape.size());
  if (mode < 1 || mode > p) throw std::invalid_argument("fold: mode out of range");
  const int m = mode - 1;
  CTensor t(shape);
  std::vector<Eigen::Index> stride(p, 0);
  Eigen::Index s = 1;
  for (int j = 0; j < p; ++j) {
    if (j == m) continue;
    stride[j] = s;
    s *= shape[j];
  }
  std::vector<Eigen::Index> idx(p, 0);
  for (Eigen::Index lin = 0; lin < t.size(); ++lin) {
    Eigen::Index rem = lin;
    for (int j = p - 1; j >= 0; --j) {
      idx[j] = rem % shape[j];
      rem /= shape[j];
    }
    Eigen::Index col = 0;
    for (int j = 0; j < p; ++j)
      if (j != m) col += idx[j] * stride[j];
    t.data()(lin) = mat(idx[m], col);
  }
  return t;
}

CVec partial_kron_omit(const std::vector<CVec>& factors, int omit) {
  const int p = static_cast<int>(factors.size());
  if (omit < 1 || omit > p) throw std::invalid_argument("partial_kron_omit: index out of range");
  CVec v;
  bool first = true;
  for (int j = 0; j < p; ++j) {
    if (j == omit - 1) continue;
    if (first) {
      v = factors[j];
      first = false;
    } else {
      v = kron(v, factors[j]);
    }
  }
  if (first) throw std::invalid_argument("partial_kron_omit: needs at least two factors");
  return v;
}

ProjectorBasis orth_complement_basis(const CVec& v) {
  const Eigen::Index n = v.size();
  if (n == 0 || v.norm() == 0.0) throw std::invalid_argument("orth_complement_basis: zero vector");
  Eigen::HouseholderQR<CMat> qr(v);
  CMat q = qr.householderQ() * CMat::Identity(n, n);
  // Column 0 spans v (up to phase); the rest span its complement.
  return ProjectorBasis{q.rightCols(n - 1)};
}

CMat orthonormalize(const CMat& columns) {
  if (columns.cols() == 0) return CMat(columns.rows(), 0);
  double maxnorm = 0.0;
  for (Eigen::Index j = 0; j < columns.cols(); ++j)
    maxnorm = std::max(maxnorm, columns.col(j).norm());
  if (maxnorm == 0.0) return CMat(columns.rows(), 0);
  Eigen::ColPivHouseholderQR<CMat> qr(columns);
  const double tol = 1e-10 * maxnorm;
  qr.setThreshold(tol);
  const Eigen::Index r = qr.rank();
  CMat q = qr.householderQ() * CMat::Identity(columns.rows(), r);
  return q;
}

CVec project_orth(const CMat& columns, const CVec& target) {
  if (columns.cols() >= target.size() && columns.cols() > 0)
    throw std::invalid_argument("project_orth: column count must be < ambient dim");
  if (columns.cols() == 0) return target;
  CMat q = orthonormalize(columns);
  return target - q * (q.adjoint() * target);
}

}  // namespace tbm
