#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmehr {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixXd = RowMatrix<double>;
using VectorXd = Eigen::VectorXd;
using RowVectorXd = Eigen::RowVectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_str(const Shape& shape);

/// Raised when the operands of an op are not conformable.
class ShapeError : public Error {
 public:
  ShapeError(std::string op, const Shape& lhs, const Shape& rhs)
      : Error(op + ": shape mismatch " + shape_str(lhs) + " vs " + shape_str(rhs)),
        op_(std::move(op)), lhs_(lhs), rhs_(rhs) {}

  const std::string& op() const { return op_; }
  const Shape& lhs() const { return lhs_; }
  const Shape& rhs() const { return rhs_; }

 private:
  std::string op_;
  Shape lhs_;
  Shape rhs_;
};

class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& op) : Error(op + ": non-finite value produced"), op_(op) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline Index numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

/// Dense row-major tensor of arbitrary rank.
///
/// Storage is a row-major matrix whose column count is the last dimension and
/// whose row count is the product of all leading dimensions, so every tensor
/// has a natural 2-D view for Eigen products. Rank-0 and rank-1 tensors are a
/// single row.
template <typename Scalar>
class BasicTensor {
 public:
  using Matrix = RowMatrix<Scalar>;

  BasicTensor() : data_(Matrix::Zero(1, 1)) {}

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    check_dims();
    data_ = Matrix::Zero(lead(shape_), last(shape_));
  }

  BasicTensor(Shape shape, Matrix data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims();
    if (data_.rows() != lead(shape_) || data_.cols() != last(shape_))
      throw ShapeError("tensor", shape_, {data_.rows(), data_.cols()});
  }

  BasicTensor(Shape shape, const std::vector<Scalar>& values) : BasicTensor(std::move(shape)) {
    if (static_cast<Index>(values.size()) != size())
      throw ShapeError("tensor", shape_, {static_cast<Index>(values.size())});
    std::copy(values.begin(), values.end(), data_.data());
  }

  static BasicTensor scalar(Scalar v) {
    BasicTensor t;
    t.data_(0, 0) = v;
    return t;
  }

  template <typename Derived>
  static BasicTensor from_matrix(const Eigen::MatrixBase<Derived>& m) {
    return BasicTensor({m.rows(), m.cols()}, Matrix(m));
  }

  template <typename Derived>
  static BasicTensor from_vector(const Eigen::MatrixBase<Derived>& v) {
    Matrix row(1, v.size());
    for (Index i = 0; i < v.size(); ++i) row(0, i) = v(i);
    return BasicTensor({v.size()}, std::move(row));
  }

  static BasicTensor zeros_like(const BasicTensor& other) { return BasicTensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }
  Index rows() const { return data_.rows(); }
  Index cols() const { return data_.cols(); }

  Matrix& matrix() { return data_; }
  const Matrix& matrix() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar operator[](Index i) const { return data_.data()[i]; }
  Scalar& operator[](Index i) { return data_.data()[i]; }

  Scalar item() const {
    if (size() != 1) throw ShapeError("item", shape_, {});
    return data_(0, 0);
  }

  bool all_finite() const { return data_.allFinite(); }

  BasicTensor reshaped(Shape shape) const {
    if (numel(shape) != size()) throw ShapeError("reshape", shape_, shape);
    Matrix m = Eigen::Map<const Matrix>(data_.data(), lead(shape), last(shape));
    return BasicTensor(std::move(shape), std::move(m));
  }

  template <typename Other>
  BasicTensor<Other> cast() const {
    return BasicTensor<Other>(shape_, data_.template cast<Other>().eval());
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static Index lead(const Shape& s) {
    if (s.empty()) return 1;
    return std::accumulate(s.begin(), s.end() - 1, Index{1}, std::multiplies<>());
  }
  static Index last(const Shape& s) { return s.empty() ? 1 : s.back(); }

  void check_dims() const {
    for (Index d : shape_)
      if (d < 0) throw ShapeError("tensor", shape_, {});
  }

  Shape shape_;
  Matrix data_;
};

using Tensor = BasicTensor<double>;

}  // namespace mmehr
