#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "mrphe/errors.hpp"

namespace mrphe {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Image-major (or class-major) stack of embeddings, one per row.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kUnitTolerance = 1e-6;
inline constexpr double kNormEpsilon = 1e-12;

// L2 norm accumulated in double regardless of storage scalar.
template <typename Derived>
double l2_norm(const Eigen::MatrixBase<Derived>& v) {
  return v.template cast<double>().norm();
}

template <typename Derived>
bool is_unit(const Eigen::MatrixBase<Derived>& v, double tol = kUnitTolerance) {
  return std::abs(l2_norm(v) - 1.0) <= tol;
}

// v / ||v||; throws NumericError naming `key` when ||v|| <= kNormEpsilon.
template <typename Derived>
Vector<typename Derived::Scalar> normalized_copy(const Eigen::MatrixBase<Derived>& v, std::string_view key = {}) {
  using Scalar = typename Derived::Scalar;
  const double n = l2_norm(v);
  if (!(n > kNormEpsilon))
    throw NumericError("near-zero norm (" + std::to_string(n) + ") for '" + std::string(key) + "'");
  return (v.template cast<double>() / n).template cast<Scalar>();
}

// A D-dimensional embedding that knows whether it has been normalized.
template <typename Scalar>
class Embedding {
 public:
  Embedding() = default;

  static Embedding raw(Vector<Scalar> values) { return Embedding(std::move(values), false); }

  // Wraps a vector that must already be unit norm; throws ContractError otherwise.
  static Embedding unit(Vector<Scalar> values, std::string_view key = {}) {
    if (!is_unit(values))
      throw ContractError("embedding '" + std::string(key) + "' flagged normalized but has norm " +
                          std::to_string(l2_norm(values)));
    return Embedding(std::move(values), true);
  }

  const Vector<Scalar>& values() const { return values_; }
  bool normalized() const { return normalized_; }
  Eigen::Index dim() const { return values_.size(); }

 private:
  Embedding(Vector<Scalar> v, bool n) : values_(std::move(v)), normalized_(n) {}
  Vector<Scalar> values_;
  bool normalized_ = false;
};

template <typename Scalar>
Embedding<Scalar> normalize(const Embedding<Scalar>& e, std::string_view key = {}) {
  if (e.normalized()) return e;
  return Embedding<Scalar>::unit(normalized_copy(e.values(), key), key);
}

// Rows guaranteed unit norm. Every similarity operation takes its operands through this type.
template <typename Scalar>
class UnitRows {
 public:
  UnitRows() = default;

  // Accepts rows already normalized; throws ContractError on the first row off the unit sphere.
  static UnitRows checked(RowMatrix<Scalar> m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (!is_unit(m.row(i)))
        throw ContractError("row " + std::to_string(i) + " is not unit norm (" + std::to_string(l2_norm(m.row(i))) +
                            ")");
    return UnitRows(std::move(m));
  }

  // Normalizes each row; `keys` (optional, one per row) name the offender in errors.
  static UnitRows normalize(RowMatrix<Scalar> m, std::span<const std::string> keys = {}) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const std::string_view key = keys.empty() ? std::string_view{} : std::string_view(keys[i]);
      m.row(i) = normalized_copy(m.row(i).transpose(), key).transpose();
    }
    return UnitRows(std::move(m));
  }

  static UnitRows from(std::span<const Embedding<Scalar>> rows) {
    if (rows.empty()) return {};
    RowMatrix<Scalar> m(static_cast<Eigen::Index>(rows.size()), rows.front().dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].normalized()) throw ContractError("row " + std::to_string(i) + " is not flagged normalized");
      if (rows[i].dim() != m.cols()) throw ConfigError("embedding dimension mismatch at row " + std::to_string(i));
      m.row(static_cast<Eigen::Index>(i)) = rows[i].values().transpose();
    }
    return UnitRows(std::move(m));
  }

  const RowMatrix<Scalar>& matrix() const { return m_; }
  Eigen::Index rows() const { return m_.rows(); }
  Eigen::Index dim() const { return m_.cols(); }
  Embedding<Scalar> row(Eigen::Index i) const { return Embedding<Scalar>::unit(m_.row(i).transpose()); }

 private:
  explicit UnitRows(RowMatrix<Scalar> m) : m_(std::move(m)) {}
  RowMatrix<Scalar> m_;
};

// softmax(logits) with max subtraction and double accumulation.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Eigen::VectorXd x = logits.template cast<double>();
  const Eigen::VectorXd e = (x.array() - x.maxCoeff()).exp().matrix();
  return (e / e.sum()).template cast<Scalar>();
}

}  // namespace mrphe
