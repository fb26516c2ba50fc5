#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mrphe/embedding.hpp"

namespace mrphe {

// S = H T^T, image-major. Rows are produced in blocks of `block_rows` images.
template <typename Scalar>
RowMatrix<Scalar> similarity_matrix(const UnitRows<Scalar>& images, const UnitRows<Scalar>& classes,
                                    Eigen::Index block_rows = 512) {
  if (images.rows() > 0 && images.dim() != classes.dim())
    throw ConfigError("similarity_matrix: image dim " + std::to_string(images.dim()) + " != class dim " +
                      std::to_string(classes.dim()));
  if (block_rows < 1) block_rows = 1;
  RowMatrix<Scalar> S(images.rows(), classes.rows());
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> Tt = classes.matrix().transpose();
  for (Eigen::Index begin = 0; begin < images.rows(); begin += block_rows) {
    const auto n = std::min(block_rows, images.rows() - begin);
    S.middleRows(begin, n).noalias() = images.matrix().middleRows(begin, n) * Tt;
  }
  return S;
}

// softmax(row / tau).
template <typename Derived>
Vector<typename Derived::Scalar> scale_and_softmax(const Eigen::MatrixBase<Derived>& row, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau: must be a finite value > 0");
  return softmax(row.template cast<double>() / tau).template cast<typename Derived::Scalar>();
}

struct LabelChoice {
  Eigen::Index label = 0;
  bool tie_broken = false;
  bool operator==(const LabelChoice&) const = default;
};

// argmax; exact ties resolve to the lowest index and set tie_broken.
template <typename Derived>
LabelChoice predict(const Eigen::MatrixBase<Derived>& probabilities) {
  LabelChoice out;
  for (Eigen::Index c = 1; c < probabilities.size(); ++c)
    if (probabilities[c] > probabilities[out.label]) out.label = c;
  for (Eigen::Index c = 0; c < probabilities.size(); ++c)
    if (c != out.label && probabilities[c] == probabilities[out.label]) out.tie_broken = true;
  return out;
}

template <typename Scalar>
struct Classified {
  RowMatrix<Scalar> probabilities;  // N x C
  std::vector<LabelChoice> labels;
  double tau = 1.5;
};

template <typename Scalar>
Classified<Scalar> classify(const RowMatrix<Scalar>& similarity, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau: must be a finite value > 0");
  Classified<Scalar> out;
  out.tau = tau;
  out.probabilities.resize(similarity.rows(), similarity.cols());
  out.labels.resize(static_cast<std::size_t>(similarity.rows()));
  for (Eigen::Index n = 0; n < similarity.rows(); ++n) {
    out.probabilities.row(n) = scale_and_softmax(similarity.row(n), tau).transpose();
    out.labels[static_cast<std::size_t>(n)] = predict(out.probabilities.row(n));
  }
  return out;
}

}  // namespace mrphe
