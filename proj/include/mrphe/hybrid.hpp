#pragma once

#include <string>
#include <string_view>

#include "mrphe/embedding.hpp"

namespace mrphe {

template <typename Scalar>
struct PatchAttention {
  Vector<Scalar> max_similarity;  // s_i = max_c e_i . t_c
  Vector<Scalar> weights;         // softmax(s), no temperature
};

// Attention over patches from their best class similarity.
template <typename Scalar>
PatchAttention<Scalar> patch_attention(const UnitRows<Scalar>& patches, const UnitRows<Scalar>& classes) {
  if (patches.rows() < 1) throw ContractError("patch_attention: no patches");
  if (classes.rows() < 1) throw ContractError("patch_attention: no classes");
  if (patches.dim() != classes.dim()) throw ConfigError("patch_attention: dimension mismatch");
  const RowMatrix<Scalar> sim = patches.matrix() * classes.matrix().transpose();  // N x C
  PatchAttention<Scalar> out;
  out.max_similarity = sim.rowwise().maxCoeff();
  out.weights = softmax(out.max_similarity);
  return out;
}

// Uniform weights 1/N (the average-patch-weighting ablation).
template <typename Scalar>
PatchAttention<Scalar> uniform_attention(const UnitRows<Scalar>& patches) {
  if (patches.rows() < 1) throw ContractError("uniform_attention: no patches");
  const auto n = patches.rows();
  return {Vector<Scalar>::Zero(n), Vector<Scalar>::Constant(n, Scalar(1) / static_cast<Scalar>(n))};
}

// e_patch = sum_i w_i e_i. Norm is at most 1; may be zero under cancellation.
template <typename Scalar>
Vector<Scalar> aggregate_patches(const UnitRows<Scalar>& patches, const Vector<Scalar>& weights) {
  if (weights.size() != patches.rows()) throw ContractError("aggregate_patches: weight count mismatch");
  return patches.matrix().transpose() * weights;
}

template <typename Scalar>
struct HybridEmbedding {
  Embedding<Scalar> h;
  double alpha = 0.5;
  Vector<Scalar> global_part;  // alpha * e_global
  Vector<Scalar> patch_part;   // (1 - alpha) * e_patch
};

// h = normalize(alpha * e_global + (1 - alpha) * e_patch).
template <typename Scalar>
HybridEmbedding<Scalar> hybrid_embedding(const Embedding<Scalar>& global, const Vector<Scalar>& patch, double alpha,
                                         std::string_view image_id = {}) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha: must lie in [0, 1]");
  if (!global.normalized()) throw ContractError("hybrid_embedding: global embedding is not normalized");
  if (patch.size() != global.dim()) throw ConfigError("hybrid_embedding: dimension mismatch");
  HybridEmbedding<Scalar> out;
  out.alpha = alpha;
  out.global_part = static_cast<Scalar>(alpha) * global.values();
  out.patch_part = static_cast<Scalar>(1.0 - alpha) * patch;
  if (alpha == 1.0) {
    out.h = global;
    return out;
  }
  const Vector<Scalar> sum = out.global_part + out.patch_part;
  out.h = Embedding<Scalar>::unit(normalized_copy(sum, image_id), image_id);
  return out;
}

}  // namespace mrphe
