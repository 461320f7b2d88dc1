#pragma once

#include "ncdre/tensor.hpp"

#include <random>
#include <span>
#include <vector>

namespace ncdre {

// Differentiable operations. All of them operate on the 2-D storage view of
// their inputs and record a backward rule when a tape is active. Shape
// mismatches raise ShapeError naming both operands.

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

/// a * b^T, the usual form for scores and for weights stored as (out x in).
template <typename Scalar>
Tensor<Scalar> matmul_nt(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

/// Elementwise; b may also be a single row broadcast over every row of a.
template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar factor);

template <typename Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& a);
template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& a);
template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& a);

/// Concatenates along the last dimension.
template <typename Scalar>
Tensor<Scalar> concat_cols(const std::vector<Tensor<Scalar>>& parts);
template <typename Scalar>
Tensor<Scalar> concat_rows(const std::vector<Tensor<Scalar>>& parts);

template <typename Scalar>
Tensor<Scalar> slice_cols(const Tensor<Scalar>& a, Index start, Index count);
template <typename Scalar>
Tensor<Scalar> slice_rows(const Tensor<Scalar>& a, Index start, Index count);

/// Row selection with repetition allowed; the backward pass scatter-adds.
template <typename Scalar>
Tensor<Scalar> gather_rows(const Tensor<Scalar>& a, std::span<const Index> rows);

/// Row-wise softmax over the last dimension.
template <typename Scalar>
Tensor<Scalar> softmax_rows(const Tensor<Scalar>& scores);

/// Row-wise softmax restricted to positions where mask != 0. Masked
/// positions are exactly zero; a row with no allowed position is all zero
/// and passes no gradient.
template <typename Scalar>
Tensor<Scalar> masked_softmax_rows(const Tensor<Scalar>& scores, const Mask& mask);

/// Column-wise log-sum-exp over the rows of an (m x d) tensor, giving shape
/// (d). Max-shifted; m must be at least 1.
template <typename Scalar>
Tensor<Scalar> logsumexp_rows(const Tensor<Scalar>& rows);

/// Column-wise mean over rows, shape (d).
template <typename Scalar>
Tensor<Scalar> mean_rows(const Tensor<Scalar>& rows);

/// Normalizes each row to zero mean and unit variance, then applies gain
/// and bias (both of width d).
template <typename Scalar>
Tensor<Scalar> layer_norm_rows(const Tensor<Scalar>& x, const Tensor<Scalar>& gain,
                               const Tensor<Scalar>& bias, Scalar epsilon = Scalar(1e-5));

/// Inverted dropout. Identity when !training or rate == 0.
template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, Scalar rate, bool training, std::mt19937_64& rng);

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a);
template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& a);

/// Batched bilinear form. zs, zo: (P x k); weight: shape (R x k x k).
/// Returns (P x R) with out[p][r] = zs[p]^T W_r zo[p].
template <typename Scalar>
Tensor<Scalar> bilinear(const Tensor<Scalar>& zs, const Tensor<Scalar>& weight,
                        const Tensor<Scalar>& zo);

/// Adaptive-thresholding loss averaged over the rows of a (P x R_total)
/// logit tensor whose last column is the threshold class. positives[p]
/// holds the positive real-class indices of row p.
template <typename Scalar>
Tensor<Scalar> atl_loss(const Tensor<Scalar>& logits,
                        const std::vector<std::vector<Index>>& positives);

}  // namespace ncdre
