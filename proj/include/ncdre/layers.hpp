#pragma once

#include "ncdre/ops.hpp"
#include "ncdre/parameters.hpp"

#include <random>
#include <string>
#include <vector>

namespace ncdre {

/// y = x W + b with W stored (in x out).
template <typename Scalar>
struct Linear {
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;

  static Linear create(ParameterStore<Scalar>& store, const std::string& name, ParamGroup group,
                       Index in, Index out, std::mt19937_64& rng);
};

template <typename Scalar>
struct LayerNormParams {
  Tensor<Scalar> gain;
  Tensor<Scalar> bias;

  static LayerNormParams create(ParameterStore<Scalar>& store, const std::string& name,
                                ParamGroup group, Index dim);
};

template <typename Scalar>
struct AttentionParams {
  Linear<Scalar> query;
  Linear<Scalar> key;
  Linear<Scalar> value;
  Linear<Scalar> output;
  Index heads = 1;

  static AttentionParams create(ParameterStore<Scalar>& store, const std::string& name,
                                ParamGroup group, Index dim, Index heads, std::mt19937_64& rng);
};

template <typename Scalar>
struct FeedForwardParams {
  Linear<Scalar> inner;
  Linear<Scalar> outer;

  static FeedForwardParams create(ParameterStore<Scalar>& store, const std::string& name,
                                  ParamGroup group, Index dim, Index width, std::mt19937_64& rng);
};

template <typename Scalar>
Tensor<Scalar> apply(const Linear<Scalar>& layer, const Tensor<Scalar>& x);

template <typename Scalar>
Tensor<Scalar> apply(const LayerNormParams<Scalar>& norm, const Tensor<Scalar>& x);

/// relu(x W1 + b1) W2 + b2
template <typename Scalar>
Tensor<Scalar> apply(const FeedForwardParams<Scalar>& ff, const Tensor<Scalar>& x);

/// Multi-head scaled dot-product attention. Queries come from `queries`,
/// keys and values from `memory`. When `head_masks` is non-empty it holds one
/// mask per head (nullptr = unmasked). Attention matrices are appended to
/// `capture` when given.
template <typename Scalar>
Tensor<Scalar> multi_head_attention(const AttentionParams<Scalar>& params,
                                    const Tensor<Scalar>& queries, const Tensor<Scalar>& memory,
                                    const std::vector<const Mask*>& head_masks = {},
                                    std::vector<Matrix<Scalar>>* capture = nullptr);

/// x + sublayer, then layer norm, with dropout on the sub-layer output.
template <typename Scalar>
Tensor<Scalar> residual_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& sublayer,
                             const LayerNormParams<Scalar>& norm, Scalar dropout_rate,
                             bool training, std::mt19937_64* rng);

}  // namespace ncdre
