#pragma once

#include "ncdre/encoder.hpp"
#include "ncdre/hmg.hpp"
#include "ncdre/layers.hpp"

#include <random>
#include <vector>

namespace ncdre {

struct DecoderConfig {
  Index layers = 4;
  Index d_model = 96;
  Index heads_per_edge_type = 1;
  Index cross_heads = 6;
  Index ff_width = 192;
  double dropout = 0.1;
  bool disable_c_msa = false;
  bool replace_sm_with_plain_msa = false;
  bool bypass_decoder = false;

  Index sm_heads() const { return kNumEdgeTypes * heads_per_edge_type; }
  /// Throws ModelConfigError.
  void validate() const;
};

template <typename Scalar>
struct DecoderLayerParams {
  AttentionParams<Scalar> sm;
  LayerNormParams<Scalar> sm_norm;
  AttentionParams<Scalar> cross;
  LayerNormParams<Scalar> cross_norm;
  FeedForwardParams<Scalar> feed_forward;
  LayerNormParams<Scalar> feed_forward_norm;

  static DecoderLayerParams create(ParameterStore<Scalar>& store, const std::string& name,
                                   const DecoderConfig& config, std::mt19937_64& rng);
};

/// Attention matrices recorded during a decoder pass, indexed [layer][head].
template <typename Scalar>
struct DecoderCapture {
  std::vector<std::vector<Matrix<Scalar>>> sm;
  std::vector<std::vector<Matrix<Scalar>>> cross;
};

/// Edge type served by SM head h when each type has k heads.
inline int edge_type_of_head(Index head, Index heads_per_edge_type) {
  return static_cast<int>(head / heads_per_edge_type);
}

/// Structured-mask self-attention: head h attends over the sub-graph of edge
/// type h / k only. `plain` ignores the masks.
template <typename Scalar>
Tensor<Scalar> sm_msa(const Tensor<Scalar>& X, const EdgeMasks& E,
                      const AttentionParams<Scalar>& params, Index heads_per_edge_type,
                      bool plain = false, std::vector<Matrix<Scalar>>* capture = nullptr);

/// Cross-attention from graph nodes to token embeddings, unmasked.
template <typename Scalar>
Tensor<Scalar> c_msa(const Tensor<Scalar>& nodes, const Tensor<Scalar>& H,
                     const AttentionParams<Scalar>& params,
                     std::vector<Matrix<Scalar>>* capture = nullptr);

/// SM-MSA, C-MSA, feed-forward; each as residual add then layer norm.
template <typename Scalar>
Tensor<Scalar> decoder_layer(const Tensor<Scalar>& X, const EdgeMasks& E, const Tensor<Scalar>& H,
                             const DecoderLayerParams<Scalar>& params, const DecoderConfig& config,
                             bool training = false, std::mt19937_64* rng = nullptr,
                             DecoderCapture<Scalar>* capture = nullptr);

/// X' = stack of decoder layers, or X itself when bypassed.
template <typename Scalar>
Tensor<Scalar> run_decoder(const Tensor<Scalar>& X, const EdgeMasks& E, const Tensor<Scalar>& H,
                           const std::vector<DecoderLayerParams<Scalar>>& params,
                           const DecoderConfig& config, bool training = false,
                           std::mt19937_64* rng = nullptr,
                           DecoderCapture<Scalar>* capture = nullptr);

}  // namespace ncdre
