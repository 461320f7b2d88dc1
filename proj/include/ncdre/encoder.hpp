#pragma once

#include "ncdre/corpus.hpp"
#include "ncdre/layers.hpp"

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncdre {

class ModelConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EncoderConfig {
  Index d_model = 96;
  Index layers = 2;
  Index heads = 4;
  Index ff_width = 192;
  Index max_length = 512;
  double dropout = 0.1;
  double embedding_std = 0.5;
  /// Start the learned position table from sin/cos waves instead of noise.
  bool sinusoid_positions = true;

  /// Throws ModelConfigError; d_model must divide by 6 and by heads.
  void validate() const;
};

template <typename Scalar>
struct EncoderLayerParams {
  AttentionParams<Scalar> attention;
  LayerNormParams<Scalar> attention_norm;
  FeedForwardParams<Scalar> feed_forward;
  LayerNormParams<Scalar> feed_forward_norm;
};

template <typename Scalar>
struct EncoderParams {
  Tensor<Scalar> token_embedding;     // vocab x d
  Tensor<Scalar> position_embedding;  // max_length x d
  std::vector<EncoderLayerParams<Scalar>> layers;

  static EncoderParams create(ParameterStore<Scalar>& store, const EncoderConfig& config,
                              Index vocab_size, std::mt19937_64& rng);
};

template <typename Scalar>
struct ContextualEmbeddings {
  Tensor<Scalar> H;  // marked tokens x d
  std::string doc_id;
};

/// Token plus position embedding followed by post-norm self-attention
/// layers. `rng` is only used when training with dropout. Self-attention
/// matrices (per layer, per head) go to `capture` when given.
template <typename Scalar>
ContextualEmbeddings<Scalar> encode(const MarkedDocument& marked, const std::string& doc_id,
                                    const EncoderParams<Scalar>& params,
                                    const EncoderConfig& config, bool training = false,
                                    std::mt19937_64* rng = nullptr,
                                    std::vector<Matrix<Scalar>>* capture = nullptr);

}  // namespace ncdre
