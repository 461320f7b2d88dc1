#include "ncdre/idecoder.hpp"

namespace ncdre {

void DecoderConfig::validate() const {
  if (heads_per_edge_type < 1) throw ModelConfigError("heads_per_edge_type must be >= 1");
  if (d_model <= 0 || d_model % sm_heads() != 0) {
    throw ModelConfigError("d_model " + std::to_string(d_model) + " is not divisible by " +
                           std::to_string(sm_heads()) + " SM-MSA heads");
  }
  if (cross_heads < 1 || d_model % cross_heads != 0) {
    throw ModelConfigError("d_model " + std::to_string(d_model) + " is not divisible by " +
                           std::to_string(cross_heads) + " C-MSA heads");
  }
  if (layers < 0 || (layers == 0 && !bypass_decoder)) {
    throw ModelConfigError("decoder layers must be >= 1 unless the decoder is bypassed");
  }
  if (ff_width < 1) throw ModelConfigError("decoder ff width must be >= 1");
  if (dropout < 0 || dropout >= 1) throw ModelConfigError("dropout must lie in [0, 1)");
}

template <typename Scalar>
DecoderLayerParams<Scalar> DecoderLayerParams<Scalar>::create(ParameterStore<Scalar>& store,
                                                              const std::string& name,
                                                              const DecoderConfig& config,
                                                              std::mt19937_64& rng) {
  const auto g = ParamGroup::IDecoder;
  const Index d = config.d_model;
  return {AttentionParams<Scalar>::create(store, name + ".sm_msa", g, d, config.sm_heads(), rng),
          LayerNormParams<Scalar>::create(store, name + ".sm_norm", g, d),
          AttentionParams<Scalar>::create(store, name + ".c_msa", g, d, config.cross_heads, rng),
          LayerNormParams<Scalar>::create(store, name + ".c_norm", g, d),
          FeedForwardParams<Scalar>::create(store, name + ".feed_forward", g, d, config.ff_width, rng),
          LayerNormParams<Scalar>::create(store, name + ".feed_forward_norm", g, d)};
}

template <typename Scalar>
Tensor<Scalar> sm_msa(const Tensor<Scalar>& X, const EdgeMasks& E,
                      const AttentionParams<Scalar>& params, Index heads_per_edge_type, bool plain,
                      std::vector<Matrix<Scalar>>* capture) {
  const Index n = X.rows();
  for (const auto& m : E) {
    if (m.rows() != n || m.cols() != n) {
      throw ShapeError("sm_msa: mask of " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                       " for " + std::to_string(n) + " nodes");
    }
  }
  if (params.heads != kNumEdgeTypes * heads_per_edge_type) {
    throw ShapeError("sm_msa: " + std::to_string(params.heads) + " heads for " +
                     std::to_string(heads_per_edge_type) + " per edge type");
  }
  std::vector<const Mask*> masks;
  const Mask* full = &E[kFullyConnected];
  for (Index h = 0; h < params.heads; ++h) {
    masks.push_back(plain ? full : &E[edge_type_of_head(h, heads_per_edge_type)]);
  }
  return multi_head_attention(params, X, X, masks, capture);
}

template <typename Scalar>
Tensor<Scalar> c_msa(const Tensor<Scalar>& nodes, const Tensor<Scalar>& H,
                     const AttentionParams<Scalar>& params, std::vector<Matrix<Scalar>>* capture) {
  return multi_head_attention(params, nodes, H, {}, capture);
}

template <typename Scalar>
Tensor<Scalar> decoder_layer(const Tensor<Scalar>& X, const EdgeMasks& E, const Tensor<Scalar>& H,
                             const DecoderLayerParams<Scalar>& params, const DecoderConfig& config,
                             bool training, std::mt19937_64* rng, DecoderCapture<Scalar>* capture) {
  const auto rate = static_cast<Scalar>(config.dropout);
  std::vector<Matrix<Scalar>>* sm_capture = nullptr;
  std::vector<Matrix<Scalar>>* cross_capture = nullptr;
  if (capture) {
    sm_capture = &capture->sm.emplace_back();
    cross_capture = &capture->cross.emplace_back();
  }
  auto x = residual_norm(X,
                         sm_msa(X, E, params.sm, config.heads_per_edge_type,
                                config.replace_sm_with_plain_msa, sm_capture),
                         params.sm_norm, rate, training, rng);
  if (!config.disable_c_msa) {
    x = residual_norm(x, c_msa(x, H, params.cross, cross_capture), params.cross_norm, rate, training, rng);
  }
  return residual_norm(x, apply(params.feed_forward, x), params.feed_forward_norm, rate, training, rng);
}

template <typename Scalar>
Tensor<Scalar> run_decoder(const Tensor<Scalar>& X, const EdgeMasks& E, const Tensor<Scalar>& H,
                           const std::vector<DecoderLayerParams<Scalar>>& params,
                           const DecoderConfig& config, bool training, std::mt19937_64* rng,
                           DecoderCapture<Scalar>* capture) {
  if (config.bypass_decoder) return X;
  if (params.empty()) throw ModelConfigError("run_decoder: no layers and decoder not bypassed");
  Tensor<Scalar> x = X;
  for (const auto& layer : params) x = decoder_layer(x, E, H, layer, config, training, rng, capture);
  return x;
}

#define NCDRE_INSTANTIATE_IDECODER(S)                                                           \
  template struct DecoderLayerParams<S>;                                                        \
  template Tensor<S> sm_msa(const Tensor<S>&, const EdgeMasks&, const AttentionParams<S>&, Index, \
                            bool, std::vector<Matrix<S>>*);                                     \
  template Tensor<S> c_msa(const Tensor<S>&, const Tensor<S>&, const AttentionParams<S>&,       \
                           std::vector<Matrix<S>>*);                                            \
  template Tensor<S> decoder_layer(const Tensor<S>&, const EdgeMasks&, const Tensor<S>&,        \
                                   const DecoderLayerParams<S>&, const DecoderConfig&, bool,    \
                                   std::mt19937_64*, DecoderCapture<S>*);                       \
  template Tensor<S> run_decoder(const Tensor<S>&, const EdgeMasks&, const Tensor<S>&,          \
                                 const std::vector<DecoderLayerParams<S>>&, const DecoderConfig&, \
                                 bool, std::mt19937_64*, DecoderCapture<S>*);

NCDRE_INSTANTIATE_IDECODER(double)
NCDRE_INSTANTIATE_IDECODER(float)

}  // namespace ncdre
