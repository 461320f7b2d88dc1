#include "ncdre/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace ncdre {

template <typename Scalar>
Linear<Scalar> Linear<Scalar>::create(ParameterStore<Scalar>& store, const std::string& name,
                                      ParamGroup group, Index in, Index out,
                                      std::mt19937_64& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(in + out));
  Linear layer;
  layer.weight = store.add_normal(name + ".weight", group, {in, out}, stddev, rng);
  layer.bias = store.add_constant(name + ".bias", group, {out}, Scalar(0));
  return layer;
}

template <typename Scalar>
LayerNormParams<Scalar> LayerNormParams<Scalar>::create(ParameterStore<Scalar>& store,
                                                        const std::string& name,
                                                        ParamGroup group, Index dim) {
  return {store.add_constant(name + ".gain", group, {dim}, Scalar(1)),
          store.add_constant(name + ".bias", group, {dim}, Scalar(0))};
}

template <typename Scalar>
AttentionParams<Scalar> AttentionParams<Scalar>::create(ParameterStore<Scalar>& store,
                                                        const std::string& name,
                                                        ParamGroup group, Index dim, Index heads,
                                                        std::mt19937_64& rng) {
  if (heads < 1 || dim % heads != 0) {
    throw std::invalid_argument(name + ": model width " + std::to_string(dim) +
                                " is not divisible by " + std::to_string(heads) + " heads");
  }
  AttentionParams p;
  p.query = Linear<Scalar>::create(store, name + ".query", group, dim, dim, rng);
  p.key = Linear<Scalar>::create(store, name + ".key", group, dim, dim, rng);
  p.value = Linear<Scalar>::create(store, name + ".value", group, dim, dim, rng);
  p.output = Linear<Scalar>::create(store, name + ".output", group, dim, dim, rng);
  p.heads = heads;
  return p;
}

template <typename Scalar>
FeedForwardParams<Scalar> FeedForwardParams<Scalar>::create(ParameterStore<Scalar>& store,
                                                            const std::string& name,
                                                            ParamGroup group, Index dim,
                                                            Index width, std::mt19937_64& rng) {
  return {Linear<Scalar>::create(store, name + ".inner", group, dim, width, rng),
          Linear<Scalar>::create(store, name + ".outer", group, width, dim, rng)};
}

template <typename Scalar>
Tensor<Scalar> apply(const Linear<Scalar>& layer, const Tensor<Scalar>& x) {
  return add(matmul(x, layer.weight), layer.bias);
}

template <typename Scalar>
Tensor<Scalar> apply(const LayerNormParams<Scalar>& norm, const Tensor<Scalar>& x) {
  return layer_norm_rows(x, norm.gain, norm.bias);
}

template <typename Scalar>
Tensor<Scalar> apply(const FeedForwardParams<Scalar>& ff, const Tensor<Scalar>& x) {
  return apply(ff.outer, relu(apply(ff.inner, x)));
}

template <typename Scalar>
Tensor<Scalar> multi_head_attention(const AttentionParams<Scalar>& params,
                                    const Tensor<Scalar>& queries, const Tensor<Scalar>& memory,
                                    const std::vector<const Mask*>& head_masks,
                                    std::vector<Matrix<Scalar>>* capture) {
  const Index heads = params.heads;
  if (!head_masks.empty() && static_cast<Index>(head_masks.size()) != heads) {
    throw ShapeError("multi_head_attention: " + std::to_string(head_masks.size()) +
                     " masks for " + std::to_string(heads) + " heads");
  }
  const Index dim = queries.cols();
  const Index head_dim = dim / heads;
  const Scalar scaling = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));

  const auto q = apply(params.query, queries);
  const auto k = apply(params.key, memory);
  const auto v = apply(params.value, memory);

  std::vector<Tensor<Scalar>> outputs;
  outputs.reserve(static_cast<std::size_t>(heads));
  for (Index h = 0; h < heads; ++h) {
    const auto qh = slice_cols(q, h * head_dim, head_dim);
    const auto kh = slice_cols(k, h * head_dim, head_dim);
    const auto vh = slice_cols(v, h * head_dim, head_dim);
    const auto scores = scale(matmul_nt(qh, kh), scaling);
    const Mask* mask = head_masks.empty() ? nullptr : head_masks[static_cast<std::size_t>(h)];
    const auto weights = mask ? masked_softmax_rows(scores, *mask) : softmax_rows(scores);
    if (capture) capture->push_back(weights.value());
    outputs.push_back(matmul(weights, vh));
  }
  const auto joined = heads == 1 ? outputs.front() : concat_cols(outputs);
  return apply(params.output, joined);
}

template <typename Scalar>
Tensor<Scalar> residual_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& sublayer,
                             const LayerNormParams<Scalar>& norm, Scalar dropout_rate,
                             bool training, std::mt19937_64* rng) {
  Tensor<Scalar> y = sublayer;
  if (training && dropout_rate > Scalar(0)) {
    if (!rng) throw std::invalid_argument("residual_norm: training dropout needs an rng");
    y = dropout(sublayer, dropout_rate, true, *rng);
  }
  return apply(norm, add(x, y));
}

#define NCDRE_INSTANTIATE_LAYERS(S)                                                           \
  template struct Linear<S>;                                                                  \
  template struct LayerNormParams<S>;                                                         \
  template struct AttentionParams<S>;                                                         \
  template struct FeedForwardParams<S>;                                                       \
  template Tensor<S> apply(const Linear<S>&, const Tensor<S>&);                               \
  template Tensor<S> apply(const LayerNormParams<S>&, const Tensor<S>&);                      \
  template Tensor<S> apply(const FeedForwardParams<S>&, const Tensor<S>&);                    \
  template Tensor<S> multi_head_attention(const AttentionParams<S>&, const Tensor<S>&,        \
                                          const Tensor<S>&, const std::vector<const Mask*>&,  \
                                          std::vector<Matrix<S>>*);                           \
  template Tensor<S> residual_norm(const Tensor<S>&, const Tensor<S>&,                        \
                                   const LayerNormParams<S>&, S, bool, std::mt19937_64*);

NCDRE_INSTANTIATE_LAYERS(double)
NCDRE_INSTANTIATE_LAYERS(float)

}  // namespace ncdre
