#include "ncdre/encoder.hpp"

#include <cmath>
#include <span>

namespace ncdre {

void EncoderConfig::validate() const {
  if (d_model <= 0 || d_model % 6 != 0) {
    throw ModelConfigError("d_model must be a positive multiple of 6, got " + std::to_string(d_model));
  }
  if (heads < 1 || d_model % heads != 0) {
    throw ModelConfigError("d_model " + std::to_string(d_model) + " is not divisible by " +
                           std::to_string(heads) + " encoder heads");
  }
  if (layers < 0) throw ModelConfigError("encoder layers must be >= 0");
  if (ff_width < 1) throw ModelConfigError("encoder ff width must be >= 1");
  if (max_length < 1) throw ModelConfigError("max_length must be >= 1");
  if (dropout < 0 || dropout >= 1) throw ModelConfigError("dropout must lie in [0, 1)");
}

namespace {

// Scaled so each column has roughly the same spread as the noise init.
template <typename Scalar>
Matrix<Scalar> sinusoid_table(Index rows, Index dim, double std) {
  Matrix<Scalar> t(rows, dim);
  const double amp = std * std::sqrt(2.0);
  for (Index pos = 0; pos < rows; ++pos) {
    for (Index i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * freq;
      t(pos, i) = static_cast<Scalar>(amp * (i % 2 == 0 ? std::sin(angle) : std::cos(angle)));
    }
  }
  return t;
}

}  // namespace

template <typename Scalar>
EncoderParams<Scalar> EncoderParams<Scalar>::create(ParameterStore<Scalar>& store,
                                                    const EncoderConfig& config,
                                                    Index vocab_size, std::mt19937_64& rng) {
  config.validate();
  const auto g = ParamGroup::Encoder;
  EncoderParams p;
  p.token_embedding =
      store.add_normal("encoder.token_embedding", g, {vocab_size, config.d_model}, config.embedding_std, rng);
  if (config.sinusoid_positions) {
    p.position_embedding = store.add("encoder.position_embedding", g,
                                     sinusoid_table<Scalar>(config.max_length, config.d_model,
                                                            config.embedding_std));
  } else {
    p.position_embedding = store.add_normal("encoder.position_embedding", g,
                                            {config.max_length, config.d_model}, config.embedding_std, rng);
  }
  for (Index l = 0; l < config.layers; ++l) {
    const std::string name = "encoder.layer" + std::to_string(l);
    p.layers.push_back(
        {AttentionParams<Scalar>::create(store, name + ".attention", g, config.d_model, config.heads, rng),
         LayerNormParams<Scalar>::create(store, name + ".attention_norm", g, config.d_model),
         FeedForwardParams<Scalar>::create(store, name + ".feed_forward", g, config.d_model,
                                           config.ff_width, rng),
         LayerNormParams<Scalar>::create(store, name + ".feed_forward_norm", g, config.d_model)});
  }
  return p;
}

template <typename Scalar>
ContextualEmbeddings<Scalar> encode(const MarkedDocument& marked, const std::string& doc_id,
                                    const EncoderParams<Scalar>& params,
                                    const EncoderConfig& config, bool training,
                                    std::mt19937_64* rng, std::vector<Matrix<Scalar>>* capture) {
  const Index n = marked.size();
  if (n > config.max_length) {
    throw std::length_error("document '" + doc_id + "' has " + std::to_string(n) +
                            " marked tokens but max_length is " + std::to_string(config.max_length) +
                            "; raise max_length or shorten the document");
  }
  const Index vocab = params.token_embedding.rows();
  for (Index id : marked.tokens) {
    if (id < 0 || id >= vocab) {
      throw std::out_of_range("document '" + doc_id + "': token id " + std::to_string(id) +
                              " outside vocabulary of size " + std::to_string(vocab));
    }
  }
  auto h = add(gather_rows(params.token_embedding, std::span<const Index>(marked.tokens)),
               slice_rows(params.position_embedding, 0, n));
  const auto rate = static_cast<Scalar>(config.dropout);
  for (const auto& layer : params.layers) {
    const auto attended = multi_head_attention(layer.attention, h, h, {}, capture);
    h = residual_norm(h, attended, layer.attention_norm, rate, training, rng);
    h = residual_norm(h, apply(layer.feed_forward, h), layer.feed_forward_norm, rate, training, rng);
  }
  return {h, doc_id};
}

#define NCDRE_INSTANTIATE_ENCODER(S)                                                           \
  template struct EncoderParams<S>;                                                            \
  template ContextualEmbeddings<S> encode(const MarkedDocument&, const std::string&,           \
                                          const EncoderParams<S>&, const EncoderConfig&, bool, \
                                          std::mt19937_64*, std::vector<Matrix<S>>*);

NCDRE_INSTANTIATE_ENCODER(double)
NCDRE_INSTANTIATE_ENCODER(float)

}  // namespace ncdre
