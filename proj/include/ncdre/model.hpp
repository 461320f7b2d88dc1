#pragma once

#include "ncdre/checkpoint.hpp"
#include "ncdre/config.hpp"
#include "ncdre/corpus.hpp"
#include "ncdre/encoder.hpp"
#include "ncdre/head.hpp"
#include "ncdre/hmg.hpp"
#include "ncdre/idecoder.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace ncdre {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  Index d_z = 0;  // 0 = d_model

  Index d_model() const { return encoder.d_model; }
  Index classifier_width() const { return d_z > 0 ? d_z : encoder.d_model; }
  void set_dropout(double rate);
  /// Throws ModelConfigError.
  void validate() const;

  /// Keys read from a config file; unknown keys are left to the caller.
  static ModelConfig from_config(const KeyValueConfig& kv);
  static const std::set<std::string>& known_keys();

  std::string to_json() const;
  static ModelConfig from_json(std::string_view text);
};

/// Encoder, I-Decoder stack and classification head over one vocabulary.
template <typename Scalar>
class NcDreModel {
 public:
  NcDreModel(ModelConfig config, Vocabulary vocab, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParameterStore<Scalar>& params() { return params_; }
  const ParameterStore<Scalar>& params() const { return params_; }

  /// Ablation switches may change after construction; parameters stay.
  DecoderConfig& decoder_config() { return config_.decoder; }

  struct Forward {
    MarkedDocument marked;
    Tensor<Scalar> H;
    Hmg<Scalar> hmg;
    Tensor<Scalar> X_out;
    PairBatch<Scalar> batch;
  };

  Forward forward(const Document& doc, bool training = false, std::mt19937_64* rng = nullptr,
                  DecoderCapture<Scalar>* capture = nullptr) const;

  /// Mean adaptive-thresholding loss over the ordered pairs of `doc`. A
  /// document with fewer than two entities yields a constant zero.
  Tensor<Scalar> loss(const Document& doc, bool training = false, std::mt19937_64* rng = nullptr) const;

  DocumentScores predict(const Document& doc) const;
  std::vector<Prediction> predict_all(const std::vector<Document>& docs) const;

  /// Config, vocabulary and parameters. Meta is a JSON object with keys
  /// "model" and "vocab"; callers may add keys and sections.
  Archive to_archive() const;
  static NcDreModel from_archive(const Archive& archive);
  void save(const std::filesystem::path& path) const;
  static NcDreModel load(const std::filesystem::path& path);

  const EncoderParams<Scalar>& encoder_params() const { return encoder_; }
  const std::vector<DecoderLayerParams<Scalar>>& decoder_params() const { return decoder_; }
  const HeadParams<Scalar>& head_params() const { return head_; }

 private:
  ModelConfig config_;
  Vocabulary vocab_;
  ParameterStore<Scalar> params_;
  EncoderParams<Scalar> encoder_;
  std::vector<DecoderLayerParams<Scalar>> decoder_;
  HeadParams<Scalar> head_;
};

/// Reads the meta block of a checkpoint without touching parameters.
struct CheckpointMeta {
  ModelConfig config;
  Vocabulary vocab;
  std::string raw;
};
CheckpointMeta parse_checkpoint_meta(const Archive& archive);

}  // namespace ncdre
