#include "ncdre/model.hpp"

#include <nlohmann/json.hpp>

namespace ncdre {

using Json = nlohmann::ordered_json;

void ModelConfig::set_dropout(double rate) {
  encoder.dropout = rate;
  decoder.dropout = rate;
}

void ModelConfig::validate() const {
  encoder.validate();
  if (decoder.d_model != encoder.d_model) {
    throw ModelConfigError("decoder width " + std::to_string(decoder.d_model) +
                           " differs from encoder width " + std::to_string(encoder.d_model));
  }
  decoder.validate();
  if (d_z < 0) throw ModelConfigError("d_z must be >= 0");
}

const std::set<std::string>& ModelConfig::known_keys() {
  static const std::set<std::string> keys = {
      "d_model",        "encoder_layers", "encoder_heads",       "encoder_ff",  "max_length",
      "embedding_std",  "decoder_layers", "heads_per_edge_type", "cross_heads", "decoder_ff",
      "d_z",            "dropout",        "disable_c_msa",       "plain_msa",   "bypass_decoder",
      "sinusoid_positions"};
  return keys;
}

ModelConfig ModelConfig::from_config(const KeyValueConfig& kv) {
  ModelConfig c;
  c.encoder.d_model = kv.get_int("d_model", c.encoder.d_model);
  c.encoder.layers = kv.get_int("encoder_layers", c.encoder.layers);
  c.encoder.heads = kv.get_int("encoder_heads", c.encoder.heads);
  c.encoder.ff_width = kv.get_int("encoder_ff", c.encoder.ff_width);
  c.encoder.max_length = kv.get_int("max_length", c.encoder.max_length);
  c.encoder.embedding_std = kv.get_double("embedding_std", c.encoder.embedding_std);
  c.encoder.sinusoid_positions = kv.get_bool("sinusoid_positions", c.encoder.sinusoid_positions);
  c.decoder.d_model = c.encoder.d_model;
  c.decoder.layers = kv.get_int("decoder_layers", c.decoder.layers);
  c.decoder.heads_per_edge_type = kv.get_int("heads_per_edge_type", c.decoder.heads_per_edge_type);
  c.decoder.cross_heads = kv.get_int("cross_heads", c.decoder.cross_heads);
  c.decoder.ff_width = kv.get_int("decoder_ff", c.decoder.ff_width);
  c.decoder.disable_c_msa = kv.get_bool("disable_c_msa", false);
  c.decoder.replace_sm_with_plain_msa = kv.get_bool("plain_msa", false);
  c.decoder.bypass_decoder = kv.get_bool("bypass_decoder", false);
  c.d_z = kv.get_int("d_z", 0);
  c.set_dropout(kv.get_double("dropout", c.encoder.dropout));
  c.validate();
  return c;
}

std::string ModelConfig::to_json() const {
  Json j = {{"d_model", encoder.d_model},
            {"encoder_layers", encoder.layers},
            {"encoder_heads", encoder.heads},
            {"encoder_ff", encoder.ff_width},
            {"max_length", encoder.max_length},
            {"embedding_std", encoder.embedding_std},
            {"sinusoid_positions", encoder.sinusoid_positions},
            {"decoder_layers", decoder.layers},
            {"heads_per_edge_type", decoder.heads_per_edge_type},
            {"cross_heads", decoder.cross_heads},
            {"decoder_ff", decoder.ff_width},
            {"d_z", d_z},
            {"dropout", encoder.dropout},
            {"disable_c_msa", decoder.disable_c_msa},
            {"plain_msa", decoder.replace_sm_with_plain_msa},
            {"bypass_decoder", decoder.bypass_decoder}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(std::string_view text) {
  const auto j = Json::parse(text);
  ModelConfig c;
  c.encoder.d_model = j.at("d_model").get<Index>();
  c.encoder.layers = j.at("encoder_layers").get<Index>();
  c.encoder.heads = j.at("encoder_heads").get<Index>();
  c.encoder.ff_width = j.at("encoder_ff").get<Index>();
  c.encoder.max_length = j.at("max_length").get<Index>();
  c.encoder.embedding_std = j.at("embedding_std").get<double>();
  c.encoder.sinusoid_positions = j.value("sinusoid_positions", false);
  c.decoder.d_model = c.encoder.d_model;
  c.decoder.layers = j.at("decoder_layers").get<Index>();
  c.decoder.heads_per_edge_type = j.at("heads_per_edge_type").get<Index>();
  c.decoder.cross_heads = j.at("cross_heads").get<Index>();
  c.decoder.ff_width = j.at("decoder_ff").get<Index>();
  c.d_z = j.at("d_z").get<Index>();
  c.set_dropout(j.at("dropout").get<double>());
  c.decoder.disable_c_msa = j.at("disable_c_msa").get<bool>();
  c.decoder.replace_sm_with_plain_msa = j.at("plain_msa").get<bool>();
  c.decoder.bypass_decoder = j.at("bypass_decoder").get<bool>();
  c.validate();
  return c;
}

template <typename Scalar>
NcDreModel<Scalar>::NcDreModel(ModelConfig config, Vocabulary vocab, std::uint64_t seed)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  encoder_ = EncoderParams<Scalar>::create(params_, config_.encoder, vocab_.size(), rng);
  for (Index l = 0; l < config_.decoder.layers; ++l) {
    decoder_.push_back(
        DecoderLayerParams<Scalar>::create(params_, "i_decoder.layer" + std::to_string(l), config_.decoder, rng));
  }
  head_ = HeadParams<Scalar>::create(
      params_, {config_.d_model(), config_.classifier_width(), vocab_.num_classes()}, rng);
}

template <typename Scalar>
typename NcDreModel<Scalar>::Forward NcDreModel<Scalar>::forward(const Document& doc, bool training,
                                                                 std::mt19937_64* rng,
                                                                 DecoderCapture<Scalar>* capture) const {
  Forward f;
  f.marked = mark_document(doc, vocab_);
  f.H = encode(f.marked, doc.doc_id, encoder_, config_.encoder, training, rng).H;
  f.hmg = build_hmg(doc, f.marked, f.H);
  f.X_out = run_decoder(f.hmg.X, f.hmg.E, f.H, decoder_, config_.decoder, training, rng, capture);
  f.batch = score_pairs(f.hmg.layout, f.X_out, f.H, head_);
  return f;
}

template <typename Scalar>
Tensor<Scalar> NcDreModel<Scalar>::loss(const Document& doc, bool training, std::mt19937_64* rng) const {
  if (doc.num_entities() < 2) return Tensor<Scalar>::scalar(Scalar(0));
  const auto f = forward(doc, training, rng);
  return atl_loss(f.batch.logits, pair_positives(doc, f.batch.pairs));
}

template <typename Scalar>
DocumentScores NcDreModel<Scalar>::predict(const Document& doc) const {
  NoGradGuard<Scalar> guard;
  if (doc.num_entities() < 2) return {doc.doc_id, {}, {}, {}, {}};
  const auto f = forward(doc, false, nullptr);
  return score_document(doc, f.hmg.layout, f.X_out, f.H, head_);
}

template <typename Scalar>
std::vector<Prediction> NcDreModel<Scalar>::predict_all(const std::vector<Document>& docs) const {
  std::vector<Prediction> out;
  for (const auto& doc : docs) {
    auto scores = predict(doc);
    out.insert(out.end(), scores.predictions.begin(), scores.predictions.end());
  }
  return out;
}

template <typename Scalar>
Archive NcDreModel<Scalar>::to_archive() const {
  Archive a;
  Json meta;
  meta["format"] = "ncdre-model";
  meta["model"] = Json::parse(config_.to_json());
  meta["vocab"] = Json::parse(vocab_.to_json());
  a.meta = meta.dump();
  a.sections = export_parameters(params_);
  return a;
}

CheckpointMeta parse_checkpoint_meta(const Archive& archive) {
  Json meta;
  try {
    meta = Json::parse(archive.meta);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint meta is not valid JSON: ") + e.what());
  }
  if (!meta.is_object() || !meta.contains("model") || !meta.contains("vocab")) {
    throw CheckpointError("checkpoint meta lacks model or vocab");
  }
  return {ModelConfig::from_json(meta["model"].dump()), Vocabulary::from_json(meta["vocab"].dump()),
          archive.meta};
}

template <typename Scalar>
NcDreModel<Scalar> NcDreModel<Scalar>::from_archive(const Archive& archive) {
  auto meta = parse_checkpoint_meta(archive);
  NcDreModel model(std::move(meta.config), std::move(meta.vocab), 0);
  import_parameters(archive, model.params_);
  return model;
}

template <typename Scalar>
void NcDreModel<Scalar>::save(const std::filesystem::path& path) const {
  write_archive(path, to_archive());
}

template <typename Scalar>
NcDreModel<Scalar> NcDreModel<Scalar>::load(const std::filesystem::path& path) {
  return from_archive(read_archive(path));
}

template class NcDreModel<double>;
template class NcDreModel<float>;

}  // namespace ncdre
