#include "ncdre/head.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ncdre {

template <typename Scalar>
HeadParams<Scalar> HeadParams<Scalar>::create(ParameterStore<Scalar>& store, const HeadConfig& config,
                                              std::mt19937_64& rng) {
  const auto g = ParamGroup::Classifier;
  const Index in = 3 * config.d_model;
  const double proj_std = std::sqrt(2.0 / static_cast<double>(in + config.d_z));
  const double bil_std = 1.0 / static_cast<double>(config.d_z);
  HeadParams p;
  p.W_s = store.add_normal("classifier.W_s", g, {config.d_z, in}, proj_std, rng);
  p.W_o = store.add_normal("classifier.W_o", g, {config.d_z, in}, proj_std, rng);
  p.W_r = store.add_normal("classifier.W_r", g, {config.num_classes, config.d_z, config.d_z}, bil_std, rng);
  p.b_r = store.add_constant("classifier.b_r", g, {config.num_classes}, Scalar(0));
  return p;
}

template <typename Scalar>
Tensor<Scalar> pool_entity(const Tensor<Scalar>& X, std::span<const Index> mention_rows) {
  if (mention_rows.empty()) throw std::invalid_argument("pool_entity: entity has no mention rows");
  return logsumexp_rows(gather_rows(X, mention_rows));
}

template <typename Scalar>
PairFeatures<Scalar> clue_features(const Tensor<Scalar>& H, const Tensor<Scalar>& h_s,
                                   const Tensor<Scalar>& h_o) {
  const auto A_s = softmax_rows(matmul_nt(h_s, H));
  const auto A_o = softmax_rows(matmul_nt(h_o, H));
  auto a = softmax_rows(mul(A_s, A_o));
  auto c = matmul(a, H);
  return {a, c};
}

template <typename Scalar>
Tensor<Scalar> pair_logits(const Tensor<Scalar>& h_s, const Tensor<Scalar>& h_o,
                           const Tensor<Scalar>& c, const Tensor<Scalar>& h_doc,
                           const HeadParams<Scalar>& params) {
  const Index pairs = h_s.rows();
  std::vector<Index> doc_rows(static_cast<std::size_t>(pairs), 0);
  const auto docs = gather_rows(h_doc, std::span<const Index>(doc_rows));
  const auto z_s = tanh(matmul_nt(concat_cols<Scalar>({h_s, c, docs}), params.W_s));
  const auto z_o = tanh(matmul_nt(concat_cols<Scalar>({h_o, c, docs}), params.W_o));
  return add(bilinear(z_s, params.W_r, z_o), params.b_r);
}

std::vector<std::pair<Index, Index>> ordered_pairs(Index num_entities) {
  std::vector<std::pair<Index, Index>> out;
  for (Index s = 0; s < num_entities; ++s) {
    for (Index o = 0; o < num_entities; ++o) {
      if (s != o) out.emplace_back(s, o);
    }
  }
  return out;
}

std::vector<std::vector<Index>> pair_positives(const Document& doc,
                                               const std::vector<std::pair<Index, Index>>& pairs) {
  const Index n = doc.num_entities();
  std::vector<std::vector<Index>> by_pair(static_cast<std::size_t>(n * n));
  for (const auto& f : doc.labels) {
    auto& slot = by_pair[static_cast<std::size_t>(f.head * n + f.tail)];
    if (std::find(slot.begin(), slot.end(), f.relation) == slot.end()) slot.push_back(f.relation);
  }
  std::vector<std::vector<Index>> out;
  out.reserve(pairs.size());
  for (const auto& [s, o] : pairs) {
    auto p = by_pair[static_cast<std::size_t>(s * n + o)];
    std::sort(p.begin(), p.end());
    out.push_back(std::move(p));
  }
  return out;
}

template <typename Scalar>
PairBatch<Scalar> score_pairs(const HmgLayout& layout, const Tensor<Scalar>& X,
                              const Tensor<Scalar>& H, const HeadParams<Scalar>& params) {
  PairBatch<Scalar> batch;
  const Index n = static_cast<Index>(layout.entity_rows.size());
  batch.pairs = ordered_pairs(n);
  if (batch.pairs.empty()) return batch;
  std::vector<Tensor<Scalar>> pooled;
  for (const auto& rows : layout.entity_rows) pooled.push_back(pool_entity(X, std::span<const Index>(rows)));
  batch.entities = concat_rows(pooled);

  // Token attention is computed once per entity, then gathered per pair.
  const auto A = softmax_rows(matmul_nt(batch.entities, H));
  std::vector<Index> s_idx;
  std::vector<Index> o_idx;
  for (const auto& [s, o] : batch.pairs) {
    s_idx.push_back(s);
    o_idx.push_back(o);
  }
  const auto A_s = gather_rows(A, std::span<const Index>(s_idx));
  const auto A_o = gather_rows(A, std::span<const Index>(o_idx));
  batch.clue = softmax_rows(mul(A_s, A_o));
  const auto c = matmul(batch.clue, H);
  const auto h_doc = slice_rows(X, layout.document_row(), 1);
  batch.logits = pair_logits(gather_rows(batch.entities, std::span<const Index>(s_idx)),
                             gather_rows(batch.entities, std::span<const Index>(o_idx)), c, h_doc,
                             params);
  return batch;
}

template <typename Scalar>
DocumentScores score_document(const Document& doc, const HmgLayout& layout,
                              const Tensor<Scalar>& X, const Tensor<Scalar>& H,
                              const HeadParams<Scalar>& params) {
  NoGradGuard<Scalar> guard;
  const auto batch = score_pairs(layout, X, H, params);
  DocumentScores out;
  out.doc_id = doc.doc_id;
  out.pairs = batch.pairs;
  if (batch.pairs.empty()) return out;
  out.logits = batch.logits.value().template cast<double>();
  out.clue = batch.clue.value().template cast<double>();
  const Index th = out.logits.cols() - 1;
  for (std::size_t p = 0; p < batch.pairs.size(); ++p) {
    const auto row = out.logits.row(static_cast<Index>(p));
    for (Index r : decide(row)) {
      out.predictions.push_back({doc.doc_id, batch.pairs[p].first, batch.pairs[p].second, r, row(r), row(th)});
    }
  }
  return out;
}

std::string predictions_to_json(const std::vector<Prediction>& predictions,
                                const RelationInventory& relations) {
  nlohmann::ordered_json root = nlohmann::ordered_json::array();
  for (const auto& p : predictions) {
    root.push_back({{"title", p.doc_id},
                    {"h_idx", p.head},
                    {"t_idx", p.tail},
                    {"r", relations.code(p.relation)},
                    {"logit", p.logit},
                    {"logit_th", p.logit_th}});
  }
  return root.dump(1);
}

void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& predictions,
                      const RelationInventory& relations) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << predictions_to_json(predictions, relations) << '\n';
}

#define NCDRE_INSTANTIATE_HEAD(S)                                                              \
  template struct HeadParams<S>;                                                               \
  template Tensor<S> pool_entity(const Tensor<S>&, std::span<const Index>);                    \
  template PairFeatures<S> clue_features(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&); \
  template Tensor<S> pair_logits(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,         \
                                 const Tensor<S>&, const HeadParams<S>&);                      \
  template PairBatch<S> score_pairs(const HmgLayout&, const Tensor<S>&, const Tensor<S>&,      \
                                    const HeadParams<S>&);                                     \
  template DocumentScores score_document(const Document&, const HmgLayout&, const Tensor<S>&, \
                                         const Tensor<S>&, const HeadParams<S>&);

NCDRE_INSTANTIATE_HEAD(double)
NCDRE_INSTANTIATE_HEAD(float)

}  // namespace ncdre
