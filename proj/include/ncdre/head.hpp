#pragma once

#include "ncdre/corpus.hpp"
#include "ncdre/hmg.hpp"
#include "ncdre/parameters.hpp"

#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ncdre {

struct HeadConfig {
  Index d_model = 96;
  Index d_z = 96;
  /// Real relations plus the threshold class, which is last.
  Index num_classes = 2;
};

template <typename Scalar>
struct HeadParams {
  Tensor<Scalar> W_s;  // d_z x 3d
  Tensor<Scalar> W_o;  // d_z x 3d
  Tensor<Scalar> W_r;  // R_total x d_z x d_z
  Tensor<Scalar> b_r;  // R_total

  static HeadParams create(ParameterStore<Scalar>& store, const HeadConfig& config,
                           std::mt19937_64& rng);
};

/// Column-wise log-sum-exp over the given node rows, shape (d).
template <typename Scalar>
Tensor<Scalar> pool_entity(const Tensor<Scalar>& X, std::span<const Index> mention_rows);

template <typename Scalar>
struct PairFeatures {
  Tensor<Scalar> a;  // pairs x l, rows are distributions over tokens
  Tensor<Scalar> c;  // pairs x d
};

/// A_s = softmax(H h_s), A_o = softmax(H h_o), a = softmax(A_s * A_o),
/// c = a^T H. h_s and h_o hold one entity embedding per row (or rank 1).
template <typename Scalar>
PairFeatures<Scalar> clue_features(const Tensor<Scalar>& H, const Tensor<Scalar>& h_s,
                                   const Tensor<Scalar>& h_o);

/// z_s = tanh(W_s [h_s; c; h_doc]), z_o = tanh(W_o [h_o; c; h_doc]),
/// logit_r = z_s^T W_r z_o + b_r. One pair per row; h_doc is a single row
/// shared by all pairs.
template <typename Scalar>
Tensor<Scalar> pair_logits(const Tensor<Scalar>& h_s, const Tensor<Scalar>& h_o,
                           const Tensor<Scalar>& c, const Tensor<Scalar>& h_doc,
                           const HeadParams<Scalar>& params);

/// Real classes whose logit beats the threshold logit (the last entry).
/// Empty means no relation.
template <typename Derived>
std::vector<Index> decide(const Eigen::DenseBase<Derived>& logits) {
  std::vector<Index> out;
  const Index th = logits.size() - 1;
  for (Index r = 0; r < th; ++r) {
    if (logits(r) > logits(th)) out.push_back(r);
  }
  return out;
}

/// Ordered entity pairs (s != o), s-major.
std::vector<std::pair<Index, Index>> ordered_pairs(Index num_entities);

/// Gold positive relation ids for each pair.
std::vector<std::vector<Index>> pair_positives(const Document& doc,
                                               const std::vector<std::pair<Index, Index>>& pairs);

/// Differentiable scoring of every ordered pair of one document.
template <typename Scalar>
struct PairBatch {
  std::vector<std::pair<Index, Index>> pairs;
  Tensor<Scalar> entities;  // entities x d
  Tensor<Scalar> clue;      // pairs x l
  Tensor<Scalar> logits;    // pairs x R_total
};

template <typename Scalar>
PairBatch<Scalar> score_pairs(const HmgLayout& layout, const Tensor<Scalar>& X,
                              const Tensor<Scalar>& H, const HeadParams<Scalar>& params);

struct Prediction {
  std::string doc_id;
  Index head = 0;
  Index tail = 0;
  Index relation = 0;
  double logit = 0;
  double logit_th = 0;
};

struct DocumentScores {
  std::string doc_id;
  std::vector<std::pair<Index, Index>> pairs;
  Matrix<double> logits;  // pairs x R_total
  Matrix<double> clue;    // pairs x l
  std::vector<Prediction> predictions;
};

template <typename Scalar>
DocumentScores score_document(const Document& doc, const HmgLayout& layout,
                              const Tensor<Scalar>& X, const Tensor<Scalar>& H,
                              const HeadParams<Scalar>& params);

/// DocRED result records (title, h_idx, t_idx, r) plus scores, one per
/// predicted fact.
std::string predictions_to_json(const std::vector<Prediction>& predictions,
                                const RelationInventory& relations);
void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& predictions,
                      const RelationInventory& relations);

}  // namespace ncdre
