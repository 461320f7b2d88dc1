#include "ncdre/head.hpp"
#include "ncdre/ops.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace ncdre {
namespace {

using T = Tensor<double>;

Matrix<double> rows(std::initializer_list<std::initializer_list<double>> values) {
  Matrix<double> m(static_cast<Index>(values.size()), static_cast<Index>(values.begin()->size()));
  Index r = 0;
  for (const auto& row : values) {
    Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

TEST(Pooling, WorkedCasesAndBounds) {
  std::mt19937_64 rng(1);
  const Matrix<double> X = testing::random_matrix(5, 4, rng, 2.0);
  const std::vector<Index> one{3};
  EXPECT_EQ(pool_entity(T(X), std::span<const Index>(one)).value(), X.row(3));
  const std::vector<Index> dup{2, 2};
  const Matrix<double> expect = (X.row(2).array() + std::log(2.0)).matrix();
  EXPECT_LT((pool_entity(T(X), std::span<const Index>(dup)).value() - expect).cwiseAbs().maxCoeff(), 1e-12);
  const std::vector<Index> three{0, 1, 4};
  const auto h = pool_entity(T(X), std::span<const Index>(three)).value();
  for (Index j = 0; j < 4; ++j) {
    const double mx = std::max({X(0, j), X(1, j), X(4, j)});
    EXPECT_GE(h(0, j), mx);
    EXPECT_LE(h(0, j), mx + std::log(3.0));
  }
  EXPECT_THROW(pool_entity(T(X), std::span<const Index>()), std::invalid_argument);
}

TEST(Clue, WorkedExample) {
  const T H(rows({{1, 0}, {0, 1}}));
  const T h(rows({{1, 0}}));
  const auto f = clue_features(H, h, h);
  const double A0 = 1 / (1 + std::exp(-1.0));  // 0.7311
  const double A1 = 1 - A0;
  const double a0 = 1 / (1 + std::exp(A1 * A1 - A0 * A0));
  EXPECT_NEAR(A0, 0.7311, 1e-4);
  EXPECT_NEAR(a0, 0.6136, 1e-4);
  EXPECT_NEAR(f.a.value()(0, 0), a0, 1e-12);
  EXPECT_NEAR(f.a.value()(0, 1), 1 - a0, 1e-12);
  EXPECT_NEAR(f.c.value()(0, 0), a0, 1e-12);
  EXPECT_NEAR(f.c.value()(0, 1), 1 - a0, 1e-12);
}

TEST(Clue, IdenticalRowsGiveUniformWeights) {
  const Matrix<double> H = Matrix<double>::Ones(4, 1) * rows({{0.3, -1.2, 2.0}});
  std::mt19937_64 rng(2);
  const auto f = clue_features(T(H), T(testing::random_matrix(2, 3, rng)), T(testing::random_matrix(2, 3, rng)));
  EXPECT_LT((f.a.value().array() - 0.25).abs().maxCoeff(), 1e-12);
  for (Index p = 0; p < 2; ++p) EXPECT_LT((f.c.value().row(p) - H.row(0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Clue, ProbabilityVectorInsideConvexHull) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix<double> H = testing::random_matrix(7, 5, rng, 2.0);
    const auto f = clue_features(T(H), T(testing::random_matrix(3, 5, rng)), T(testing::random_matrix(3, 5, rng)));
    for (Index p = 0; p < 3; ++p) {
      EXPECT_NEAR(f.a.value().row(p).sum(), 1.0, 1e-12);
      EXPECT_GE(f.a.value().row(p).minCoeff(), 0.0);
      for (Index j = 0; j < 5; ++j) {
        EXPECT_GE(f.c.value()(p, j), H.col(j).minCoeff() - 1e-12);
        EXPECT_LE(f.c.value()(p, j), H.col(j).maxCoeff() + 1e-12);
      }
    }
  }
}

struct HeadFixture {
  ParameterStore<double> store;
  HeadParams<double> params;
  std::mt19937_64 rng{4};
  HeadFixture() { params = HeadParams<double>::create(store, {6, 5, 4}, rng); }
};

TEST(PairLogits, ZeroWeightsGiveBiasAndShape) {
  HeadFixture f;
  f.params.W_s.mutable_value().setZero();
  f.params.W_o.mutable_value().setZero();
  f.params.b_r.mutable_value() << 0.5, -1, 2, 0.25;
  const T hs(testing::random_matrix(3, 6, f.rng)), ho(testing::random_matrix(3, 6, f.rng));
  const T c(testing::random_matrix(3, 6, f.rng)), doc(testing::random_matrix(1, 6, f.rng));
  const auto logits = pair_logits(hs, ho, c, doc, f.params).value();
  ASSERT_EQ(logits.cols(), 4);
  for (Index p = 0; p < 3; ++p) EXPECT_EQ(logits.row(p), f.params.b_r.value());
}

TEST(PairLogits, GradientMatchesFiniteDifferences) {
  HeadFixture f;
  const T hs(testing::random_matrix(2, 6, f.rng)), ho(testing::random_matrix(2, 6, f.rng));
  const T c(testing::random_matrix(2, 6, f.rng)), doc(testing::random_matrix(1, 6, f.rng));
  const auto one_logit = [&] { return slice_cols(slice_rows(pair_logits(hs, ho, c, doc, f.params), 1, 1), 2, 1); };
  for (const auto& e : f.store.entries()) EXPECT_LT(testing::gradient_error(e.tensor, one_logit), 1e-6) << e.name;
}

TEST(Decide, ThresholdComparisons) {
  Eigen::RowVector3d a(2.0, -1.0, 0.5);
  EXPECT_EQ(decide(a), (std::vector<Index>{0}));
  Eigen::RowVector3d b(-2.0, -1.0, 0.5);
  EXPECT_TRUE(decide(b).empty());
  Eigen::RowVector3d shifted = a.array() + 17.0;
  EXPECT_EQ(decide(shifted), decide(a));
  Eigen::RowVector2d tie(0.5, 0.5);
  EXPECT_TRUE(decide(tie).empty());
}

TEST(Pairs, OrderedAndPositives) {
  EXPECT_EQ(ordered_pairs(2), (std::vector<std::pair<Index, Index>>{{0, 1}, {1, 0}}));
  EXPECT_EQ(ordered_pairs(3).size(), 6u);
  EXPECT_TRUE(ordered_pairs(1).empty());
  const auto doc = testing::toy_document();
  const auto pairs = ordered_pairs(3);
  const auto pos = pair_positives(doc, pairs);
  EXPECT_EQ(pos[0], (std::vector<Index>{0}));  // (0, 1) met
  EXPECT_TRUE(pos[1].empty());                 // (0, 2)
  EXPECT_EQ(pos[3], (std::vector<Index>{1}));  // (1, 2) lives_in
}

TEST(ScorePairs, MatchesSeparateComposition) {
  HeadFixture f;
  const auto doc = testing::toy_document();
  const auto layout = make_layout(doc);
  const T X(testing::random_matrix(layout.num_nodes(), 6, f.rng));
  const T H(testing::random_matrix(11, 6, f.rng));
  const auto batch = score_pairs(layout, X, H, f.params);
  ASSERT_EQ(batch.pairs.size(), 6u);
  const T doc_row = slice_rows(X, layout.document_row(), 1);
  for (std::size_t p = 0; p < batch.pairs.size(); ++p) {
    const auto [s, o] = batch.pairs[p];
    const auto hs = pool_entity(X, std::span<const Index>(layout.entity_rows[s]));
    const auto ho = pool_entity(X, std::span<const Index>(layout.entity_rows[o]));
    const auto clue = clue_features(H, hs, ho);
    const auto logits = pair_logits(hs, ho, clue.c, doc_row, f.params).value();
    EXPECT_LT((batch.logits.value().row(static_cast<Index>(p)) - logits).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((batch.clue.value().row(static_cast<Index>(p)) - clue.a.value()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ScoreDocument, PredictionsFollowDecisions) {
  HeadFixture f;
  const auto doc = testing::toy_document();
  const auto layout = make_layout(doc);
  const T X(testing::random_matrix(layout.num_nodes(), 6, f.rng, 3.0));
  const T H(testing::random_matrix(11, 6, f.rng));
  const auto scores = score_document(doc, layout, X, H, f.params);
  Index expected = 0;
  for (Index p = 0; p < scores.logits.rows(); ++p) expected += static_cast<Index>(decide(scores.logits.row(p)).size());
  EXPECT_EQ(static_cast<Index>(scores.predictions.size()), expected);
  const auto json = predictions_to_json(scores.predictions, RelationInventory({"a", "b", "c"}));
  EXPECT_EQ(json.front(), '[');
}

}  // namespace
}  // namespace ncdre
