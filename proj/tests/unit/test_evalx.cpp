#include "golden.hpp"
#include "ncdre/evalx.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace ncdre {
namespace {

Prediction pred(const std::string& doc, Index h, Index t, Index r) {
  Prediction p;
  p.doc_id = doc;
  p.head = h;
  p.tail = t;
  p.relation = r;
  return p;
}

TEST(F1, PerfectPredictions) {
  const auto doc = testing::toy_document();
  const auto report = f1_scores({pred("toy", 0, 1, 0), pred("toy", 1, 2, 1)}, {doc}, testing::toy_relations());
  EXPECT_EQ(report.overall.f1(), 1.0);
  EXPECT_EQ(report.overall.precision(), 1.0);
  EXPECT_EQ(report.overall.recall(), 1.0);
}

TEST(F1, TwoOfThree) {
  auto doc = testing::toy_document();
  doc.labels.push_back({0, 2, 0, false, false, {}});
  annotate_inter_sentence(doc);
  // gold {a, b, c}, predicted {a, b, d}
  const auto report = f1_scores({pred("toy", 0, 1, 0), pred("toy", 1, 2, 1), pred("toy", 2, 0, 1)}, {doc},
                                testing::toy_relations());
  EXPECT_DOUBLE_EQ(report.overall.precision(), 2.0 / 3);
  EXPECT_DOUBLE_EQ(report.overall.recall(), 2.0 / 3);
  EXPECT_DOUBLE_EQ(report.overall.f1(), 2.0 / 3);
}

TEST(F1, EmptyEverythingIsZeroNotNan) {
  Document doc = testing::toy_document();
  doc.labels.clear();
  const auto report = f1_scores({}, {doc}, testing::toy_relations());
  EXPECT_EQ(report.overall.f1(), 0.0);
  EXPECT_FALSE(report.infer.has_value());
  EXPECT_FALSE(report.ign.has_value());
}

TEST(F1, RejectsUnknownDocumentsAndIndices) {
  const auto doc = testing::toy_document();
  EXPECT_THROW(f1_scores({pred("other", 0, 1, 0)}, {doc}, testing::toy_relations()), std::invalid_argument);
  EXPECT_THROW(f1_scores({pred("toy", 0, 7, 0)}, {doc}, testing::toy_relations()), std::invalid_argument);
  EXPECT_THROW(f1_scores({pred("toy", 0, 1, 5)}, {doc}, testing::toy_relations()), std::invalid_argument);
}

TEST(Golden, CountsMatchHandTally) {
  const auto f = golden::load(std::string(NCDRE_TEST_DATA) + "/golden");
  const auto facts = collect_train_facts(f.train, f.relations);
  const auto r = f1_scores(f.predictions, f.gold, f.relations, &facts);
  const auto& e = f.expected;
  EXPECT_TRUE(golden::counts_match(r.overall, e["overall"]));
  EXPECT_TRUE(golden::counts_match(r.intra, e["intra"]));
  EXPECT_TRUE(golden::counts_match(r.inter, e["inter"]));
  ASSERT_TRUE(r.infer.has_value());
  EXPECT_TRUE(golden::counts_match(*r.infer, e["infer"]));
  for (const auto& [code, counts] : e["per_relation"].items()) {
    EXPECT_TRUE(golden::counts_match(r.per_relation.at(code), counts)) << code;
  }
  EXPECT_EQ(r.duplicates, e["duplicates"].get<Index>());
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_DOUBLE_EQ(r.overall.f1(), e["f1"].get<double>());
  ASSERT_TRUE(r.ign.has_value());
  EXPECT_EQ(r.ign->tp_in_train, e["ign"]["tp_in_train"].get<Index>());
  EXPECT_DOUBLE_EQ(r.ign->precision, e["ign"]["precision"].get<double>());
  EXPECT_DOUBLE_EQ(r.ign->recall, e["ign"]["recall"].get<double>());
  EXPECT_DOUBLE_EQ(r.ign->f1, e["ign"]["f1"].get<double>());
}

TEST(Golden, ReportIdentities) {
  const auto f = golden::load(std::string(NCDRE_TEST_DATA) + "/golden");
  const auto r = f1_scores(f.predictions, f.gold, f.relations);
  EXPECT_EQ(r.intra.tp + r.inter.tp, r.overall.tp);
  EXPECT_EQ(r.intra.fp + r.inter.fp, r.overall.fp);
  EXPECT_EQ(r.intra.fn + r.inter.fn, r.overall.fn);
  Index tp = 0;
  for (const auto& [code, c] : r.per_relation) tp += c.tp;
  EXPECT_EQ(tp, r.overall.tp);
  const auto text = r.to_text();
  EXPECT_NE(text.find("n/a (no training facts given)"), std::string::npos);
  EXPECT_NE(text.find("synthetic reasoning tags"), std::string::npos);
  const auto json = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(json["overall"]["tp"].get<Index>(), r.overall.tp);
}

TEST(TrainFacts, KeyedByMentionNames) {
  const auto f = golden::load(std::string(NCDRE_TEST_DATA) + "/golden");
  const auto facts = collect_train_facts(f.train, f.relations);
  EXPECT_EQ(facts.size(), 4u);
  EXPECT_TRUE(facts.count({"a", "c", "P1"}));
  EXPECT_FALSE(facts.count({"c", "a", "P1"}));
}

TEST(Heatmap, FlagsWeightsAndTopTokens) {
  const auto doc = testing::toy_document();
  const auto vocab = build_vocab({doc}, testing::toy_relations());
  const auto marked = mark_document(doc, vocab);
  std::vector<double> w(static_cast<std::size_t>(marked.size()), 0.01);
  w[4] = 0.5;  // "met"
  w[1] = 0.2;  // <PER>
  const auto h = export_heatmap(doc, marked, 0, 2, w, 2);
  ASSERT_EQ(h.top.size(), 2u);
  EXPECT_EQ(h.top[0].token, "met");
  EXPECT_FALSE(h.top[0].is_marker);
  EXPECT_FALSE(h.top[0].in_mention);
  EXPECT_TRUE(h.top[1].is_marker);
  for (Index i = 0; i < marked.size(); ++i) {
    EXPECT_EQ(h.is_marker[static_cast<std::size_t>(i)], vocab.is_marker(marked.tokens[static_cast<std::size_t>(i)]) ? 1 : 0);
  }
  const auto json = nlohmann::json::parse(h.to_json());
  EXPECT_EQ(json["tokens"].size(), static_cast<std::size_t>(marked.size()));
  EXPECT_THROW(export_heatmap(doc, marked, 0, 0, w), std::out_of_range);
  EXPECT_THROW(export_heatmap(doc, marked, 0, 9, w), std::out_of_range);
  EXPECT_THROW(export_heatmap(doc, marked, 0, 1, std::vector<double>(2, 0.5)), std::invalid_argument);
}

TEST(Heatmap, UniformEncoderGivesUniformWeights) {
  const auto doc = testing::toy_document();
  const auto vocab = build_vocab({doc}, testing::toy_relations());
  const auto marked = mark_document(doc, vocab);
  const Matrix<double> H = Matrix<double>::Ones(marked.size(), 4);
  std::mt19937_64 rng(1);
  const auto f = clue_features(Tensor<double>(H), Tensor<double>(testing::random_matrix(1, 4, rng)),
                               Tensor<double>(testing::random_matrix(1, 4, rng)));
  const auto& a = f.a.value();
  EXPECT_NEAR(a.sum(), 1.0, 1e-12);
  EXPECT_LT((a.array() - 1.0 / static_cast<double>(marked.size())).abs().maxCoeff(), 1e-12);
}

}  // namespace
}  // namespace ncdre
