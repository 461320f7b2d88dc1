#include "ncdre/hmg.hpp"
#include "ncdre/synthetic.hpp"
#include "hmg_oracle.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace ncdre {
namespace {

using testing::mention;

Document two_entity_doc() {
  Document doc;
  doc.doc_id = "d";
  doc.sentences = {{"a", "x", "c"}, {"a", "y"}};
  doc.entities = {{mention(0, 0, 0, 1, "T", "a"), mention(0, 1, 0, 1, "T", "a")},
                  {mention(1, 0, 2, 3, "T", "c")}};
  return doc;
}

TEST(Hmg, WorkedExampleEdges) {
  const auto doc = two_entity_doc();
  const auto layout = make_layout(doc);
  ASSERT_EQ(layout.num_nodes(), 6);  // m1 m3 (sentence 0), m2, s0, s1, d
  const auto E = build_masks(layout);
  const auto off = [](const Mask& m) { return m.cast<int>().sum() - static_cast<int>(m.rows()); };
  // mention rows: 0 = m1(s0), 1 = m3(s0), 2 = m2(s1)
  EXPECT_EQ(E[kIntraEntity](0, 2), 1);
  EXPECT_EQ(off(E[kIntraEntity]), 2);
  EXPECT_EQ(E[kInterEntity](0, 1), 1);
  EXPECT_EQ(off(E[kInterEntity]), 2);
  EXPECT_EQ(E[kSentenceMention](0, 3) + E[kSentenceMention](1, 3) + E[kSentenceMention](2, 4), 3);
  EXPECT_EQ(off(E[kSentenceMention]), 6);
  EXPECT_EQ(E[kSentenceOrder](3, 4), 1);
  EXPECT_EQ(off(E[kSentenceOrder]), 2);
  EXPECT_EQ(E[kSentenceDocument](5, 3) + E[kSentenceDocument](5, 4), 2);
  EXPECT_EQ(off(E[kSentenceDocument]), 4);
  EXPECT_EQ(E[kFullyConnected].cast<int>().sum(), 36);
}

TEST(Hmg, OneSentenceHasNoOrderEdges) {
  Document doc;
  doc.sentences = {{"a", "b"}};
  doc.entities = {{mention(0, 0, 0, 1, "T", "a")}};
  const auto E = build_masks(make_layout(doc));
  EXPECT_EQ(E[kSentenceOrder], Mask::Identity(3, 3));
}

TEST(Hmg, MasksMatchBruteForceOnSyntheticDocuments) {
  const auto config = SynthConfig::load(std::string(NCDRE_CONFIG_DIR) + "/synth_reasoning.cfg");
  for (const auto& doc : generate_synthetic(config, 21)) {
    const auto E = build_masks(make_layout(doc));
    const auto expect = oracle::brute_force(doc);
    for (int k = 0; k < kNumEdgeTypes; ++k) ASSERT_EQ(E[k], expect[k]) << doc.doc_id << " " << edge_type_name(k);
  }
}

TEST(Hmg, NodeFeatures) {
  const auto doc = testing::toy_document();
  const auto vocab = build_vocab({doc}, testing::toy_relations());
  const auto marked = mark_document(doc, vocab);
  std::mt19937_64 rng(3);
  const Tensor<double> H(testing::random_matrix(marked.size(), 6, rng));
  const auto g = build_hmg(doc, marked, H);
  const auto& X = g.X.value();
  ASSERT_EQ(X.rows(), 4 + 2 + 1);
  for (Index k = 0; k < g.layout.num_mentions(); ++k) {
    EXPECT_EQ(X.row(k), H.value().row(marked.mention_start_positions[k]));
  }
  for (Index s = 0; s < 2; ++s) {
    const auto [b, e] = marked.sentence_token_ranges[s];
    RowVector<double> mean = RowVector<double>::Zero(6);
    for (Index t = b; t < e; ++t) mean += H.value().row(t);
    mean /= static_cast<double>(e - b);
    EXPECT_LT((X.row(g.layout.sentence_row(s)) - mean).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_EQ(X.row(g.layout.document_row()), H.value().row(0));
}

TEST(Hmg, SingleTokenSentenceNodeIsThatRow) {
  Document doc;
  doc.sentences = {{"solo"}, {"a", "b"}};
  const auto vocab = build_vocab({doc}, RelationInventory({"r"}));
  const auto marked = mark_document(doc, vocab);
  std::mt19937_64 rng(4);
  const Tensor<double> H(testing::random_matrix(marked.size(), 6, rng));
  const auto g = build_hmg(doc, marked, H);
  EXPECT_EQ(g.X.value().row(g.layout.sentence_row(0)), H.value().row(1));
}

TEST(Hmg, DumpListsEveryEdgeType) {
  const auto layout = make_layout(two_entity_doc());
  const auto text = dump_hmg(layout, build_masks(layout));
  for (int k = 0; k < kNumEdgeTypes; ++k) EXPECT_NE(text.find(edge_type_name(k)), std::string::npos);
}

}  // namespace
}  // namespace ncdre
