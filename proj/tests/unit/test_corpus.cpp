#include "ncdre/corpus.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>

namespace ncdre {
namespace {

using testing::mention;

std::vector<std::string> surface_of(const Document& doc) {
  const auto vocab = build_vocab({doc}, RelationInventory({"r"}));
  return mark_document(doc, vocab).surface;
}

TEST(MarkDocument, SingleMention) {
  Document doc;
  doc.doc_id = "d";
  doc.sentences = {{"a", "b", "c"}};
  doc.entities = {{mention(0, 0, 1, 2, "T", "b")}};
  const auto vocab = build_vocab({doc}, RelationInventory({"r"}));
  const auto marked = mark_document(doc, vocab);
  EXPECT_EQ(marked.surface, (std::vector<std::string>{"[DOC]", "a", "<T>", "b", "</T>", "c"}));
  ASSERT_EQ(marked.mention_start_positions.size(), 1u);
  EXPECT_EQ(marked.mention_start_positions[0], 2);
  EXPECT_EQ(marked.tokens[2], vocab.start_marker("T"));
  EXPECT_EQ(marked.tokens[4], vocab.end_marker("T"));
  EXPECT_EQ(marked.in_mention, (std::vector<char>{0, 0, 0, 1, 0, 0}));
  EXPECT_EQ(marked.sentence_token_ranges, (std::vector<std::pair<Index, Index>>{{1, 6}}));
}

TEST(MarkDocument, NoMentionsOnlyPrependsDocToken) {
  Document doc;
  doc.sentences = {{"x", "y"}, {"z"}};
  EXPECT_EQ(surface_of(doc), (std::vector<std::string>{"[DOC]", "x", "y", "z"}));
}

TEST(MarkDocument, NestedMentionsOpenOuterFirst) {
  Document doc;
  doc.sentences = {{"new", "york", "city", "hall"}};
  doc.entities = {{mention(0, 0, 0, 2, "LOC", "new york")}, {mention(1, 0, 0, 4, "ORG", "new york city hall")}};
  EXPECT_EQ(surface_of(doc),
            (std::vector<std::string>{"[DOC]", "<ORG>", "<LOC>", "new", "york", "</LOC>", "city", "hall",
                                      "</ORG>"}));
}

TEST(MarkDocument, RemovingMarkersRecoversTokens) {
  const auto doc = testing::toy_document();
  const auto vocab = build_vocab({doc}, testing::toy_relations());
  const auto marked = mark_document(doc, vocab);
  std::vector<std::string> plain;
  for (Index i = 1; i < marked.size(); ++i) {
    if (!marked.is_marker[i]) plain.push_back(marked.surface[i]);
  }
  std::vector<std::string> expect;
  for (const auto& s : doc.sentences) expect.insert(expect.end(), s.begin(), s.end());
  EXPECT_EQ(plain, expect);
  for (std::size_t k = 0; k < marked.mentions.size(); ++k) {
    const Index p = marked.mention_start_positions[k];
    ASSERT_GT(p, 0);
    ASSERT_LT(p, marked.size());
    EXPECT_TRUE(marked.is_marker[p]);
  }
  // Marker balance.
  Index depth = 0;
  for (Index i = 0; i < marked.size(); ++i) {
    if (!marked.is_marker[i]) continue;
    depth += marked.surface[i][1] == '/' ? -1 : 1;
    ASSERT_GE(depth, 0);
  }
  EXPECT_EQ(depth, 0);
}

TEST(Vocabulary, SpecialsMarkersAndLookup) {
  EXPECT_EQ(build_vocab({}, RelationInventory()).size(), 3);
  Document doc;
  doc.sentences = {{"Alice", "joined", "Acme"}};
  doc.entities = {{mention(0, 0, 0, 1, "PER", "Alice")}, {mention(1, 0, 2, 3, "ORG", "Acme")}};
  const auto vocab = build_vocab({doc}, RelationInventory({"r"}));
  EXPECT_EQ(vocab.size(), 3 + 4 + 3);
  EXPECT_EQ(vocab.token_id("ALICE"), vocab.token_id("alice"));
  EXPECT_EQ(vocab.token_id("unseen"), Vocabulary::kUnk);
  EXPECT_TRUE(vocab.is_marker(vocab.start_marker("PER")));
  EXPECT_FALSE(vocab.is_marker(vocab.token_id("alice")));
  // Corpus text that looks like a marker is still an ordinary token.
  EXPECT_NE(vocab.token_id("<PER>"), vocab.start_marker("PER"));
  EXPECT_THROW(vocab.start_marker("LOC"), CorpusError);
  EXPECT_EQ(vocab.th_id(), 1);
  EXPECT_EQ(vocab.num_classes(), 2);
  EXPECT_EQ(Vocabulary::from_json(vocab.to_json()), vocab);
}

TEST(Relations, DocredInventoryHas96Codes) {
  const auto rel = RelationInventory::docred();
  EXPECT_EQ(rel.size(), 96);
  EXPECT_TRUE(rel.find("P17").has_value());
  EXPECT_FALSE(rel.find("P0").has_value());
  EXPECT_THROW(rel.id("nope"), CorpusError);
  EXPECT_THROW(RelationInventory({"a", "a"}), CorpusError);
}

TEST(Document, InterSentenceFlag) {
  Document doc;
  doc.sentences = {{"a"}, {"b"}, {"c"}, {"d"}};
  doc.entities = {{mention(0, 0, 0, 1, "X", "a"), mention(0, 3, 0, 1, "X", "a")},
                  {mention(1, 1, 0, 1, "X", "b")},
                  {mention(2, 3, 0, 1, "X", "d")}};
  doc.labels = {{0, 1, 0, false, false, {}}, {0, 2, 0, true, false, {}}};
  annotate_inter_sentence(doc);
  EXPECT_TRUE(doc.labels[0].is_inter_sentence);
  EXPECT_FALSE(doc.labels[1].is_inter_sentence);
}

TEST(Document, ValidateRejectsBrokenRecords) {
  auto doc = testing::toy_document();
  EXPECT_NO_THROW(validate(doc, 2));
  EXPECT_THROW(validate(doc, 1), CorpusError);
  auto bad = doc;
  bad.entities[0][0].end = 9;
  EXPECT_THROW(validate(bad, 2), CorpusError);
  bad = doc;
  bad.labels[0].tail = bad.labels[0].head;
  EXPECT_THROW(validate(bad, 2), CorpusError);
}

constexpr const char* kDocred = R"([
 {"title": "t1",
  "sents": [["Alice", "met", "Bob", "."], ["Bob", "lives", "in", "Paris", "."]],
  "vertexSet": [[{"name": "Alice", "sent_id": 0, "pos": [0, 1], "type": "PER"}],
                [{"name": "Bob", "sent_id": 0, "pos": [2, 3], "type": "PER"},
                 {"name": "Bob", "sent_id": 1, "pos": [0, 1], "type": "PER"}]],
  "labels": [{"h": 0, "t": 1, "r": "P1", "evidence": [0]},
             {"h": 1, "t": 0, "r": "P1", "evidence": [0]},
             {"h": 1, "t": 0, "r": "P2", "evidence": []}]},
 {"title": "t2", "sents": [["x"]], "vertexSet": [[{"name": "x", "sent_id": 0, "pos": [0, 1], "type": "MISC"}]]}
])";

TEST(Docred, ParsesFieldsAndRoundTrips) {
  const RelationInventory rel({"P1", "P2"});
  const auto docs = parse_docred(kDocred, rel);
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].num_entities(), 2);
  EXPECT_EQ(docs[0].labels.size(), 3u);
  EXPECT_EQ(docs[0].entities[1][1].sentence_index, 1);
  EXPECT_TRUE(docs[1].labels.empty());
  const auto again = parse_docred(to_docred_json(docs, rel), rel);
  EXPECT_EQ(again, docs);
  const auto path = std::filesystem::temp_directory_path() / "ncdre_docred_roundtrip.json";
  save_docred(path, docs, rel);
  EXPECT_EQ(load_docred(path, rel), docs);
}

TEST(Docred, ErrorsPointAtTheRecord) {
  const RelationInventory rel({"P1"});
  EXPECT_THROW(parse_docred("{not json", rel), CorpusError);
  EXPECT_THROW(parse_docred(kDocred, rel), CorpusError);  // P2 unknown
  EXPECT_THROW(parse_docred(R"([{"title": "a", "sents": [["x"]], "vertexSet": [[{"name": "x", "sent_id": 4, "pos": [0, 1], "type": "T"}]]}])", rel),
               CorpusError);
  try {
    parse_docred(R"([{"title": "broken", "sents": [["x"]]}])", rel);
    FAIL();
  } catch (const CorpusError& e) {
    EXPECT_NE(std::string(e.what()).find("vertexSet"), std::string::npos);
  }
  EXPECT_THROW(load_docred("/nonexistent.json", rel), CorpusError);
}

TEST(Docred, RelInfoRoundTrip) {
  const RelationInventory rel({"P9", "P3"}, {"nine", "three"});
  const auto path = std::filesystem::temp_directory_path() / "ncdre_rel_info.json";
  save_rel_info(path, rel);
  const auto back = load_rel_info(path);
  EXPECT_EQ(back.codes(), rel.codes());
  EXPECT_EQ(back.description(1), "three");
}

}  // namespace
}  // namespace ncdre
