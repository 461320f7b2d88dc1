#include "ncdre/synthetic.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <tuple>

namespace ncdre {
namespace {

constexpr const char* kSchema = R"(
documents = 40
dev_documents = 5
chains = 1 2
facts = 1 2
gated = 1 2
trigger_rate = 0.5
distractors = 1 2
name_pool = 20
relation = born_in PER LOC | {h} was born in {t}
relation = works_for PER ORG | {h} works for {t} | {h} joined {t}
relation = based_in ORG LOC | {h} is based in {t}
relation = located_in LOC LOC | {h} lies within {t}
relation = works_in PER LOC | {h} works in {t}
relation = partner_of ORG ORG | {h} met {t}
gate = partner_of alliance
rule = works_for based_in => works_in
rule = born_in located_in => born_in
rule = located_in located_in => located_in
)";

SynthConfig schema(std::string extra = "") {
  return SynthConfig::from_config(KeyValueConfig::parse(std::string(kSchema) + extra));
}

using Fact = std::tuple<Index, Index, Index>;

// Independent forward chaining over the facts the generator did not tag as
// composed.
std::set<Fact> closure(const Document& doc, const SynthConfig& config) {
  const auto inv = config.inventory();
  std::set<Fact> facts;
  for (const auto& f : doc.labels) {
    if (!f.is_reasoning) facts.emplace(f.head, f.tail, f.relation);
  }
  bool grew = true;
  while (grew) {
    grew = false;
    const auto snapshot = facts;
    for (const auto& rule : config.rules) {
      const Index r1 = inv.id(rule.first), r2 = inv.id(rule.second), r3 = inv.id(rule.result);
      for (const auto& [a, b, x] : snapshot) {
        if (x != r1) continue;
        for (const auto& [b2, c, y] : snapshot) {
          if (y != r2 || b2 != b || a == c) continue;
          grew = facts.emplace(a, c, r3).second || grew;
        }
      }
    }
  }
  return facts;
}

bool document_has(const Document& doc, const std::string& token) {
  for (const auto& s : doc.sentences) {
    if (std::find(s.begin(), s.end(), token) != s.end()) return true;
  }
  return false;
}

TEST(Synthetic, SameSeedSameCorpus) {
  const auto config = schema();
  const auto a = generate_synthetic(config, 7);
  const auto b = generate_synthetic(config, 7);
  EXPECT_EQ(a, b);
  EXPECT_EQ(to_docred_json(a, config.inventory()), to_docred_json(b, config.inventory()));
  EXPECT_NE(a, generate_synthetic(config, 8));
  EXPECT_EQ(static_cast<Index>(a.size()), config.documents);
}

TEST(Synthetic, GoldIsExactlyTheRuleClosure) {
  const auto config = schema();
  Index composed = 0;
  for (const auto& doc : generate_synthetic(config, 11)) {
    validate(doc, config.inventory().size());
    std::set<Fact> gold;
    for (const auto& f : doc.labels) {
      EXPECT_TRUE(gold.emplace(f.head, f.tail, f.relation).second) << doc.doc_id << ": duplicate fact";
      if (f.is_reasoning) ++composed;
    }
    EXPECT_EQ(gold, closure(doc, config)) << doc.doc_id;
  }
  EXPECT_GT(composed, 0);
}

TEST(Synthetic, StatedFactsShareASentenceAndComposedOnesDoNot) {
  const auto config = schema();
  for (const auto& doc : generate_synthetic(config, 3)) {
    for (const auto& f : doc.labels) {
      if (f.is_reasoning) {
        EXPECT_TRUE(f.is_inter_sentence) << doc.doc_id;
        EXPECT_FALSE(f.evidence.empty());
      } else {
        EXPECT_TRUE(co_sentential(doc, f.head, f.tail)) << doc.doc_id;
      }
    }
  }
}

TEST(Synthetic, GatedFactsNeedTheirTrigger) {
  const auto config = schema();
  const Index gated = config.inventory().id("partner_of");
  Index without_trigger = 0;
  Index with_trigger = 0;
  for (const auto& doc : generate_synthetic(config, 5)) {
    const bool has = document_has(doc, "alliance");
    const bool stated = document_has(doc, "met");
    bool fact = false;
    for (const auto& f : doc.labels) fact = fact || f.relation == gated;
    if (!has) EXPECT_FALSE(fact) << doc.doc_id;
    if (stated && !has) ++without_trigger;
    if (has) {
      EXPECT_TRUE(fact) << doc.doc_id;
      ++with_trigger;
    }
  }
  EXPECT_GT(without_trigger, 0);
  EXPECT_GT(with_trigger, 0);
}

TEST(Synthetic, AliasMentionsUseDistinctNames) {
  const auto config = schema("alias_mentions = true\n");
  Index multi = 0;
  for (const auto& doc : generate_synthetic(config, 2)) {
    for (const auto& mentions : doc.entities) {
      std::set<std::string> names;
      for (const auto& m : mentions) names.insert(m.name);
      EXPECT_EQ(names.size(), mentions.size());
      if (mentions.size() > 1) ++multi;
    }
  }
  EXPECT_GT(multi, 0);
}

TEST(Synthetic, RejectsInconsistentSchemas) {
  const auto reject = [](const std::string& text) {
    EXPECT_THROW(SynthConfig::from_config(KeyValueConfig::parse(text)), ConfigError) << text;
  };
  const std::string base =
      "relation = a PER ORG | {h} x {t}\nrelation = b ORG LOC | {h} y {t}\nrelation = c PER LOC | {h} z {t}\n";
  reject(base + "rule = a b => c\n");                         // no gate
  reject(base + "gate = a trig\n");                           // no rule
  reject(base + "gate = a trig\nrule = b a => c\n");          // types do not chain
  reject(base + "gate = a trig\nrule = a b => zz\n");         // unknown relation
  reject(base + "gate = a x\nrule = a b => c\n");             // trigger inside a template
  reject(base + "relation = a PER ORG | {h} w {t}\ngate = a trig\nrule = a b => c\n");
  reject("relation = a PER ORG | {h} only\nrelation = b ORG LOC | {h} y {t}\n"
         "relation = c PER LOC | {h} z {t}\ngate = a trig\nrule = a b => c\n");
  reject(base + "gate = a trig\nrule = a b => c\nchains = 3 1\n");
  reject(base + "gate = a trig\nrule = a b => c\nmystery = 1\n");
  EXPECT_NO_THROW(SynthConfig::from_config(KeyValueConfig::parse(base + "gate = a trig\nrule = a b => c\n")));
}

TEST(Synthetic, ShippedConfigsValidate) {
  for (const char* name : {"synth_default.cfg", "synth_reasoning.cfg", "synth_clue.cfg"}) {
    const auto config = SynthConfig::load(std::string(NCDRE_CONFIG_DIR) + "/" + name);
    EXPECT_EQ(config.documents, 200) << name;
    const auto docs = generate_synthetic(config, 1);
    EXPECT_EQ(docs.size(), 200u);
    EXPECT_FALSE(describe_schema(config).empty());
  }
}

}  // namespace
}  // namespace ncdre
