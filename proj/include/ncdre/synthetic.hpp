#pragma once

#include "ncdre/config.hpp"
#include "ncdre/corpus.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ncdre {

/// A relation the generator can state in a sentence.
struct SynthRelation {
  std::string code;
  std::string head_type;
  std::string tail_type;
  /// Whitespace-tokenized templates containing the placeholders {h} and {t}.
  std::vector<std::vector<std::string>> templates;
  /// When set, a stated pair only becomes a fact if this token appears
  /// somewhere in the document.
  std::optional<std::string> trigger;
};

/// first(a, b) and second(b, c) imply result(a, c).
struct SynthRule {
  std::string first;
  std::string second;
  std::string result;
};

/// Generator settings. See docs/synthetic.md for the file syntax.
struct SynthConfig {
  Index documents = 200;
  /// Sizes of the held-out splits written next to the training split.
  Index dev_documents = 50;
  Index test_documents = 0;
  Index min_chains = 1;
  Index max_chains = 2;
  Index min_facts = 2;
  Index max_facts = 4;
  Index min_gated = 0;
  Index max_gated = 2;
  double trigger_rate = 0.5;
  Index min_distractors = 1;
  Index max_distractors = 3;
  Index min_filler_words = 3;
  Index max_filler_words = 6;
  Index max_prefix_words = 2;
  Index name_pool = 200;
  Index filler_pool = 60;
  std::string id_prefix = "synth";
  /// Every mention of an entity gets its own surface name, so repeated
  /// mentions are linked only through the entity grouping.
  bool alias_mentions = false;
  std::vector<SynthRelation> relations;
  std::vector<SynthRule> rules;

  static SynthConfig from_config(const KeyValueConfig& kv);
  static SynthConfig load(const std::filesystem::path& path);

  /// Throws ConfigError on inconsistent schemas: rules naming undefined
  /// relations, type-incompatible rules, missing rule or gated relation,
  /// triggers colliding with template words.
  void validate() const;

  RelationInventory inventory() const;
  const SynthRelation& relation(std::string_view code) const;
};

/// Deterministic corpus for a fixed (config, seed). Gold facts are the
/// closure of the stated facts under the rules; composed facts carry
/// is_reasoning.
std::vector<Document> generate_synthetic(const SynthConfig& config, std::uint64_t seed);

/// Text manifest of the planted schema (relations, templates, gates, rules).
std::string describe_schema(const SynthConfig& config);

}  // namespace ncdre
