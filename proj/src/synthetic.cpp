#include "ncdre/synthetic.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

namespace ncdre {

namespace {

std::pair<Index, Index> parse_range(const KeyValueConfig& kv, const char* key, Index lo, Index hi) {
  auto v = kv.get(key);
  if (!v) return {lo, hi};
  const auto parts = split_whitespace(*v);
  try {
    if (parts.size() == 1) {
      const Index n = std::stoll(parts[0]);
      return {n, n};
    }
    if (parts.size() == 2) return {std::stoll(parts[0]), std::stoll(parts[1])};
  } catch (const std::exception&) {
  }
  throw ConfigError(kv.source() + ": key '" + key + "' expects 'min max' or a single integer");
}

Index uniform(std::mt19937_64& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

}  // namespace

SynthConfig SynthConfig::from_config(const KeyValueConfig& kv) {
  kv.require_known({"documents", "chains", "facts", "gated", "trigger_rate", "distractors",
                    "filler_words", "prefix_words", "name_pool", "filler_pool", "id_prefix",
                    "dev_documents", "test_documents", "alias_mentions",
                    "relation", "gate", "rule"});
  SynthConfig c;
  c.documents = kv.get_int("documents", c.documents);
  std::tie(c.min_chains, c.max_chains) = parse_range(kv, "chains", c.min_chains, c.max_chains);
  std::tie(c.min_facts, c.max_facts) = parse_range(kv, "facts", c.min_facts, c.max_facts);
  std::tie(c.min_gated, c.max_gated) = parse_range(kv, "gated", c.min_gated, c.max_gated);
  c.trigger_rate = kv.get_double("trigger_rate", c.trigger_rate);
  std::tie(c.min_distractors, c.max_distractors) =
      parse_range(kv, "distractors", c.min_distractors, c.max_distractors);
  std::tie(c.min_filler_words, c.max_filler_words) =
      parse_range(kv, "filler_words", c.min_filler_words, c.max_filler_words);
  c.max_prefix_words = kv.get_int("prefix_words", c.max_prefix_words);
  c.name_pool = kv.get_int("name_pool", c.name_pool);
  c.filler_pool = kv.get_int("filler_pool", c.filler_pool);
  c.id_prefix = kv.get_string("id_prefix", c.id_prefix);
  c.dev_documents = kv.get_int("dev_documents", c.dev_documents);
  c.test_documents = kv.get_int("test_documents", c.test_documents);
  c.alias_mentions = kv.get_bool("alias_mentions", c.alias_mentions);

  for (const auto& line : kv.get_all("relation")) {
    const auto parts = split(line, '|');
    const auto head = split_whitespace(parts[0]);
    if (head.size() != 3 || parts.size() < 2) {
      throw ConfigError(kv.source() + ": relation expects 'CODE HEAD_TYPE TAIL_TYPE | template ...', got '" +
                        line + "'");
    }
    SynthRelation r{head[0], head[1], head[2], {}, std::nullopt};
    for (std::size_t i = 1; i < parts.size(); ++i) r.templates.push_back(split_whitespace(parts[i]));
    c.relations.push_back(std::move(r));
  }
  for (const auto& line : kv.get_all("gate")) {
    const auto parts = split_whitespace(line);
    if (parts.size() != 2) throw ConfigError(kv.source() + ": gate expects 'CODE TRIGGER', got '" + line + "'");
    auto it = std::find_if(c.relations.begin(), c.relations.end(),
                           [&](const SynthRelation& r) { return r.code == parts[0]; });
    if (it == c.relations.end()) {
      throw ConfigError(kv.source() + ": gate references undefined relation '" + parts[0] + "'");
    }
    it->trigger = lowercase(parts[1]);
  }
  for (const auto& line : kv.get_all("rule")) {
    auto parts = split_whitespace(line);
    parts.erase(std::remove(parts.begin(), parts.end(), "=>"), parts.end());
    if (parts.size() != 3) {
      throw ConfigError(kv.source() + ": rule expects 'FIRST SECOND => RESULT', got '" + line + "'");
    }
    c.rules.push_back({parts[0], parts[1], parts[2]});
  }
  c.validate();
  return c;
}

SynthConfig SynthConfig::load(const std::filesystem::path& path) {
  return from_config(KeyValueConfig::load(path));
}

const SynthRelation& SynthConfig::relation(std::string_view code) const {
  for (const auto& r : relations) {
    if (r.code == code) return r;
  }
  throw ConfigError("inconsistent schema: undefined relation '" + std::string(code) + "'");
}

void SynthConfig::validate() const {
  const auto fail = [](const std::string& what) { throw ConfigError("inconsistent schema: " + what); };
  if (relations.empty()) fail("no relations defined");
  std::set<std::string> codes;
  std::set<std::string> template_words;
  for (const auto& r : relations) {
    if (!codes.insert(r.code).second) fail("relation '" + r.code + "' defined twice");
    if (r.templates.empty()) fail("relation '" + r.code + "' has no templates");
    for (const auto& t : r.templates) {
      if (std::count(t.begin(), t.end(), "{h}") != 1 || std::count(t.begin(), t.end(), "{t}") != 1) {
        fail("every template of '" + r.code + "' needs exactly one {h} and one {t}");
      }
      for (const auto& w : t) template_words.insert(lowercase(w));
    }
  }
  bool any_gate = false;
  for (const auto& r : relations) {
    if (!r.trigger) continue;
    any_gate = true;
    if (template_words.count(*r.trigger)) {
      fail("trigger '" + *r.trigger + "' of '" + r.code + "' also appears in a template");
    }
  }
  if (!any_gate) fail("at least one clue-gated relation (gate = CODE TRIGGER) is required");
  if (rules.empty()) fail("at least one composition rule is required");
  for (const auto& rule : rules) {
    for (const auto* code : {&rule.first, &rule.second, &rule.result}) {
      if (!codes.count(*code)) fail("rule references undefined relation '" + *code + "'");
    }
    const auto& a = relation(rule.first);
    const auto& b = relation(rule.second);
    const auto& r = relation(rule.result);
    if (a.tail_type != b.head_type || r.head_type != a.head_type || r.tail_type != b.tail_type) {
      fail("rule " + rule.first + " o " + rule.second + " => " + rule.result + " is not type-consistent");
    }
  }
  const auto check_range = [&](Index lo, Index hi, const char* what) {
    if (lo < 0 || hi < lo) fail(std::string("bad range for ") + what);
  };
  check_range(min_chains, max_chains, "chains");
  check_range(min_facts, max_facts, "facts");
  check_range(min_gated, max_gated, "gated");
  check_range(min_distractors, max_distractors, "distractors");
  check_range(min_filler_words, max_filler_words, "filler_words");
  if (documents < 0 || dev_documents < 0 || test_documents < 0) fail("document counts must be >= 0");
  if (trigger_rate < 0 || trigger_rate > 1) fail("trigger_rate must lie in [0, 1]");
  if (name_pool < 1 || filler_pool < 1) fail("name_pool and filler_pool must be positive");
  bool any_plain = false;
  for (const auto& r : relations) any_plain = any_plain || !r.trigger;
  if (max_facts > 0 && !any_plain) fail("facts requested but every relation is gated");
}

RelationInventory SynthConfig::inventory() const {
  std::vector<std::string> codes;
  for (const auto& r : relations) codes.push_back(r.code);
  return RelationInventory(std::move(codes));
}

std::string describe_schema(const SynthConfig& config) {
  std::ostringstream os;
  for (const auto& r : config.relations) {
    os << "relation " << r.code << " " << r.head_type << " -> " << r.tail_type;
    if (r.trigger) os << " gated-by " << *r.trigger;
    os << "\n";
    for (const auto& t : r.templates) {
      os << "  template";
      for (const auto& w : t) os << ' ' << w;
      os << "\n";
    }
  }
  for (const auto& rule : config.rules) {
    os << "rule " << rule.first << " o " << rule.second << " => " << rule.result << "\n";
  }
  return os.str();
}

namespace {

struct Statement {
  Index relation;
  Index head;
  Index tail;
};

struct Sentence {
  std::vector<std::string> tokens;
  Index statement = -1;  // -1 for distractors
  Index head_pos = -1;
  Index tail_pos = -1;
};

Document generate_one(const SynthConfig& cfg, const RelationInventory& inv, std::uint64_t seed,
                      Index doc_index, std::mt19937_64& rng) {
  std::vector<std::pair<std::string, std::string>> entities;  // (type, name)
  std::set<std::string> used_names;
  const auto fresh_name = [&](const std::string& type) {
    const std::string stem = lowercase(type);
    std::string name;
    do {
      name = stem + std::to_string(uniform(rng, 0, cfg.name_pool - 1));
    } while (used_names.count(name) && used_names.size() < static_cast<std::size_t>(cfg.name_pool));
    used_names.insert(name);
    return name;
  };
  const auto new_entity = [&](const std::string& type) {
    entities.emplace_back(type, fresh_name(type));
    return static_cast<Index>(entities.size() - 1);
  };

  std::vector<Statement> statements;
  const Index chains = uniform(rng, cfg.min_chains, cfg.max_chains);
  for (Index c = 0; c < chains; ++c) {
    const auto& rule = cfg.rules[uniform(rng, 0, static_cast<Index>(cfg.rules.size()) - 1)];
    const auto& first = cfg.relation(rule.first);
    const auto& second = cfg.relation(rule.second);
    const Index a = new_entity(first.head_type);
    const Index b = new_entity(first.tail_type);
    const Index z = new_entity(second.tail_type);
    statements.push_back({inv.id(rule.first), a, b});
    statements.push_back({inv.id(rule.second), b, z});
  }

  std::vector<Index> plain;
  std::vector<Index> gated;
  for (Index r = 0; r < static_cast<Index>(cfg.relations.size()); ++r) {
    (cfg.relations[r].trigger ? gated : plain).push_back(r);
  }
  const Index facts = plain.empty() ? 0 : uniform(rng, cfg.min_facts, cfg.max_facts);
  for (Index i = 0; i < facts; ++i) {
    const Index r = plain[uniform(rng, 0, static_cast<Index>(plain.size()) - 1)];
    const Index h = new_entity(cfg.relations[r].head_type);
    const Index t = new_entity(cfg.relations[r].tail_type);
    statements.push_back({r, h, t});
  }
  const Index gated_count = gated.empty() ? 0 : uniform(rng, cfg.min_gated, cfg.max_gated);
  for (Index i = 0; i < gated_count; ++i) {
    const Index r = gated[uniform(rng, 0, static_cast<Index>(gated.size()) - 1)];
    const Index h = new_entity(cfg.relations[r].head_type);
    const Index t = new_entity(cfg.relations[r].tail_type);
    statements.push_back({r, h, t});
  }

  // Triggers are drawn only for gated relations that have a stated pair.
  std::set<std::string> triggers;
  for (Index r : gated) {
    const bool stated = std::any_of(statements.begin(), statements.end(),
                                    [&](const Statement& s) { return s.relation == r; });
    if (!stated) continue;
    if (std::bernoulli_distribution(cfg.trigger_rate)(rng)) triggers.insert(*cfg.relations[r].trigger);
  }

  const auto filler = [&]() { return "w" + std::to_string(uniform(rng, 0, cfg.filler_pool - 1)); };

  std::vector<Index> uses(entities.size(), 0);
  const auto surface = [&](Index ent) {
    const bool alias = cfg.alias_mentions && uses[ent]++ > 0;
    return alias ? fresh_name(entities[ent].first) : entities[ent].second;
  };

  std::vector<Sentence> sentences;
  for (std::size_t k = 0; k < statements.size(); ++k) {
    const auto& st = statements[k];
    const auto& rel = cfg.relations[st.relation];
    const auto& tmpl = rel.templates[uniform(rng, 0, static_cast<Index>(rel.templates.size()) - 1)];
    Sentence s;
    s.statement = static_cast<Index>(k);
    const Index prefix = uniform(rng, 0, cfg.max_prefix_words);
    for (Index i = 0; i < prefix; ++i) s.tokens.push_back(filler());
    for (const auto& w : tmpl) {
      if (w == "{h}") {
        s.head_pos = static_cast<Index>(s.tokens.size());
        s.tokens.push_back(surface(st.head));
      } else if (w == "{t}") {
        s.tail_pos = static_cast<Index>(s.tokens.size());
        s.tokens.push_back(surface(st.tail));
      } else {
        s.tokens.push_back(lowercase(w));
      }
    }
    s.tokens.push_back(".");
    sentences.push_back(std::move(s));
  }
  Index distractors = uniform(rng, cfg.min_distractors, cfg.max_distractors);
  if (!triggers.empty() && distractors == 0) distractors = 1;
  const std::size_t first_distractor = sentences.size();
  for (Index i = 0; i < distractors; ++i) {
    Sentence s;
    const Index n = uniform(rng, cfg.min_filler_words, cfg.max_filler_words);
    for (Index w = 0; w < n; ++w) s.tokens.push_back(filler());
    s.tokens.push_back(".");
    sentences.push_back(std::move(s));
  }
  for (const auto& trig : triggers) {
    auto& s = sentences[first_distractor +
                        static_cast<std::size_t>(uniform(rng, 0, distractors - 1))];
    const Index at = uniform(rng, 0, static_cast<Index>(s.tokens.size()) - 1);
    s.tokens.insert(s.tokens.begin() + at, trig);
  }
  std::shuffle(sentences.begin(), sentences.end(), rng);

  Document doc;
  doc.doc_id = cfg.id_prefix + "-" + std::to_string(seed) + "-" + std::to_string(doc_index);
  doc.entities.resize(entities.size());
  std::vector<Index> statement_sentence(statements.size(), -1);
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto& sent = sentences[s];
    if (sent.statement >= 0) {
      const auto& st = statements[sent.statement];
      statement_sentence[sent.statement] = static_cast<Index>(s);
      for (auto [ent, pos] : {std::pair{st.head, sent.head_pos}, std::pair{st.tail, sent.tail_pos}}) {
        doc.entities[ent].push_back({ent, static_cast<Index>(s), pos, pos + 1, entities[ent].first,
                                     sent.tokens[static_cast<std::size_t>(pos)]});
      }
    }
    doc.sentences.push_back(sent.tokens);
  }
  for (auto& group : doc.entities) {
    std::sort(group.begin(), group.end(), [](const Mention& a, const Mention& b) {
      return std::tie(a.sentence_index, a.start) < std::tie(b.sentence_index, b.start);
    });
  }

  // Stated facts, then closure under the rules.
  std::map<std::tuple<Index, Index, Index>, std::size_t> index;
  const auto add_fact = [&](Index h, Index t, Index r, bool reasoning, std::vector<Index> evidence) {
    const auto key = std::make_tuple(h, t, r);
    if (index.count(key)) return false;
    std::sort(evidence.begin(), evidence.end());
    evidence.erase(std::unique(evidence.begin(), evidence.end()), evidence.end());
    index.emplace(key, doc.labels.size());
    doc.labels.push_back({h, t, r, false, reasoning, std::move(evidence)});
    return true;
  };
  for (std::size_t k = 0; k < statements.size(); ++k) {
    const auto& st = statements[k];
    const auto& rel = cfg.relations[st.relation];
    if (rel.trigger && !triggers.count(*rel.trigger)) continue;
    add_fact(st.head, st.tail, st.relation, false, {statement_sentence[k]});
  }
  bool grew = true;
  while (grew) {
    grew = false;
    const auto snapshot = doc.labels;
    for (const auto& rule : cfg.rules) {
      const Index r1 = inv.id(rule.first);
      const Index r2 = inv.id(rule.second);
      const Index r3 = inv.id(rule.result);
      for (const auto& f : snapshot) {
        if (f.relation != r1) continue;
        for (const auto& g : snapshot) {
          if (g.relation != r2 || g.head != f.tail || g.tail == f.head) continue;
          auto evidence = f.evidence;
          evidence.insert(evidence.end(), g.evidence.begin(), g.evidence.end());
          grew = add_fact(f.head, g.tail, r3, true, std::move(evidence)) || grew;
        }
      }
    }
  }
  annotate_inter_sentence(doc);
  return doc;
}

}  // namespace

std::vector<Document> generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  const auto inv = config.inventory();
  std::mt19937_64 rng(seed);
  std::vector<Document> docs;
  docs.reserve(static_cast<std::size_t>(config.documents));
  for (Index d = 0; d < config.documents; ++d) docs.push_back(generate_one(config, inv, seed, d, rng));
  return docs;
}

}  // namespace ncdre
