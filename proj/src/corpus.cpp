#include "ncdre/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace ncdre {

Index Document::token_count() const {
  Index n = 0;
  for (const auto& s : sentences) n += static_cast<Index>(s.size());
  return n;
}

bool co_sentential(const Document& doc, Index a, Index b) {
  for (const auto& ma : doc.entities.at(static_cast<std::size_t>(a))) {
    for (const auto& mb : doc.entities.at(static_cast<std::size_t>(b))) {
      if (ma.sentence_index == mb.sentence_index) return true;
    }
  }
  return false;
}

void annotate_inter_sentence(Document& doc) {
  for (auto& fact : doc.labels) fact.is_inter_sentence = !co_sentential(doc, fact.head, fact.tail);
}

void validate(const Document& doc, Index num_relations) {
  const auto where = [&](const std::string& what) {
    return CorpusError("document '" + doc.doc_id + "': " + what);
  };
  const Index sentences = static_cast<Index>(doc.sentences.size());
  for (std::size_t e = 0; e < doc.entities.size(); ++e) {
    if (doc.entities[e].empty()) throw where("entity " + std::to_string(e) + " has no mentions");
    for (const auto& m : doc.entities[e]) {
      if (m.entity_id != static_cast<Index>(e)) {
        throw where("mention of entity " + std::to_string(e) + " carries entity_id " +
                    std::to_string(m.entity_id));
      }
      if (m.sentence_index < 0 || m.sentence_index >= sentences) {
        throw where("mention sentence " + std::to_string(m.sentence_index) + " out of range");
      }
      const Index len = static_cast<Index>(doc.sentences[m.sentence_index].size());
      if (m.start < 0 || m.end <= m.start) {
        throw where("empty or negative mention span [" + std::to_string(m.start) + ", " +
                    std::to_string(m.end) + ")");
      }
      if (m.end > len) {
        throw where("mention span [" + std::to_string(m.start) + ", " + std::to_string(m.end) +
                    ") crosses the end of sentence " + std::to_string(m.sentence_index) +
                    " (length " + std::to_string(len) + "); cross-sentence mentions are unsupported");
      }
    }
  }
  for (const auto& f : doc.labels) {
    if (f.head < 0 || f.head >= doc.num_entities() || f.tail < 0 ||
        f.tail >= doc.num_entities()) {
      throw where("label references missing entity (" + std::to_string(f.head) + ", " +
                  std::to_string(f.tail) + ")");
    }
    if (f.head == f.tail) throw where("label with head == tail");
    if (f.relation < 0 || f.relation >= num_relations) {
      throw where("relation index " + std::to_string(f.relation) + " out of range");
    }
  }
}

std::vector<MentionRef> mentions_in_document_order(const Document& doc) {
  std::vector<MentionRef> refs;
  for (std::size_t e = 0; e < doc.entities.size(); ++e) {
    for (std::size_t i = 0; i < doc.entities[e].size(); ++i) {
      refs.push_back({static_cast<Index>(e), static_cast<Index>(i)});
    }
  }
  const auto& ents = doc.entities;
  std::stable_sort(refs.begin(), refs.end(), [&](const MentionRef& x, const MentionRef& y) {
    const auto& a = ents[x.entity][x.index];
    const auto& b = ents[y.entity][y.index];
    if (a.sentence_index != b.sentence_index) return a.sentence_index < b.sentence_index;
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end > b.end;
    return x.entity < y.entity;
  });
  return refs;
}

// RelationInventory ---------------------------------------------------------

RelationInventory::RelationInventory(std::vector<std::string> codes,
                                     std::vector<std::string> descriptions)
    : codes_(std::move(codes)), descriptions_(std::move(descriptions)) {
  if (descriptions_.empty()) descriptions_ = codes_;
  if (descriptions_.size() != codes_.size()) {
    throw CorpusError("relation inventory: descriptions do not match codes");
  }
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    if (!index_.emplace(codes_[i], static_cast<Index>(i)).second) {
      throw CorpusError("relation inventory: duplicate code " + codes_[i]);
    }
  }
}

std::optional<Index> RelationInventory::find(std::string_view code) const {
  auto it = index_.find(std::string(code));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Index RelationInventory::id(std::string_view code) const {
  if (auto id = find(code)) return *id;
  throw CorpusError("unknown relation: " + std::string(code));
}

RelationInventory RelationInventory::docred() {
  static const std::vector<std::pair<const char*, const char*>> kDocred = {
      {"P6", "head of government"},
      {"P17", "country"},
      {"P19", "place of birth"},
      {"P20", "place of death"},
      {"P22", "father"},
      {"P25", "mother"},
      {"P26", "spouse"},
      {"P27", "country of citizenship"},
      {"P30", "continent"},
      {"P31", "instance of"},
      {"P35", "head of state"},
      {"P36", "capital"},
      {"P37", "official language"},
      {"P39", "position held"},
      {"P40", "child"},
      {"P50", "author"},
      {"P54", "member of sports team"},
      {"P57", "director"},
      {"P58", "screenwriter"},
      {"P69", "educated at"},
      {"P86", "composer"},
      {"P102", "member of political party"},
      {"P108", "employer"},
      {"P112", "founded by"},
      {"P118", "league"},
      {"P123", "publisher"},
      {"P127", "owned by"},
      {"P131", "located in the administrative territorial entity"},
      {"P136", "genre"},
      {"P137", "operator"},
      {"P140", "religion"},
      {"P150", "contains administrative territorial entity"},
      {"P155", "follows"},
      {"P156", "followed by"},
      {"P159", "headquarters location"},
      {"P161", "cast member"},
      {"P162", "producer"},
      {"P166", "award received"},
      {"P170", "creator"},
      {"P171", "parent taxon"},
      {"P172", "ethnic group"},
      {"P175", "performer"},
      {"P176", "manufacturer"},
      {"P178", "developer"},
      {"P179", "series"},
      {"P190", "sister city"},
      {"P194", "legislative body"},
      {"P205", "basin country"},
      {"P206", "located in or next to body of water"},
      {"P241", "military branch"},
      {"P264", "record label"},
      {"P272", "production company"},
      {"P276", "location"},
      {"P279", "subclass of"},
      {"P355", "subsidiary"},
      {"P361", "part of"},
      {"P364", "original language of work"},
      {"P400", "platform"},
      {"P403", "mouth of the watercourse"},
      {"P449", "original network"},
      {"P463", "member of"},
      {"P488", "chairperson"},
      {"P495", "country of origin"},
      {"P527", "has part"},
      {"P551", "residence"},
      {"P569", "date of birth"},
      {"P570", "date of death"},
      {"P571", "inception"},
      {"P576", "dissolved, abolished or demolished"},
      {"P577", "publication date"},
      {"P580", "start time"},
      {"P582", "end time"},
      {"P585", "point in time"},
      {"P607", "conflict"},
      {"P674", "characters"},
      {"P676", "lyrics by"},
      {"P706", "located on terrain feature"},
      {"P710", "participant"},
      {"P737", "influenced by"},
      {"P740", "location of formation"},
      {"P749", "parent organization"},
      {"P800", "notable work"},
      {"P807", "separated from"},
      {"P840", "narrative location"},
      {"P937", "work location"},
      {"P1001", "applies to jurisdiction"},
      {"P1056", "product or material produced"},
      {"P1198", "unemployment rate"},
      {"P1336", "territory claimed by"},
      {"P1344", "participant of"},
      {"P1365", "replaces"},
      {"P1366", "replaced by"},
      {"P1376", "capital of"},
      {"P1412", "languages spoken, written or signed"},
      {"P1441", "present in work"},
      {"P3373", "sibling"},
  };
  std::vector<std::string> codes;
  std::vector<std::string> names;
  for (const auto& [code, name] : kDocred) {
    codes.emplace_back(code);
    names.emplace_back(name);
  }
  return RelationInventory(std::move(codes), std::move(names));
}

// Vocabulary ----------------------------------------------------------------

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Vocabulary::Vocabulary() {
  texts_ = {"[PAD]", "[UNK]", "[DOC]"};
  marker_ = {0, 0, 0};
}

Index Vocabulary::add_token(std::string_view token) {
  auto key = lowercase(token);
  if (auto it = tokens_.find(key); it != tokens_.end()) return it->second;
  const Index id = size();
  tokens_.emplace(key, id);
  texts_.push_back(std::move(key));
  marker_.push_back(0);
  return id;
}

void Vocabulary::add_entity_type(std::string_view type) {
  const std::string key(type);
  if (markers_.count(key)) return;
  const Index start = size();
  texts_.push_back("<" + key + ">");
  texts_.push_back("</" + key + ">");
  marker_.push_back(1);
  marker_.push_back(1);
  markers_.emplace(key, std::make_pair(start, start + 1));
  types_.push_back(key);
}

Index Vocabulary::token_id(std::string_view token) const {
  auto it = tokens_.find(lowercase(token));
  return it == tokens_.end() ? kUnk : it->second;
}

bool Vocabulary::has_token(std::string_view token) const {
  return tokens_.count(lowercase(token)) != 0;
}

Index Vocabulary::start_marker(std::string_view type) const {
  auto it = markers_.find(std::string(type));
  if (it == markers_.end()) throw CorpusError("vocabulary has no marker for entity type " + std::string(type));
  return it->second.first;
}

Index Vocabulary::end_marker(std::string_view type) const {
  auto it = markers_.find(std::string(type));
  if (it == markers_.end()) throw CorpusError("vocabulary has no marker for entity type " + std::string(type));
  return it->second.second;
}

bool Vocabulary::has_entity_type(std::string_view type) const {
  return markers_.count(std::string(type)) != 0;
}

bool Vocabulary::is_marker(Index id) const {
  return id >= 0 && id < size() && marker_[static_cast<std::size_t>(id)] != 0;
}

std::string Vocabulary::to_json() const {
  nlohmann::ordered_json j;
  // Tokens and markers in id order; markers are tagged so ids reproduce.
  auto entries = nlohmann::ordered_json::array();
  std::map<Index, std::string> marker_type;
  for (const auto& [type, ids] : markers_) marker_type[ids.first] = type;
  for (Index id = 3; id < size(); ++id) {
    if (auto it = marker_type.find(id); it != marker_type.end()) {
      entries.push_back({{"type", it->second}});
      ++id;  // end marker follows its start marker
    } else {
      entries.push_back(texts_[static_cast<std::size_t>(id)]);
    }
  }
  j["entries"] = entries;
  auto rels = nlohmann::ordered_json::object();
  for (Index r = 0; r < relations_.size(); ++r) rels[relations_.code(r)] = relations_.description(r);
  j["relations"] = rels;
  return j.dump();
}

Vocabulary Vocabulary::from_json(std::string_view text) {
  const auto j = nlohmann::ordered_json::parse(text);
  Vocabulary v;
  for (const auto& e : j.at("entries")) {
    if (e.is_object()) {
      v.add_entity_type(e.at("type").get<std::string>());
    } else {
      v.add_token(e.get<std::string>());
    }
  }
  std::vector<std::string> codes;
  std::vector<std::string> names;
  for (const auto& [code, name] : j.at("relations").items()) {
    codes.push_back(code);
    names.push_back(name.get<std::string>());
  }
  v.set_relations(RelationInventory(std::move(codes), std::move(names)));
  return v;
}

Vocabulary build_vocab(const std::vector<Document>& docs, RelationInventory relations,
                       Index min_frequency) {
  Vocabulary vocab;
  std::set<std::string> types;
  for (const auto& doc : docs) {
    for (const auto& ent : doc.entities) {
      for (const auto& m : ent) types.insert(m.entity_type);
    }
  }
  for (const auto& t : types) vocab.add_entity_type(t);

  // First-occurrence order keeps ids stable for a fixed corpus.
  std::unordered_map<std::string, Index> counts;
  std::vector<std::string> order;
  for (const auto& doc : docs) {
    for (const auto& sent : doc.sentences) {
      for (const auto& tok : sent) {
        auto key = lowercase(tok);
        auto [it, inserted] = counts.emplace(key, 0);
        if (inserted) order.push_back(key);
        ++it->second;
      }
    }
  }
  for (const auto& tok : order) {
    if (counts[tok] >= min_frequency) vocab.add_token(tok);
  }
  vocab.set_relations(std::move(relations));
  return vocab;
}

// Marking -------------------------------------------------------------------

MarkedDocument mark_document(const Document& doc, const Vocabulary& vocab) {
  validate(doc, std::numeric_limits<Index>::max());
  MarkedDocument out;
  out.mentions = mentions_in_document_order(doc);
  out.mention_start_positions.assign(out.mentions.size(), -1);

  const auto push = [&](Index id, std::string text, bool marker, bool in_mention) {
    out.tokens.push_back(id);
    out.surface.push_back(std::move(text));
    out.is_marker.push_back(marker ? 1 : 0);
    out.in_mention.push_back(in_mention ? 1 : 0);
  };
  push(Vocabulary::kDoc, vocab.text(Vocabulary::kDoc), false, false);

  // Mentions grouped per sentence, already in open order.
  std::vector<std::vector<std::size_t>> by_sentence(doc.sentences.size());
  for (std::size_t k = 0; k < out.mentions.size(); ++k) {
    const auto& m = doc.entities[out.mentions[k].entity][out.mentions[k].index];
    by_sentence[static_cast<std::size_t>(m.sentence_index)].push_back(k);
  }

  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const Index sentence_begin = out.size();
    const auto& sent = doc.sentences[s];
    const auto& ms = by_sentence[s];
    for (std::size_t t = 0; t < sent.size(); ++t) {
      const Index pos = static_cast<Index>(t);
      bool covered = false;
      for (std::size_t k : ms) {
        const auto& m = doc.entities[out.mentions[k].entity][out.mentions[k].index];
        if (m.start == pos) {
          out.mention_start_positions[k] = out.size();
          push(vocab.start_marker(m.entity_type), "<" + m.entity_type + ">", true, false);
        }
        if (m.start <= pos && pos < m.end) covered = true;
      }
      push(vocab.token_id(sent[t]), sent[t], false, covered);
      // Close in reverse open order so nesting stays balanced.
      for (auto it = ms.rbegin(); it != ms.rend(); ++it) {
        const auto& m = doc.entities[out.mentions[*it].entity][out.mentions[*it].index];
        if (m.end == pos + 1) {
          push(vocab.end_marker(m.entity_type), "</" + m.entity_type + ">", true, false);
        }
      }
    }
    out.sentence_token_ranges.emplace_back(sentence_begin, out.size());
  }
  return out;
}

}  // namespace ncdre
