#pragma once

#include "ncdre/tensor.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ncdre {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One textual occurrence of an entity. token span is [start, end) within
/// its sentence.
struct Mention {
  Index entity_id = 0;
  Index sentence_index = 0;
  Index start = 0;
  Index end = 0;
  std::string entity_type;
  std::string name;

  bool operator==(const Mention&) const = default;
};

struct RelationFact {
  Index head = 0;
  Index tail = 0;
  Index relation = 0;
  /// True when no sentence holds mentions of both entities.
  bool is_inter_sentence = false;
  /// Fact obtained by composing other facts (synthetic corpora only).
  bool is_reasoning = false;
  std::vector<Index> evidence;

  bool operator==(const RelationFact&) const = default;
};

struct Document {
  std::string doc_id;
  std::vector<std::vector<std::string>> sentences;
  /// entities[i] lists the mentions of entity i.
  std::vector<std::vector<Mention>> entities;
  std::vector<RelationFact> labels;

  Index num_entities() const { return static_cast<Index>(entities.size()); }
  Index token_count() const;
  const std::string& entity_type(Index entity) const { return entities.at(entity).front().entity_type; }

  bool operator==(const Document&) const = default;
};

/// Whether some sentence contains a mention of both entities.
bool co_sentential(const Document& doc, Index a, Index b);

/// Recomputes is_inter_sentence on every label.
void annotate_inter_sentence(Document& doc);

/// Checks mention spans, entity references and label indices.
void validate(const Document& doc, Index num_relations);

/// Position of a mention inside Document::entities.
struct MentionRef {
  Index entity = 0;
  Index index = 0;
};

/// Mentions in document order: sentence, start, longer span first, entity.
std::vector<MentionRef> mentions_in_document_order(const Document& doc);

/// Relation code list, e.g. DocRED's P-codes. Ids are positions in the list.
class RelationInventory {
 public:
  RelationInventory() = default;
  explicit RelationInventory(std::vector<std::string> codes,
                             std::vector<std::string> descriptions = {});

  /// The 96 DocRED relation codes.
  static RelationInventory docred();

  Index size() const { return static_cast<Index>(codes_.size()); }
  std::optional<Index> find(std::string_view code) const;
  /// Throws CorpusError for unknown codes.
  Index id(std::string_view code) const;
  const std::string& code(Index id) const { return codes_.at(static_cast<std::size_t>(id)); }
  const std::string& description(Index id) const {
    return descriptions_.at(static_cast<std::size_t>(id));
  }
  const std::vector<std::string>& codes() const { return codes_; }

  bool operator==(const RelationInventory& other) const { return codes_ == other.codes_; }

 private:
  std::vector<std::string> codes_;
  std::vector<std::string> descriptions_;
  std::unordered_map<std::string, Index> index_;
};

/// Token, marker and relation ids. Entity markers live in their own id range
/// and are never produced by corpus-token lookup.
class Vocabulary {
 public:
  static constexpr Index kPad = 0;
  static constexpr Index kUnk = 1;
  static constexpr Index kDoc = 2;

  Vocabulary();

  Index add_token(std::string_view token);
  void add_entity_type(std::string_view type);

  /// Lowercased lookup; unknown tokens map to kUnk.
  Index token_id(std::string_view token) const;
  bool has_token(std::string_view token) const;
  Index start_marker(std::string_view type) const;
  Index end_marker(std::string_view type) const;
  bool has_entity_type(std::string_view type) const;
  bool is_marker(Index id) const;
  const std::string& text(Index id) const { return texts_.at(static_cast<std::size_t>(id)); }

  Index size() const { return static_cast<Index>(texts_.size()); }
  const std::vector<std::string>& entity_types() const { return types_; }

  void set_relations(RelationInventory relations) { relations_ = std::move(relations); }
  const RelationInventory& relations() const { return relations_; }
  Index num_relations() const { return relations_.size(); }
  /// Threshold pseudo-class, appended after the real relations.
  Index th_id() const { return relations_.size(); }
  Index num_classes() const { return relations_.size() + 1; }

  std::string to_json() const;
  static Vocabulary from_json(std::string_view text);

  bool operator==(const Vocabulary& other) const {
    return texts_ == other.texts_ && types_ == other.types_ && relations_ == other.relations_;
  }

 private:
  std::vector<std::string> texts_;
  std::vector<char> marker_;
  std::unordered_map<std::string, Index> tokens_;
  std::vector<std::string> types_;
  std::unordered_map<std::string, std::pair<Index, Index>> markers_;
  RelationInventory relations_;
};

std::string lowercase(std::string_view s);

/// Vocabulary over every corpus token seen at least min_frequency times,
/// markers for every entity type, and the given relation inventory.
Vocabulary build_vocab(const std::vector<Document>& docs, RelationInventory relations,
                       Index min_frequency = 1);

/// Token sequence with typed entity markers and a leading document token.
struct MarkedDocument {
  static constexpr Index kClsPosition = 0;

  std::vector<Index> tokens;
  std::vector<std::string> surface;  // token text, markers rendered as <T> / </T>
  std::vector<char> is_marker;
  std::vector<char> in_mention;      // original token lying inside some mention span
  std::vector<MentionRef> mentions;  // document order
  std::vector<Index> mention_start_positions;
  std::vector<std::pair<Index, Index>> sentence_token_ranges;  // half-open

  Index size() const { return static_cast<Index>(tokens.size()); }
};

/// Inserts <T> before and </T> after every mention. Mentions starting at the
/// same token open outer (longer) first and close inner first.
MarkedDocument mark_document(const Document& doc, const Vocabulary& vocab);

// DocRED JSON ---------------------------------------------------------------

/// Parses a DocRED array-of-documents file. Relation codes map through
/// `relations`; records without "labels" load as unlabeled.
std::vector<Document> load_docred(const std::filesystem::path& path,
                                  const RelationInventory& relations);
std::vector<Document> parse_docred(std::string_view json_text, const RelationInventory& relations,
                                   const std::string& source = "<memory>");

std::string to_docred_json(const std::vector<Document>& docs, const RelationInventory& relations);
void save_docred(const std::filesystem::path& path, const std::vector<Document>& docs,
                 const RelationInventory& relations);

/// rel_info.json style object {code: description}, insertion ordered.
RelationInventory load_rel_info(const std::filesystem::path& path);
void save_rel_info(const std::filesystem::path& path, const RelationInventory& relations);

}  // namespace ncdre
