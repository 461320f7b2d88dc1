#pragma once

#include "ncdre/corpus.hpp"
#include "ncdre/ops.hpp"

#include <array>
#include <string>
#include <vector>

namespace ncdre {

enum class NodeKind { Mention, Sentence, Document };

struct NodeIndex {
  NodeKind kind = NodeKind::Mention;
  Index ordinal = 0;  // position within its kind
  Index global = 0;   // row in X
};

/// Edge types, in mask order.
enum EdgeType : int {
  kIntraEntity = 0,
  kInterEntity = 1,
  kSentenceMention = 2,
  kSentenceOrder = 3,
  kSentenceDocument = 4,
  kFullyConnected = 5,
};

inline constexpr int kNumEdgeTypes = 6;

using EdgeMasks = std::array<Mask, kNumEdgeTypes>;

const char* edge_type_name(int type);

/// Node bookkeeping for one document: mentions in document order, then
/// sentences, then the document node.
struct HmgLayout {
  std::vector<NodeIndex> nodes;
  std::vector<MentionRef> mentions;     // per mention node
  std::vector<Index> mention_sentence;  // sentence of each mention node
  std::vector<std::vector<Index>> entity_rows;  // mention-node rows per entity
  Index num_sentences = 0;

  Index num_mentions() const { return static_cast<Index>(mentions.size()); }
  Index num_nodes() const { return num_mentions() + num_sentences + 1; }
  Index sentence_row(Index s) const { return num_mentions() + s; }
  Index document_row() const { return num_mentions() + num_sentences; }
};

HmgLayout make_layout(const Document& doc);

template <typename Scalar>
struct Hmg {
  Tensor<Scalar> X;  // nodes x d
  EdgeMasks E;
  HmgLayout layout;
};

/// Mention rows = H at the start markers, sentence rows = mean of H over the
/// sentence range, document row = H at position 0.
template <typename Scalar>
Tensor<Scalar> build_nodes(const MarkedDocument& marked, const HmgLayout& layout,
                           const Tensor<Scalar>& H);

/// Symmetric masks with self-loops on every node.
EdgeMasks build_masks(const HmgLayout& layout);

template <typename Scalar>
Hmg<Scalar> build_hmg(const Document& doc, const MarkedDocument& marked, const Tensor<Scalar>& H);

/// Text dump: one line per node kind, then each mask as rows of 0/1.
std::string dump_hmg(const HmgLayout& layout, const EdgeMasks& masks);

}  // namespace ncdre
