#include "ncdre/hmg.hpp"

#include <sstream>

namespace ncdre {

const char* edge_type_name(int type) {
  static constexpr const char* names[kNumEdgeTypes] = {
      "intra-entity", "inter-entity", "sentence-mention", "sentence-order", "sentence-document",
      "fully-connected"};
  return (type >= 0 && type < kNumEdgeTypes) ? names[type] : "unknown";
}

HmgLayout make_layout(const Document& doc) {
  HmgLayout layout;
  layout.mentions = mentions_in_document_order(doc);
  layout.num_sentences = static_cast<Index>(doc.sentences.size());
  layout.entity_rows.resize(doc.entities.size());
  Index row = 0;
  for (const auto& ref : layout.mentions) {
    const auto& m = doc.entities[ref.entity][ref.index];
    layout.mention_sentence.push_back(m.sentence_index);
    layout.entity_rows[ref.entity].push_back(row);
    layout.nodes.push_back({NodeKind::Mention, row, row});
    ++row;
  }
  for (Index s = 0; s < layout.num_sentences; ++s) {
    layout.nodes.push_back({NodeKind::Sentence, s, row++});
  }
  layout.nodes.push_back({NodeKind::Document, 0, row});
  return layout;
}

template <typename Scalar>
Tensor<Scalar> build_nodes(const MarkedDocument& marked, const HmgLayout& layout,
                           const Tensor<Scalar>& H) {
  if (H.rows() != marked.size()) {
    throw ShapeError("build_nodes: H has " + std::to_string(H.rows()) + " rows for " +
                     std::to_string(marked.size()) + " marked tokens");
  }
  std::vector<Tensor<Scalar>> parts;
  if (layout.num_mentions() > 0) {
    parts.push_back(gather_rows(H, std::span<const Index>(marked.mention_start_positions)));
  }
  for (Index s = 0; s < layout.num_sentences; ++s) {
    const auto [begin, end] = marked.sentence_token_ranges[static_cast<std::size_t>(s)];
    parts.push_back(mean_rows(slice_rows(H, begin, end - begin)));
  }
  parts.push_back(slice_rows(H, MarkedDocument::kClsPosition, 1));
  return concat_rows(parts);
}

EdgeMasks build_masks(const HmgLayout& layout) {
  const Index n = layout.num_nodes();
  const Index nm = layout.num_mentions();
  EdgeMasks E;
  for (auto& m : E) m = Mask::Identity(n, n);
  E[kFullyConnected].setOnes();
  const auto link = [&](int type, Index a, Index b) {
    E[type](a, b) = 1;
    E[type](b, a) = 1;
  };
  for (Index i = 0; i < nm; ++i) {
    for (Index j = i + 1; j < nm; ++j) {
      const bool same_entity = layout.mentions[i].entity == layout.mentions[j].entity;
      if (same_entity) {
        link(kIntraEntity, i, j);
      } else if (layout.mention_sentence[i] == layout.mention_sentence[j]) {
        link(kInterEntity, i, j);
      }
    }
    link(kSentenceMention, i, layout.sentence_row(layout.mention_sentence[i]));
  }
  for (Index s = 0; s < layout.num_sentences; ++s) {
    if (s + 1 < layout.num_sentences) link(kSentenceOrder, layout.sentence_row(s), layout.sentence_row(s + 1));
    link(kSentenceDocument, layout.sentence_row(s), layout.document_row());
  }
  return E;
}

template <typename Scalar>
Hmg<Scalar> build_hmg(const Document& doc, const MarkedDocument& marked, const Tensor<Scalar>& H) {
  Hmg<Scalar> g;
  g.layout = make_layout(doc);
  g.X = build_nodes(marked, g.layout, H);
  g.E = build_masks(g.layout);
  return g;
}

std::string dump_hmg(const HmgLayout& layout, const EdgeMasks& masks) {
  std::ostringstream os;
  os << "nodes " << layout.num_nodes() << "\n";
  for (const auto& node : layout.nodes) {
    switch (node.kind) {
      case NodeKind::Mention: {
        const auto& ref = layout.mentions[node.ordinal];
        os << node.global << " mention " << node.ordinal << " entity " << ref.entity << " sentence "
           << layout.mention_sentence[node.ordinal] << "\n";
        break;
      }
      case NodeKind::Sentence:
        os << node.global << " sentence " << node.ordinal << "\n";
        break;
      case NodeKind::Document:
        os << node.global << " document\n";
        break;
    }
  }
  for (int t = 0; t < kNumEdgeTypes; ++t) {
    os << "mask " << t + 1 << " " << edge_type_name(t) << "\n";
    for (Index i = 0; i < masks[t].rows(); ++i) {
      for (Index j = 0; j < masks[t].cols(); ++j) os << (j ? " " : "") << int(masks[t](i, j));
      os << "\n";
    }
  }
  return os.str();
}

#define NCDRE_INSTANTIATE_HMG(S)                                                              \
  template Tensor<S> build_nodes(const MarkedDocument&, const HmgLayout&, const Tensor<S>&);  \
  template Hmg<S> build_hmg(const Document&, const MarkedDocument&, const Tensor<S>&);

NCDRE_INSTANTIATE_HMG(double)
NCDRE_INSTANTIATE_HMG(float)

}  // namespace ncdre
