#pragma once

#include "ncdre/corpus.hpp"
#include "ncdre/head.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace ncdre {

struct SliceCounts {
  Index tp = 0;
  Index fp = 0;
  Index fn = 0;

  Index predicted() const { return tp + fp; }
  Index gold() const { return tp + fn; }
  double precision() const;
  double recall() const;
  double f1() const;
};

/// 2PR / (P + R), 0 when both are 0.
double f1_from(double precision, double recall);

/// Ign-F1: precision drops correct predictions whose fact also appears in
/// the training set; recall is unchanged.
struct IgnScore {
  Index tp_in_train = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct EvalReport {
  SliceCounts overall;
  SliceCounts intra;
  SliceCounts inter;
  std::optional<SliceCounts> infer;
  std::optional<IgnScore> ign;
  std::map<std::string, SliceCounts> per_relation;
  Index duplicates = 0;
  std::vector<std::string> warnings;

  std::string to_text() const;
  std::string to_json() const;
};

/// (head mention name, tail mention name, relation code) over every mention
/// pairing of every training fact.
using TrainFacts = std::set<std::tuple<std::string, std::string, std::string>>;

TrainFacts collect_train_facts(const std::vector<Document>& train, const RelationInventory& relations);

/// Micro-averaged scores of `predictions` against the labels of `gold`.
/// Duplicate predicted triples count once and add a warning. Ign-F1 is
/// filled only when `train_facts` is given; Infer-F1 only when some gold
/// fact carries a reasoning tag.
EvalReport f1_scores(const std::vector<Prediction>& predictions, const std::vector<Document>& gold,
                     const RelationInventory& relations, const TrainFacts* train_facts = nullptr);

struct ClueToken {
  Index position = 0;
  std::string token;
  double weight = 0;
  bool is_marker = false;
  bool in_mention = false;
};

struct HeatmapExport {
  std::string doc_id;
  Index head = 0;
  Index tail = 0;
  std::vector<std::string> tokens;
  std::vector<double> weights;
  std::vector<char> is_marker;
  std::vector<char> in_mention;
  std::vector<ClueToken> top;

  std::string to_json() const;
};

/// Aligns clue weights with the marked tokens and lists the top_k tokens by
/// weight (ties by position).
HeatmapExport export_heatmap(const Document& doc, const MarkedDocument& marked, Index head, Index tail,
                             const std::vector<double>& weights, Index top_k = 3);

}  // namespace ncdre
