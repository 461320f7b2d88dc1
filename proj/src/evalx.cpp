#include "ncdre/evalx.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace ncdre {

using Json = nlohmann::ordered_json;

double f1_from(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0 ? 2 * precision * recall / denom : 0.0;
}

double SliceCounts::precision() const {
  return predicted() > 0 ? static_cast<double>(tp) / static_cast<double>(predicted()) : 0.0;
}

double SliceCounts::recall() const {
  return gold() > 0 ? static_cast<double>(tp) / static_cast<double>(gold()) : 0.0;
}

double SliceCounts::f1() const { return f1_from(precision(), recall()); }

TrainFacts collect_train_facts(const std::vector<Document>& train, const RelationInventory& relations) {
  TrainFacts facts;
  for (const auto& doc : train) {
    for (const auto& f : doc.labels) {
      for (const auto& hm : doc.entities[f.head]) {
        for (const auto& tm : doc.entities[f.tail]) facts.emplace(hm.name, tm.name, relations.code(f.relation));
      }
    }
  }
  return facts;
}

namespace {

using Key = std::tuple<Index, Index, Index>;  // head, tail, relation

bool in_train(const Document& doc, const Key& key, const RelationInventory& relations,
              const TrainFacts& train) {
  const auto& code = relations.code(std::get<2>(key));
  for (const auto& hm : doc.entities[std::get<0>(key)]) {
    for (const auto& tm : doc.entities[std::get<1>(key)]) {
      if (train.count({hm.name, tm.name, code})) return true;
    }
  }
  return false;
}

}  // namespace

EvalReport f1_scores(const std::vector<Prediction>& predictions, const std::vector<Document>& gold,
                     const RelationInventory& relations, const TrainFacts* train_facts) {
  EvalReport report;
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    if (!by_id.emplace(gold[d].doc_id, d).second) {
      throw std::invalid_argument("duplicate gold document id '" + gold[d].doc_id + "'");
    }
  }

  std::vector<std::set<Key>> predicted(gold.size());
  for (const auto& p : predictions) {
    auto it = by_id.find(p.doc_id);
    if (it == by_id.end()) throw std::invalid_argument("prediction for unknown document '" + p.doc_id + "'");
    const auto& doc = gold[it->second];
    if (p.head < 0 || p.head >= doc.num_entities() || p.tail < 0 || p.tail >= doc.num_entities() ||
        p.relation < 0 || p.relation >= relations.size()) {
      throw std::invalid_argument("prediction out of range in document '" + p.doc_id + "'");
    }
    if (!predicted[it->second].emplace(p.head, p.tail, p.relation).second) ++report.duplicates;
  }
  if (report.duplicates > 0) {
    report.warnings.push_back(std::to_string(report.duplicates) +
                              " duplicate predicted triple(s) counted once");
  }

  bool any_reasoning = false;
  SliceCounts infer;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    const auto& doc = gold[d];
    std::map<Key, const RelationFact*> facts;
    for (const auto& f : doc.labels) facts.emplace(Key{f.head, f.tail, f.relation}, &f);
    const auto& preds = predicted[d];

    std::map<std::pair<Index, Index>, bool> intra_cache;
    const auto is_intra = [&](Index h, Index t) {
      auto [it, fresh] = intra_cache.try_emplace({h, t}, false);
      if (fresh) it->second = co_sentential(doc, h, t);
      return it->second;
    };

    for (const auto& key : preds) {
      const auto [h, t, r] = key;
      auto& rel = report.per_relation[relations.code(r)];
      auto& slice = is_intra(h, t) ? report.intra : report.inter;
      auto found = facts.find(key);
      if (found != facts.end()) {
        ++report.overall.tp;
        ++slice.tp;
        ++rel.tp;
      } else {
        ++report.overall.fp;
        ++slice.fp;
        ++rel.fp;
      }
      // Reasoning slice: pairs that share no sentence, minus facts stated outright.
      if (!is_intra(h, t)) {
        if (found != facts.end() && found->second->is_reasoning) {
          ++infer.tp;
        } else if (found == facts.end()) {
          ++infer.fp;
        }
      }
    }
    for (const auto& [key, fact] : facts) {
      any_reasoning = any_reasoning || fact->is_reasoning;
      if (preds.count(key)) continue;
      const auto [h, t, r] = key;
      ++report.overall.fn;
      ++(is_intra(h, t) ? report.intra : report.inter).fn;
      ++report.per_relation[relations.code(r)].fn;
      if (fact->is_reasoning) ++infer.fn;
    }

    if (train_facts) {
      if (!report.ign) report.ign = IgnScore{};
      for (const auto& key : preds) {
        if (facts.count(key) && in_train(doc, key, relations, *train_facts)) ++report.ign->tp_in_train;
      }
    }
  }
  if (any_reasoning) report.infer = infer;
  if (train_facts) {
    if (!report.ign) report.ign = IgnScore{};
    auto& ign = *report.ign;
    const Index kept_tp = report.overall.tp - ign.tp_in_train;
    const Index kept_pred = report.overall.predicted() - ign.tp_in_train;
    ign.precision = kept_pred > 0 ? static_cast<double>(kept_tp) / static_cast<double>(kept_pred) : 0.0;
    ign.recall = report.overall.recall();
    ign.f1 = f1_from(ign.precision, ign.recall);
  }
  return report;
}

namespace {

Json counts_json(const SliceCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn},
          {"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()}};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string EvalReport::to_json() const {
  Json j;
  j["overall"] = counts_json(overall);
  j["intra"] = counts_json(intra);
  j["inter"] = counts_json(inter);
  if (infer) {
    j["infer"] = counts_json(*infer);
    j["infer"]["source"] = "synthetic reasoning tags";
  }
  if (ign) {
    j["ign"] = {{"tp_in_train", ign->tp_in_train},
                {"precision", ign->precision},
                {"recall", ign->recall},
                {"f1", ign->f1}};
  }
  Json rel = Json::object();
  for (const auto& [code, c] : per_relation) rel[code] = counts_json(c);
  j["per_relation"] = std::move(rel);
  j["duplicates"] = duplicates;
  j["warnings"] = warnings;
  return j.dump(2);
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  const auto line = [&](const char* name, const SliceCounts& c) {
    os << name << "  P " << fmt(c.precision()) << "  R " << fmt(c.recall()) << "  F1 " << fmt(c.f1())
       << "  (tp " << c.tp << ", fp " << c.fp << ", fn " << c.fn << ")\n";
  };
  line("overall ", overall);
  line("intra   ", intra);
  line("inter   ", inter);
  if (infer) {
    line("infer   ", *infer);
    os << "          infer slice uses synthetic reasoning tags\n";
  } else {
    os << "infer    n/a (no reasoning tags in gold)\n";
  }
  if (ign) {
    os << "ign     P " << fmt(ign->precision) << "  R " << fmt(ign->recall) << "  F1 " << fmt(ign->f1)
       << "  (correct facts seen in training: " << ign->tp_in_train << ")\n";
  } else {
    os << "ign      n/a (no training facts given)\n";
  }
  os << "per relation:\n";
  for (const auto& [code, c] : per_relation) {
    os << "  " << code << "  F1 " << fmt(c.f1()) << "  (tp " << c.tp << ", fp " << c.fp << ", fn " << c.fn
       << ")\n";
  }
  for (const auto& w : warnings) os << "warning: " << w << "\n";
  return os.str();
}

HeatmapExport export_heatmap(const Document& doc, const MarkedDocument& marked, Index head, Index tail,
                             const std::vector<double>& weights, Index top_k) {
  if (head < 0 || head >= doc.num_entities() || tail < 0 || tail >= doc.num_entities() || head == tail) {
    throw std::out_of_range("document '" + doc.doc_id + "' has no entity pair (" + std::to_string(head) +
                            ", " + std::to_string(tail) + ")");
  }
  if (static_cast<Index>(weights.size()) != marked.size()) {
    throw std::invalid_argument("export_heatmap: " + std::to_string(weights.size()) + " weights for " +
                                std::to_string(marked.size()) + " tokens");
  }
  HeatmapExport out;
  out.doc_id = doc.doc_id;
  out.head = head;
  out.tail = tail;
  out.tokens = marked.surface;
  out.weights = weights;
  out.is_marker = marked.is_marker;
  out.in_mention = marked.in_mention;
  std::vector<Index> order(weights.size());
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return weights[a] > weights[b]; });
  const Index k = std::min<Index>(top_k, static_cast<Index>(order.size()));
  for (Index i = 0; i < k; ++i) {
    const Index p = order[i];
    out.top.push_back({p, marked.surface[p], weights[p], marked.is_marker[p] != 0, marked.in_mention[p] != 0});
  }
  return out;
}

std::string HeatmapExport::to_json() const {
  Json j;
  j["doc_id"] = doc_id;
  j["head"] = head;
  j["tail"] = tail;
  Json toks = Json::array();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    toks.push_back({{"token", tokens[i]},
                    {"weight", weights[i]},
                    {"is_marker", is_marker[i] != 0},
                    {"is_mention_token", in_mention[i] != 0}});
  }
  j["tokens"] = std::move(toks);
  Json top_json = Json::array();
  for (const auto& t : top) {
    top_json.push_back({{"position", t.position},
                        {"token", t.token},
                        {"weight", t.weight},
                        {"is_marker", t.is_marker},
                        {"is_mention_token", t.in_mention}});
  }
  j["top"] = std::move(top_json);
  return j.dump(1);
}

}  // namespace ncdre
