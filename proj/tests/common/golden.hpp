#pragma once

#include "ncdre/evalx.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace ncdre::golden {

struct Fixture {
  RelationInventory relations;
  std::vector<Document> gold;
  std::vector<Document> train;
  std::vector<Prediction> predictions;
  nlohmann::json expected;
};

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream is(path);
  return nlohmann::json::parse(is);
}

inline Fixture load(const std::string& dir) {
  Fixture f;
  f.expected = read_json(dir + "/expected.json");
  f.relations = RelationInventory(f.expected.at("relations").get<std::vector<std::string>>());
  f.gold = load_docred(dir + "/gold.json", f.relations);
  f.train = load_docred(dir + "/train.json", f.relations);
  for (const auto& p : read_json(dir + "/predictions.json")) {
    Prediction pred;
    pred.doc_id = p.at("title").get<std::string>();
    pred.head = p.at("h_idx").get<Index>();
    pred.tail = p.at("t_idx").get<Index>();
    pred.relation = f.relations.id(p.at("r").get<std::string>());
    f.predictions.push_back(pred);
  }
  return f;
}

inline bool counts_match(const SliceCounts& c, const nlohmann::json& j) {
  return c.tp == j.at("tp").get<Index>() && c.fp == j.at("fp").get<Index>() && c.fn == j.at("fn").get<Index>();
}

}  // namespace ncdre::golden
