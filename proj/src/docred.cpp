#include "ncdre/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ncdre {

namespace {

using Json = nlohmann::ordered_json;

class RecordError : public CorpusError {
 public:
  RecordError(const std::string& source, std::size_t doc, const std::string& field,
              const std::string& what)
      : CorpusError(source + ": document " + std::to_string(doc) + ": field '" + field +
                    "': " + what) {}
};

const Json& field(const Json& obj, const char* key, const std::string& path,
                  const std::string& source, std::size_t doc) {
  if (!obj.is_object()) throw RecordError(source, doc, path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw RecordError(source, doc, path + "." + key, "missing");
  return *it;
}

Index as_index(const Json& v, const std::string& path, const std::string& source,
               std::size_t doc) {
  if (!v.is_number_integer()) throw RecordError(source, doc, path, "expected an integer");
  return v.get<Index>();
}

std::string as_string(const Json& v, const std::string& path, const std::string& source,
                      std::size_t doc) {
  if (!v.is_string()) throw RecordError(source, doc, path, "expected a string");
  return v.get<std::string>();
}

Document parse_record(const Json& rec, std::size_t d, const RelationInventory& relations,
                      const std::string& source, std::vector<std::string>& unknown) {
  Document doc;
  doc.doc_id = as_string(field(rec, "title", "", source, d), "title", source, d);

  const auto& sents = field(rec, "sents", "", source, d);
  if (!sents.is_array()) throw RecordError(source, d, "sents", "expected an array");
  for (std::size_t s = 0; s < sents.size(); ++s) {
    const std::string path = "sents[" + std::to_string(s) + "]";
    if (!sents[s].is_array()) throw RecordError(source, d, path, "expected an array of tokens");
    std::vector<std::string> tokens;
    for (std::size_t t = 0; t < sents[s].size(); ++t) {
      tokens.push_back(as_string(sents[s][t], path + "[" + std::to_string(t) + "]", source, d));
    }
    doc.sentences.push_back(std::move(tokens));
  }

  const auto& vs = field(rec, "vertexSet", "", source, d);
  if (!vs.is_array()) throw RecordError(source, d, "vertexSet", "expected an array");
  for (std::size_t e = 0; e < vs.size(); ++e) {
    const std::string epath = "vertexSet[" + std::to_string(e) + "]";
    if (!vs[e].is_array() || vs[e].empty()) {
      throw RecordError(source, d, epath, "expected a non-empty array of mentions");
    }
    std::vector<Mention> group;
    for (std::size_t k = 0; k < vs[e].size(); ++k) {
      const std::string mpath = epath + "[" + std::to_string(k) + "]";
      const auto& m = vs[e][k];
      Mention mention;
      mention.entity_id = static_cast<Index>(e);
      mention.name = as_string(field(m, "name", mpath, source, d), mpath + ".name", source, d);
      mention.sentence_index =
          as_index(field(m, "sent_id", mpath, source, d), mpath + ".sent_id", source, d);
      mention.entity_type = as_string(field(m, "type", mpath, source, d), mpath + ".type", source, d);
      const auto& pos = field(m, "pos", mpath, source, d);
      if (!pos.is_array() || pos.size() != 2) {
        throw RecordError(source, d, mpath + ".pos", "expected [start, end]");
      }
      mention.start = as_index(pos[0], mpath + ".pos[0]", source, d);
      mention.end = as_index(pos[1], mpath + ".pos[1]", source, d);
      if (mention.sentence_index < 0 ||
          mention.sentence_index >= static_cast<Index>(doc.sentences.size())) {
        throw RecordError(source, d, mpath + ".sent_id", "sentence index out of range");
      }
      const Index len = static_cast<Index>(doc.sentences[mention.sentence_index].size());
      if (mention.start < 0 || mention.end <= mention.start || mention.end > len) {
        throw RecordError(source, d, mpath + ".pos",
                          "span [" + std::to_string(mention.start) + ", " +
                              std::to_string(mention.end) + ") invalid for sentence of length " +
                              std::to_string(len));
      }
      group.push_back(std::move(mention));
    }
    doc.entities.push_back(std::move(group));
  }

  if (auto it = rec.find("labels"); it != rec.end()) {
    if (!it->is_array()) throw RecordError(source, d, "labels", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string lpath = "labels[" + std::to_string(i) + "]";
      const auto& l = (*it)[i];
      RelationFact fact;
      fact.head = as_index(field(l, "h", lpath, source, d), lpath + ".h", source, d);
      fact.tail = as_index(field(l, "t", lpath, source, d), lpath + ".t", source, d);
      const auto code = as_string(field(l, "r", lpath, source, d), lpath + ".r", source, d);
      if (fact.head < 0 || fact.head >= doc.num_entities() || fact.tail < 0 ||
          fact.tail >= doc.num_entities()) {
        throw RecordError(source, d, lpath, "references a missing entity");
      }
      if (fact.head == fact.tail) throw RecordError(source, d, lpath, "head equals tail");
      if (auto id = relations.find(code)) {
        fact.relation = *id;
      } else {
        unknown.push_back(code);
        continue;
      }
      if (auto ev = l.find("evidence"); ev != l.end()) {
        if (!ev->is_array()) throw RecordError(source, d, lpath + ".evidence", "expected an array");
        for (const auto& s : *ev) fact.evidence.push_back(as_index(s, lpath + ".evidence", source, d));
      }
      if (auto inf = l.find("inferred"); inf != l.end()) {
        if (!inf->is_boolean()) throw RecordError(source, d, lpath + ".inferred", "expected a boolean");
        fact.is_reasoning = inf->get<bool>();
      }
      doc.labels.push_back(std::move(fact));
    }
  }
  annotate_inter_sentence(doc);
  return doc;
}

}  // namespace

std::vector<Document> parse_docred(std::string_view json_text, const RelationInventory& relations,
                                   const std::string& source) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CorpusError(source + ": invalid JSON: " + e.what());
  }
  if (!root.is_array()) throw CorpusError(source + ": expected an array of documents");
  std::vector<Document> docs;
  std::vector<std::string> unknown;
  docs.reserve(root.size());
  for (std::size_t d = 0; d < root.size(); ++d) {
    docs.push_back(parse_record(root[d], d, relations, source, unknown));
  }
  if (!unknown.empty()) {
    std::sort(unknown.begin(), unknown.end());
    unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw CorpusError(source + ": unknown relation(s): " + list);
  }
  return docs;
}

std::vector<Document> load_docred(const std::filesystem::path& path,
                                  const RelationInventory& relations) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_docred(buffer.str(), relations, path.string());
}

std::string to_docred_json(const std::vector<Document>& docs, const RelationInventory& relations) {
  Json root = Json::array();
  for (const auto& doc : docs) {
    Json rec;
    rec["title"] = doc.doc_id;
    rec["sents"] = doc.sentences;
    Json vs = Json::array();
    for (const auto& ent : doc.entities) {
      Json group = Json::array();
      for (const auto& m : ent) {
        group.push_back({{"name", m.name},
                         {"sent_id", m.sentence_index},
                         {"pos", {m.start, m.end}},
                         {"type", m.entity_type}});
      }
      vs.push_back(std::move(group));
    }
    rec["vertexSet"] = std::move(vs);
    Json labels = Json::array();
    for (const auto& f : doc.labels) {
      Json l = {{"h", f.head}, {"t", f.tail}, {"r", relations.code(f.relation)}, {"evidence", f.evidence}};
      if (f.is_reasoning) l["inferred"] = true;
      labels.push_back(std::move(l));
    }
    rec["labels"] = std::move(labels);
    root.push_back(std::move(rec));
  }
  return root.dump();
}

void save_docred(const std::filesystem::path& path, const std::vector<Document>& docs,
                 const RelationInventory& relations) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CorpusError("cannot write " + path.string());
  out << to_docred_json(docs, relations) << '\n';
  if (!out) throw CorpusError("write failed for " + path.string());
}

RelationInventory load_rel_info(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw CorpusError(path.string() + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw CorpusError(path.string() + ": expected an object {code: name}");
  std::vector<std::string> codes;
  std::vector<std::string> names;
  for (const auto& [code, name] : j.items()) {
    codes.push_back(code);
    names.push_back(name.is_string() ? name.get<std::string>() : code);
  }
  return RelationInventory(std::move(codes), std::move(names));
}

void save_rel_info(const std::filesystem::path& path, const RelationInventory& relations) {
  Json j = Json::object();
  for (Index r = 0; r < relations.size(); ++r) j[relations.code(r)] = relations.description(r);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CorpusError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace ncdre
