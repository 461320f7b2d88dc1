#include "ncdre/cli.hpp"

#include "ncdre/evalx.hpp"
#include "ncdre/model.hpp"
#include "ncdre/synthetic.hpp"
#include "ncdre/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>

#ifndef NCDRE_VERSION
#define NCDRE_VERSION "unknown"
#endif

namespace ncdre {

using Json = nlohmann::ordered_json;

const char* exit_category(int code) {
  switch (code) {
    case kExitOk:
      return "ok";
    case kExitUsage:
      return "usage";
    case kExitConfig:
      return "config";
    case kExitData:
      return "data";
    case kExitVocabulary:
      return "vocabulary";
    case kExitIo:
      return "io";
    case kExitNumeric:
      return "numeric";
    default:
      return "internal";
  }
}

std::string version_string() { return NCDRE_VERSION; }

std::string RunManifest::to_json() const {
  Json j = {{"command", command},   {"arguments", arguments}, {"config", config_path},
            {"seed", seed},         {"started", started},     {"finished", finished},
            {"out", out_dir},       {"version", version},     {"exit_code", exit_code},
            {"status", exit_category(exit_code)}};
  return j.dump(2);
}

namespace {

class CliError : public std::runtime_error {
 public:
  CliError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Options {
  std::string config;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string train_facts;
  std::string resume;
  std::string doc;
  long long seed = -1;
  long long layers = -1;
  long long head = -1;
  long long tail = -1;
  long long top_k = 3;
  long long stop_after = -1;
  bool no_c_msa = false;
  bool plain_msa = false;
  bool no_decoder = false;
  bool quiet = false;
};

std::filesystem::path require_file(const std::filesystem::path& path, const char* what) {
  if (!std::filesystem::is_regular_file(path)) {
    throw CliError(kExitData, std::string("missing ") + what + ": expected file " + path.string());
  }
  return path;
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec || !std::filesystem::is_directory(out)) {
    throw CliError(kExitIo, "cannot create output directory " + out);
  }
  const auto probe = std::filesystem::path(out) / ".write-probe";
  std::ofstream f(probe);
  if (!f) throw CliError(kExitIo, "output directory is not writable: " + out);
  f.close();
  std::filesystem::remove(probe, ec);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw CliError(kExitIo, "cannot write " + path.string());
  f << text;
  if (text.empty() || text.back() != '\n') f << '\n';
}

RelationInventory data_relations(const std::filesystem::path& dir) {
  const auto info = dir / "rel_info.json";
  return std::filesystem::exists(info) ? load_rel_info(info) : RelationInventory::docred();
}

int cmd_synth(const Options& o, std::ostream& out) {
  auto kv = KeyValueConfig::load(o.config);
  if (kv.empty()) throw CliError(kExitUsage, "config " + o.config + " is empty; nothing to generate");
  const auto cfg = SynthConfig::from_config(kv);
  const auto seed = static_cast<std::uint64_t>(o.seed < 0 ? 1 : o.seed);
  ensure_out_dir(o.out);
  const std::filesystem::path dir(o.out);
  const auto inv = cfg.inventory();

  save_docred(dir / "train.json", generate_synthetic(cfg, seed), inv);
  const auto split = [&](Index count, const char* name, std::uint64_t salt) {
    if (count <= 0) return;
    auto c = cfg;
    c.documents = count;
    c.id_prefix = cfg.id_prefix + "-" + name;
    save_docred(dir / (std::string(name) + ".json"), generate_synthetic(c, mix_seed(seed, salt)), inv);
  };
  split(cfg.dev_documents, "dev", 1);
  split(cfg.test_documents, "test", 2);
  save_rel_info(dir / "rel_info.json", inv);
  write_text(dir / "schema.txt", describe_schema(cfg));
  out << "wrote " << cfg.documents << " train, " << cfg.dev_documents << " dev, " << cfg.test_documents
      << " test documents to " << o.out << "\n";
  return kExitOk;
}

template <typename Scalar>
int train_with(const Options& o, const KeyValueConfig& kv, std::ostream& out) {
  auto model_cfg = ModelConfig::from_config(kv);
  auto train_cfg = TrainConfig::from_config(kv);
  if (o.seed >= 0) train_cfg.seed = static_cast<std::uint64_t>(o.seed);
  if (o.layers >= 0) model_cfg.decoder.layers = o.layers;
  model_cfg.decoder.disable_c_msa = model_cfg.decoder.disable_c_msa || o.no_c_msa;
  model_cfg.decoder.replace_sm_with_plain_msa = model_cfg.decoder.replace_sm_with_plain_msa || o.plain_msa;
  model_cfg.decoder.bypass_decoder = model_cfg.decoder.bypass_decoder || o.no_decoder;
  model_cfg.set_dropout(train_cfg.dropout);
  model_cfg.validate();

  const std::filesystem::path data(o.data);
  const auto relations = data_relations(data);
  const auto train_docs = load_docred(require_file(data / "train.json", "training split"), relations);
  const auto dev_docs = load_docred(require_file(data / "dev.json", "dev split"), relations);

  NcDreModel<Scalar> model(model_cfg, build_vocab(train_docs, relations), train_cfg.seed);
  TrainOptions opts;
  opts.out_dir = o.out;
  if (!o.resume.empty()) opts.resume = o.resume;
  opts.stop_after_step = o.stop_after;
  opts.verbose = !o.quiet;
  const auto result = train(model, train_docs, dev_docs, train_cfg, opts);
  model.save(std::filesystem::path(o.out) / "model.ckpt");
  out << "steps " << result.steps_done << "/" << result.total_steps;
  if (result.best_dev_f1) out << ", best dev F1 " << *result.best_dev_f1 << " at step " << result.best_step;
  out << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  const auto kv = KeyValueConfig::load(o.config);
  auto known = ModelConfig::known_keys();
  known.insert(TrainConfig::known_keys().begin(), TrainConfig::known_keys().end());
  known.insert("precision");
  kv.require_known(known);
  ensure_out_dir(o.out);
  const auto precision = kv.get_int("precision", 64);
  if (precision == 64) return train_with<double>(o, kv, out);
  if (precision == 32) return train_with<float>(o, kv, out);
  throw ConfigError(o.config + ": precision must be 32 or 64");
}

std::vector<Document> load_for_model(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::vector<Document> docs;
  try {
    docs = load_docred(require_file(path, "data file"), vocab.relations());
  } catch (const CorpusError& e) {
    const std::string what = e.what();
    if (what.find("unknown relation") != std::string::npos) {
      throw CliError(kExitVocabulary, "data does not match the checkpoint vocabulary: " + what);
    }
    throw;
  }
  for (const auto& doc : docs) {
    for (const auto& ent : doc.entities) {
      for (const auto& m : ent) {
        if (!vocab.has_entity_type(m.entity_type)) {
          throw CliError(kExitVocabulary, "document '" + doc.doc_id + "' uses entity type '" + m.entity_type +
                                              "' unknown to the checkpoint vocabulary");
        }
      }
    }
  }
  return docs;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  ensure_out_dir(o.out);
  const auto model = NcDreModel<double>::load(require_file(o.checkpoint, "checkpoint"));
  const auto docs = load_for_model(o.data, model.vocab());
  const auto predictions = model.predict_all(docs);
  std::optional<TrainFacts> facts;
  if (!o.train_facts.empty()) {
    facts = collect_train_facts(load_for_model(o.train_facts, model.vocab()), model.vocab().relations());
  } else {
    err << "notice: Ign-F1 omitted (no --train-facts given)\n";
  }
  const auto report = f1_scores(predictions, docs, model.vocab().relations(), facts ? &*facts : nullptr);
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  const std::filesystem::path dir(o.out);
  write_text(dir / "report.txt", report.to_text());
  write_text(dir / "report.json", report.to_json());
  save_predictions(dir / "predictions.json", predictions, model.vocab().relations());
  out << report.to_text();
  return kExitOk;
}

int cmd_explain(const Options& o, std::ostream& out) {
  ensure_out_dir(o.out);
  const auto model = NcDreModel<double>::load(require_file(o.checkpoint, "checkpoint"));
  const auto docs = load_for_model(o.data, model.vocab());
  const auto it = std::find_if(docs.begin(), docs.end(), [&](const Document& d) { return d.doc_id == o.doc; });
  if (it == docs.end()) throw CliError(kExitData, "unknown document '" + o.doc + "' in " + o.data);
  const auto& doc = *it;
  if (o.head < 0 || o.head >= doc.num_entities() || o.tail < 0 || o.tail >= doc.num_entities() ||
      o.head == o.tail) {
    throw CliError(kExitData, "document '" + doc.doc_id + "' has " + std::to_string(doc.num_entities()) +
                                  " entities; no pair (" + std::to_string(o.head) + ", " +
                                  std::to_string(o.tail) + ")");
  }
  const auto scores = model.predict(doc);
  const Index n = doc.num_entities();
  const Index p = o.head * (n - 1) + (o.tail < o.head ? o.tail : o.tail - 1);
  const auto row = scores.clue.row(p);
  const std::vector<double> weights(row.data(), row.data() + row.size());
  const auto marked = mark_document(doc, model.vocab());
  const auto heat = export_heatmap(doc, marked, o.head, o.tail, weights, o.top_k);
  write_text(std::filesystem::path(o.out) / "heatmap.json", heat.to_json());
  out << "top clue tokens for (" << o.head << ", " << o.tail << ") in " << doc.doc_id << ":";
  for (const auto& t : heat.top) out << " " << t.token << "(" << t.weight << ")";
  out << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  if (const char* threads = std::getenv("NCDRE_THREADS")) {
    const int n = std::atoi(threads);
    if (n > 0) Eigen::setNbThreads(n);
  }
  Options o;
  CLI::App app{"NC-DRE document-level relation extraction", "ncdre"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  auto* synth = app.add_subcommand("synth", "generate a synthetic DocRED-format corpus");
  synth->add_option("--config", o.config, "generator config file")->required();
  synth->add_option("--seed", o.seed, "generator seed (default 1)");
  synth->add_option("--out", o.out, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "train a model on <data>/train.json and <data>/dev.json");
  train_cmd->add_option("--config", o.config, "model and training config file")->required();
  train_cmd->add_option("--data", o.data, "corpus directory")->required();
  train_cmd->add_option("--out", o.out, "output directory")->required();
  train_cmd->add_option("--seed", o.seed, "overrides the config seed");
  train_cmd->add_option("--layers", o.layers, "I-Decoder layer count");
  train_cmd->add_flag("--no-c-msa", o.no_c_msa, "drop the C-MSA sub-layer");
  train_cmd->add_flag("--plain-msa", o.plain_msa, "SM-MSA without structure masks");
  train_cmd->add_flag("--no-decoder", o.no_decoder, "bypass the I-Decoder");
  train_cmd->add_option("--resume", o.resume, "continue from a last.ckpt");
  train_cmd->add_option("--stop-after", o.stop_after, "stop and checkpoint after this step");
  train_cmd->add_flag("--quiet", o.quiet, "no per-evaluation log lines");

  auto* eval_cmd = app.add_subcommand("eval", "score a DocRED-format file");
  eval_cmd->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--data", o.data, "DocRED-format file")->required();
  eval_cmd->add_option("--out", o.out, "output directory")->required();
  eval_cmd->add_option("--train-facts", o.train_facts, "training file; enables Ign-F1");

  auto* explain = app.add_subcommand("explain", "export the clue attention of one entity pair");
  explain->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
  explain->add_option("--data", o.data, "DocRED-format file")->required();
  explain->add_option("--doc", o.doc, "document title")->required();
  explain->add_option("--head", o.head, "head entity index")->required();
  explain->add_option("--tail", o.tail, "tail entity index")->required();
  explain->add_option("--top-k", o.top_k, "number of top tokens listed");
  explain->add_option("--out", o.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << version_string() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    err << "error[usage]: " << msg << "\n";
    return kExitUsage;
  }

  RunManifest manifest;
  manifest.command = app.get_subcommands().front()->get_name();
  for (int i = 1; i < argc; ++i) manifest.arguments.emplace_back(argv[i]);
  manifest.config_path = o.config;
  manifest.seed = o.seed;
  manifest.out_dir = o.out;
  manifest.version = version_string();
  manifest.started = now_utc();

  int code = kExitOk;
  std::string message;
  try {
    if (synth->parsed()) code = cmd_synth(o, out);
    if (train_cmd->parsed()) code = cmd_train(o, out);
    if (eval_cmd->parsed()) code = cmd_eval(o, out, err);
    if (explain->parsed()) code = cmd_explain(o, out);
  } catch (const CliError& e) {
    code = e.code();
    message = e.what();
  } catch (const ConfigError& e) {
    code = kExitConfig;
    message = e.what();
  } catch (const ModelConfigError& e) {
    code = kExitConfig;
    message = e.what();
  } catch (const CorpusError& e) {
    code = kExitData;
    message = e.what();
  } catch (const CheckpointError& e) {
    code = kExitIo;
    message = e.what();
  } catch (const NonFiniteLossError& e) {
    code = kExitNumeric;
    message = e.what();
  } catch (const std::filesystem::filesystem_error& e) {
    code = kExitIo;
    message = e.what();
  } catch (const std::exception& e) {
    code = kExitInternal;
    message = e.what();
  }
  if (code != kExitOk) {
    std::replace(message.begin(), message.end(), '\n', ' ');
    err << "error[" << exit_category(code) << "]: " << message << "\n";
  }

  manifest.finished = now_utc();
  manifest.exit_code = code;
  if (!o.out.empty() && std::filesystem::is_directory(o.out)) {
    std::ofstream f(std::filesystem::path(o.out) / "manifest.json", std::ios::trunc);
    if (f) f << manifest.to_json() << '\n';
  }
  return code;
}

}  // namespace ncdre
