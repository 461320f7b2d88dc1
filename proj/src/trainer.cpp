#include "ncdre/trainer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace ncdre {

using Json = nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  for (double v : lr) {
    if (!(v >= 0)) throw ConfigError("learning rates must be >= 0");
  }
  if (warmup_fraction < 0 || warmup_fraction >= 1) throw ConfigError("warmup_fraction must lie in [0, 1)");
  if (!(clip_norm > 0)) throw ConfigError("clip_norm must be > 0");
  if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must lie in [0, 1)");
  if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
  if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
}

const std::set<std::string>& TrainConfig::known_keys() {
  static const std::set<std::string> keys = {
      "epochs",     "batch_size", "lr_encoder", "lr_i_decoder", "lr_classifier", "warmup_fraction",
      "weight_decay", "clip_norm", "dropout",   "beta1",        "beta2",         "adam_eps",
      "seed",       "eval_every"};
  return keys;
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv) {
  TrainConfig c;
  c.epochs = kv.get_int("epochs", c.epochs);
  c.batch_size = kv.get_int("batch_size", c.batch_size);
  c.lr[0] = kv.get_double("lr_encoder", c.lr[0]);
  c.lr[1] = kv.get_double("lr_i_decoder", c.lr[1]);
  c.lr[2] = kv.get_double("lr_classifier", c.lr[2]);
  c.warmup_fraction = kv.get_double("warmup_fraction", c.warmup_fraction);
  c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
  c.clip_norm = kv.get_double("clip_norm", c.clip_norm);
  c.dropout = kv.get_double("dropout", c.dropout);
  c.beta1 = kv.get_double("beta1", c.beta1);
  c.beta2 = kv.get_double("beta2", c.beta2);
  c.adam_eps = kv.get_double("adam_eps", c.adam_eps);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.eval_every = kv.get_int("eval_every", c.eval_every);
  c.validate();
  return c;
}

std::string TrainConfig::to_json() const {
  Json j = {{"epochs", epochs},
            {"batch_size", batch_size},
            {"lr_encoder", lr[0]},
            {"lr_i_decoder", lr[1]},
            {"lr_classifier", lr[2]},
            {"warmup_fraction", warmup_fraction},
            {"weight_decay", weight_decay},
            {"clip_norm", clip_norm},
            {"dropout", dropout},
            {"beta1", beta1},
            {"beta2", beta2},
            {"adam_eps", adam_eps},
            {"seed", seed},
            {"eval_every", eval_every}};
  return j.dump();
}

Index warmup_steps(Index total_steps, double warmup_fraction) {
  // The small slack keeps e.g. 0.06 * 1000 from rounding up to 61.
  return static_cast<Index>(std::ceil(warmup_fraction * static_cast<double>(total_steps) - 1e-9));
}

double lr_at(Index step, Index total_steps, double peak, double warmup_fraction) {
  if (total_steps <= 0) return 0.0;
  step = std::clamp<Index>(step, 0, total_steps);
  const Index warm = warmup_steps(total_steps, warmup_fraction);
  if (step < warm) return peak * static_cast<double>(step) / static_cast<double>(warm);
  if (total_steps == warm) return peak;
  return peak * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warm);
}

template <typename Scalar>
double global_grad_norm(const ParameterStore<Scalar>& params) {
  double sq = 0;
  for (const auto& e : params.entries()) {
    if (!e.tensor.has_grad()) continue;
    const auto& g = e.tensor.node()->grad;
    sq += g.template cast<double>().squaredNorm();
  }
  return std::sqrt(sq);
}

template <typename Scalar>
double clip_grad_norm(ParameterStore<Scalar>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm) {
    const auto factor = static_cast<Scalar>(max_norm / norm);
    for (auto& e : params.entries()) {
      if (e.tensor.has_grad()) e.tensor.node()->grad *= factor;
    }
  }
  return norm;
}

template <typename Scalar>
AdamW<Scalar>::AdamW(ParameterStore<Scalar>& params, double beta1, double beta2, double eps,
                     double weight_decay)
    : params_(&params), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
  for (const auto& e : params.entries()) {
    m_.push_back(Matrix<Scalar>::Zero(e.tensor.rows(), e.tensor.cols()));
    v_.push_back(Matrix<Scalar>::Zero(e.tensor.rows(), e.tensor.cols()));
  }
}

template <typename Scalar>
void AdamW<Scalar>::step(const std::array<double, kNumParamGroups>& lr) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  const auto& entries = params_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const double rate = lr[static_cast<std::size_t>(e.group)];
    auto& p = e.tensor.node()->value;
    p *= static_cast<Scalar>(1.0 - rate * weight_decay_);
    if (!e.tensor.has_grad()) {
      // No gradient reached this tensor: the moments still decay.
      m_[i] *= static_cast<Scalar>(beta1_);
      v_[i] *= static_cast<Scalar>(beta2_);
    } else {
      const auto& g = e.tensor.node()->grad;
      m_[i] = static_cast<Scalar>(beta1_) * m_[i] + static_cast<Scalar>(1 - beta1_) * g;
      v_[i] = static_cast<Scalar>(beta2_) * v_[i] + static_cast<Scalar>(1 - beta2_) * g.cwiseProduct(g);
    }
    const auto step_size = static_cast<Scalar>(rate / bc1);
    const auto denom_scale = static_cast<Scalar>(1.0 / std::sqrt(bc2));
    p.array() -= step_size * m_[i].array() /
                 ((v_[i].array().sqrt() * denom_scale) + static_cast<Scalar>(eps_));
  }
}

template <typename Scalar>
std::vector<NamedArray> AdamW<Scalar>::export_state() const {
  std::vector<NamedArray> out;
  const auto& entries = params_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& shape = entries[i].tensor.shape();
    NamedArray m{"adam.m/" + entries[i].name, shape, {}};
    NamedArray v{"adam.v/" + entries[i].name, shape, {}};
    for (Index k = 0; k < m_[i].size(); ++k) {
      m.data.push_back(static_cast<double>(m_[i].data()[k]));
      v.data.push_back(static_cast<double>(v_[i].data()[k]));
    }
    out.push_back(std::move(m));
    out.push_back(std::move(v));
  }
  return out;
}

template <typename Scalar>
void AdamW<Scalar>::import_state(const Archive& archive, Index steps) {
  const auto& entries = params_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (auto* target : {&m_[i], &v_[i]}) {
      const std::string name = (target == &m_[i] ? "adam.m/" : "adam.v/") + entries[i].name;
      const auto* sec = archive.find(name);
      if (!sec || static_cast<Index>(sec->data.size()) != target->size()) {
        throw CheckpointError("optimizer state missing or mis-shaped: " + name);
      }
      for (Index k = 0; k < target->size(); ++k) target->data()[k] = static_cast<Scalar>(sec->data[k]);
    }
  }
  steps_ = steps;
}

std::string HistoryRecord::to_json() const {
  Json j;
  j["step"] = step;
  j["epoch"] = epoch;
  j["lr"] = {{"encoder", lr[0]}, {"i_decoder", lr[1]}, {"classifier", lr[2]}};
  j["train_loss"] = train_loss;
  j["dev_f1"] = dev_f1 ? Json(*dev_f1) : Json(nullptr);
  j["dev_ign_f1"] = dev_ign_f1 ? Json(*dev_ign_f1) : Json(nullptr);
  return j.dump();
}

HistoryRecord HistoryRecord::from_json(std::string_view line) {
  const auto j = Json::parse(line);
  HistoryRecord r;
  r.step = j.at("step").get<Index>();
  r.epoch = j.at("epoch").get<Index>();
  r.lr = {j.at("lr").at("encoder").get<double>(), j.at("lr").at("i_decoder").get<double>(),
          j.at("lr").at("classifier").get<double>()};
  r.train_loss = j.at("train_loss").get<double>();
  if (!j.at("dev_f1").is_null()) r.dev_f1 = j.at("dev_f1").get<double>();
  if (!j.at("dev_ign_f1").is_null()) r.dev_ign_f1 = j.at("dev_ign_f1").get<double>();
  return r;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  const auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(splitmix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

namespace {

template <typename Scalar>
std::vector<NamedArray> prefixed(const std::vector<Matrix<Scalar>>& values,
                                 const ParameterStore<Scalar>& params, const std::string& prefix) {
  std::vector<NamedArray> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    NamedArray a{prefix + params.entries()[i].name, params.entries()[i].tensor.shape(), {}};
    for (Index k = 0; k < values[i].size(); ++k) a.data.push_back(static_cast<double>(values[i].data()[k]));
    out.push_back(std::move(a));
  }
  return out;
}

template <typename Scalar>
std::vector<Matrix<Scalar>> read_prefixed(const Archive& archive, const ParameterStore<Scalar>& params,
                                          const std::string& prefix) {
  std::vector<Matrix<Scalar>> out;
  for (const auto& e : params.entries()) {
    const auto* sec = archive.find(prefix + e.name);
    if (!sec || static_cast<Index>(sec->data.size()) != e.tensor.size()) {
      throw CheckpointError("checkpoint section missing or mis-shaped: " + prefix + e.name);
    }
    Matrix<Scalar> m(e.tensor.rows(), e.tensor.cols());
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<Scalar>(sec->data[k]);
    out.push_back(std::move(m));
  }
  return out;
}

struct LoopState {
  Index step = 0;
  double loss_sum = 0;
  Index loss_count = 0;
  std::optional<double> best_f1;
  Index best_step = -1;
  std::vector<HistoryRecord> history;
};

template <typename Scalar>
void write_state(const std::filesystem::path& path, const NcDreModel<Scalar>& model, const AdamW<Scalar>& opt,
                 const TrainConfig& config, Index total_steps, const LoopState& state,
                 const std::optional<std::vector<Matrix<Scalar>>>& best) {
  auto archive = model.to_archive();
  auto meta = Json::parse(archive.meta);
  Json ts;
  ts["step"] = state.step;
  ts["total_steps"] = total_steps;
  ts["loss_sum"] = state.loss_sum;
  ts["loss_count"] = state.loss_count;
  ts["best_f1"] = state.best_f1 ? Json(*state.best_f1) : Json(nullptr);
  ts["best_step"] = state.best_step;
  ts["config"] = Json::parse(config.to_json());
  Json hist = Json::array();
  for (const auto& r : state.history) hist.push_back(Json::parse(r.to_json()));
  ts["history"] = std::move(hist);
  meta["train_state"] = std::move(ts);
  archive.meta = meta.dump();
  auto adam = opt.export_state();
  archive.sections.insert(archive.sections.end(), adam.begin(), adam.end());
  if (best) {
    auto b = prefixed(*best, model.params(), "best/");
    archive.sections.insert(archive.sections.end(), b.begin(), b.end());
  }
  write_archive(path, archive);
}

void write_history(const std::filesystem::path& path, const std::vector<HistoryRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : history) out << r.to_json() << '\n';
}

}  // namespace

template <typename Scalar>
TrainResult train(NcDreModel<Scalar>& model, const std::vector<Document>& train_docs,
                  const std::vector<Document>& dev_docs, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  if (train_docs.empty()) throw std::invalid_argument("training corpus is empty");
  const auto& relations = model.vocab().relations();
  const auto train_facts = collect_train_facts(train_docs, relations);

  const Index n = static_cast<Index>(train_docs.size());
  const Index steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const Index total_steps = steps_per_epoch * config.epochs;

  auto& params = model.params();
  AdamW<Scalar> opt(params, config.beta1, config.beta2, config.adam_eps, config.weight_decay);
  LoopState state;
  std::optional<std::vector<Matrix<Scalar>>> best;

  if (options.resume) {
    const auto archive = read_archive(*options.resume);
    const auto meta = Json::parse(archive.meta);
    if (!meta.contains("train_state")) {
      throw CheckpointError(options.resume->string() + " holds no training state");
    }
    const auto& ts = meta["train_state"];
    if (ts.at("total_steps").get<Index>() != total_steps) {
      throw CheckpointError("resume checkpoint was made for " + std::to_string(ts.at("total_steps").get<Index>()) +
                            " total steps, this run has " + std::to_string(total_steps));
    }
    import_parameters(archive, params);
    state.step = ts.at("step").get<Index>();
    state.loss_sum = ts.at("loss_sum").get<double>();
    state.loss_count = ts.at("loss_count").get<Index>();
    if (!ts.at("best_f1").is_null()) state.best_f1 = ts.at("best_f1").get<double>();
    state.best_step = ts.at("best_step").get<Index>();
    for (const auto& r : ts.at("history")) state.history.push_back(HistoryRecord::from_json(r.dump()));
    opt.import_state(archive, state.step);
    if (archive.find("best/" + params.entries().front().name)) best = read_prefixed(archive, params, "best/");
  }

  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);
  const auto checkpoint_last = [&]() {
    if (options.out_dir.empty()) return;
    write_state(options.out_dir / "last.ckpt", model, opt, config, total_steps, state, best);
    write_history(options.out_dir / "history.jsonl", state.history);
  };

  std::array<double, kNumParamGroups> lr{};
  for (std::size_t g = 0; g < kNumParamGroups; ++g) {
    lr[g] = lr_at(std::max<Index>(state.step - 1, 0), total_steps, config.lr[g], config.warmup_fraction);
  }

  const auto evaluate = [&](Index epoch) {
    HistoryRecord rec;
    rec.step = state.step;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = state.loss_count > 0 ? state.loss_sum / static_cast<double>(state.loss_count) : 0.0;
    if (!dev_docs.empty()) {
      const auto report = f1_scores(model.predict_all(dev_docs), dev_docs, relations, &train_facts);
      rec.dev_f1 = report.overall.f1();
      rec.dev_ign_f1 = report.ign->f1;
      if (!state.best_f1 || *rec.dev_f1 > *state.best_f1) {
        state.best_f1 = rec.dev_f1;
        state.best_step = state.step;
        best = params.snapshot();
        if (!options.out_dir.empty()) model.save(options.out_dir / "best.ckpt");
      }
    }
    state.loss_sum = 0;
    state.loss_count = 0;
    state.history.push_back(rec);
    if (options.verbose) std::cerr << rec.to_json() << '\n';
    if (options.on_record) options.on_record(rec);
    checkpoint_last();
  };

  std::vector<Index> order(static_cast<std::size_t>(n));
  bool stopped = false;
  while (state.step < total_steps) {
    const Index epoch = state.step / steps_per_epoch;
    const Index in_epoch = state.step % steps_per_epoch;
    std::iota(order.begin(), order.end(), Index(0));
    std::mt19937_64 shuffle_rng(mix_seed(config.seed, 0x5eed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    const Index begin = in_epoch * config.batch_size;
    const Index end = std::min(n, begin + config.batch_size);
    const Index batch = end - begin;
    params.zero_grad();
    std::vector<double> losses;
    for (Index i = begin; i < end; ++i) {
      const Index d = order[static_cast<std::size_t>(i)];
      std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(state.step),
                                   static_cast<std::uint64_t>(d)));
      Tape<Scalar> tape;
      const auto loss = model.loss(train_docs[static_cast<std::size_t>(d)], true, &rng);
      const double value = static_cast<double>(loss.item());
      losses.push_back(value);
      if (!std::isfinite(value)) {
        std::ostringstream os;
        os << "non-finite loss at step " << state.step + 1 << " (epoch " << epoch << "); batch documents:";
        for (Index j = begin; j < end; ++j) {
          const Index dj = order[static_cast<std::size_t>(j)];
          os << ' ' << train_docs[static_cast<std::size_t>(dj)].doc_id;
          if (j - begin < static_cast<Index>(losses.size())) os << "=" << losses[static_cast<std::size_t>(j - begin)];
        }
        throw NonFiniteLossError(os.str());
      }
      if (loss.requires_grad()) tape.backward(scale(loss, static_cast<Scalar>(1.0 / static_cast<double>(batch))));
    }
    clip_grad_norm(params, config.clip_norm);
    for (std::size_t g = 0; g < kNumParamGroups; ++g) {
      lr[g] = lr_at(state.step, total_steps, config.lr[g], config.warmup_fraction);
    }
    opt.step(lr);
    ++state.step;
    for (double v : losses) state.loss_sum += v;
    state.loss_count += static_cast<Index>(losses.size());

    const bool epoch_end = state.step % steps_per_epoch == 0;
    const bool eval_now = config.eval_every > 0 ? (state.step % config.eval_every == 0 || state.step == total_steps)
                                                : epoch_end;
    if (eval_now) evaluate(epoch);
    if (options.stop_after_step >= 0 && state.step >= options.stop_after_step && state.step < total_steps) {
      if (!eval_now) checkpoint_last();
      stopped = true;
      break;
    }
  }

  TrainResult result;
  result.history = state.history;
  result.total_steps = total_steps;
  result.steps_done = state.step;
  result.best_dev_f1 = state.best_f1;
  result.best_step = state.best_step;
  if (!stopped && options.restore_best && best) params.restore(*best);
  return result;
}

#define NCDRE_INSTANTIATE_TRAINER(S)                                                          \
  template double clip_grad_norm(ParameterStore<S>&, double);                                 \
  template double global_grad_norm(const ParameterStore<S>&);                                 \
  template class AdamW<S>;                                                                    \
  template TrainResult train(NcDreModel<S>&, const std::vector<Document>&,                    \
                             const std::vector<Document>&, const TrainConfig&, const TrainOptions&);

NCDRE_INSTANTIATE_TRAINER(double)
NCDRE_INSTANTIATE_TRAINER(float)

}  // namespace ncdre
