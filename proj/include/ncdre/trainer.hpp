#pragma once

#include "ncdre/config.hpp"
#include "ncdre/evalx.hpp"
#include "ncdre/model.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncdre {

struct TrainConfig {
  Index epochs = 30;
  Index batch_size = 4;
  /// Peak learning rate per ParamGroup: encoder, i_decoder, classifier.
  std::array<double, kNumParamGroups> lr{9e-5, 3e-4, 6e-4};
  double warmup_fraction = 0.06;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  double dropout = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  /// Dev evaluation period in steps; 0 evaluates at the end of each epoch.
  Index eval_every = 0;

  void validate() const;
  static TrainConfig from_config(const KeyValueConfig& kv);
  static const std::set<std::string>& known_keys();
  std::string to_json() const;
};

/// Number of warmup steps, ceil(fraction * total).
Index warmup_steps(Index total_steps, double warmup_fraction);

/// Linear 0 -> peak over the warmup steps, then linear peak -> 0 at total.
double lr_at(Index step, Index total_steps, double peak, double warmup_fraction);

/// Scales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename Scalar>
double clip_grad_norm(ParameterStore<Scalar>& params, double max_norm);

template <typename Scalar>
double global_grad_norm(const ParameterStore<Scalar>& params);

/// Adam moments with decoupled weight decay and per-group learning rates.
template <typename Scalar>
class AdamW {
 public:
  AdamW(ParameterStore<Scalar>& params, double beta1, double beta2, double eps, double weight_decay);

  void step(const std::array<double, kNumParamGroups>& lr);
  Index steps() const { return steps_; }

  std::vector<NamedArray> export_state() const;
  void import_state(const Archive& archive, Index steps);

 private:
  ParameterStore<Scalar>* params_;
  double beta1_;
  double beta2_;
  double eps_;
  double weight_decay_;
  Index steps_ = 0;
  std::vector<Matrix<Scalar>> m_;
  std::vector<Matrix<Scalar>> v_;
};

struct HistoryRecord {
  Index step = 0;
  Index epoch = 0;
  std::array<double, kNumParamGroups> lr{};
  double train_loss = 0;
  std::optional<double> dev_f1;
  std::optional<double> dev_ign_f1;

  std::string to_json() const;
  static HistoryRecord from_json(std::string_view line);
  bool operator==(const HistoryRecord&) const = default;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  /// When set: best.ckpt, last.ckpt and history.jsonl are written here.
  std::filesystem::path out_dir;
  /// Checkpoint written by an earlier run of the same config.
  std::optional<std::filesystem::path> resume;
  /// Stop (and checkpoint) after this step; the schedule still assumes the
  /// full run. Negative = run to the end.
  Index stop_after_step = -1;
  /// Copy the best-dev parameters back into the model at the end.
  bool restore_best = true;
  bool verbose = false;
  std::function<void(const HistoryRecord&)> on_record;
};

struct TrainResult {
  std::vector<HistoryRecord> history;
  Index total_steps = 0;
  Index steps_done = 0;
  std::optional<double> best_dev_f1;
  Index best_step = -1;
};

/// Deterministic seed mixing used for per-step dropout and epoch shuffles.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

template <typename Scalar>
TrainResult train(NcDreModel<Scalar>& model, const std::vector<Document>& train_docs,
                  const std::vector<Document>& dev_docs, const TrainConfig& config,
                  const TrainOptions& options = {});

}  // namespace ncdre
