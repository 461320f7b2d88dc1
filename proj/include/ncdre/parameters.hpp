#pragma once

#include "ncdre/tensor.hpp"

#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ncdre {

/// Optimizer routing group; each one gets its own learning rate.
enum class ParamGroup { Encoder, IDecoder, Classifier };

inline constexpr std::size_t kNumParamGroups = 3;

std::string_view group_name(ParamGroup group);

/// Named, grouped collection of trainable leaves. Insertion order is the
/// canonical order for checkpoints and optimizer state.
template <typename Scalar>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    ParamGroup group;
    Tensor<Scalar> tensor;
  };

  Tensor<Scalar> add(std::string name, ParamGroup group, Matrix<Scalar> init, Shape shape = {});

  /// Gaussian init with the given standard deviation.
  Tensor<Scalar> add_normal(std::string name, ParamGroup group, Shape shape, double stddev,
                            std::mt19937_64& rng);
  Tensor<Scalar> add_constant(std::string name, ParamGroup group, Shape shape, Scalar value);

  const Tensor<Scalar>& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  Index scalar_count() const;

  void zero_grad();

  /// Deep copy of all values, for best-checkpoint retention.
  std::vector<Matrix<Scalar>> snapshot() const;
  void restore(const std::vector<Matrix<Scalar>>& values);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace ncdre
