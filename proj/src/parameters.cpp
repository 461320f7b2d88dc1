#include "ncdre/parameters.hpp"

#include <stdexcept>

namespace ncdre {

std::string_view group_name(ParamGroup group) {
  switch (group) {
    case ParamGroup::Encoder:
      return "encoder";
    case ParamGroup::IDecoder:
      return "i_decoder";
    case ParamGroup::Classifier:
      return "classifier";
  }
  return "unknown";
}

template <typename Scalar>
Tensor<Scalar> ParameterStore<Scalar>::add(std::string name, ParamGroup group,
                                           Matrix<Scalar> init, Shape shape) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  auto t = Tensor<Scalar>::parameter(std::move(init), std::move(shape));
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), group, t});
  return t;
}

template <typename Scalar>
Tensor<Scalar> ParameterStore<Scalar>::add_normal(std::string name, ParamGroup group, Shape shape,
                                                  double stddev, std::mt19937_64& rng) {
  const auto [r, c] = storage_extent(shape);
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix<Scalar> m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(normal(rng));
  return add(std::move(name), group, std::move(m), std::move(shape));
}

template <typename Scalar>
Tensor<Scalar> ParameterStore<Scalar>::add_constant(std::string name, ParamGroup group,
                                                    Shape shape, Scalar value) {
  const auto [r, c] = storage_extent(shape);
  return add(std::move(name), group, Matrix<Scalar>::Constant(r, c, value), std::move(shape));
}

template <typename Scalar>
const Tensor<Scalar>& ParameterStore<Scalar>::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return entries_[it->second].tensor;
}

template <typename Scalar>
bool ParameterStore<Scalar>::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

template <typename Scalar>
Index ParameterStore<Scalar>::scalar_count() const {
  Index n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

template <typename Scalar>
void ParameterStore<Scalar>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename Scalar>
std::vector<Matrix<Scalar>> ParameterStore<Scalar>::snapshot() const {
  std::vector<Matrix<Scalar>> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.tensor.value());
  return out;
}

template <typename Scalar>
void ParameterStore<Scalar>::restore(const std::vector<Matrix<Scalar>>& values) {
  if (values.size() != entries_.size()) throw std::invalid_argument("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) entries_[i].tensor.mutable_value() = values[i];
}

template class ParameterStore<double>;
template class ParameterStore<float>;

}  // namespace ncdre
