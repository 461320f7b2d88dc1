#pragma once

#include "ncdre/parameters.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ncdre {

/// Binary tensor archive:
///   "NCDRECKP" | u32 version | u64 meta length | meta bytes |
///   u64 section count | sections...
/// Each section is u32 name length | name | u32 rank | u64 dims[rank] |
/// f64 payload in row-major order. All integers and floats little-endian.
inline constexpr char kCheckpointMagic[8] = {'N', 'C', 'D', 'R', 'E', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

struct Archive {
  std::string meta;  // free-form text, JSON by convention
  std::vector<NamedArray> sections;

  const NamedArray* find(std::string_view name) const;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

template <typename Scalar>
NamedArray to_named_array(const std::string& name, const Tensor<Scalar>& tensor);

template <typename Scalar>
std::vector<NamedArray> export_parameters(const ParameterStore<Scalar>& params);

/// Copies archive payloads into same-named parameters. Every parameter must
/// be present with a matching shape.
template <typename Scalar>
void import_parameters(const Archive& archive, ParameterStore<Scalar>& params);

}  // namespace ncdre
