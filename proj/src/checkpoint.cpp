#include "ncdre/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ncdre {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

class Reader {
 public:
  Reader(std::istream& is, std::string where) : is_(is), where_(std::move(where)) {}

  void bytes(char* out, std::size_t n) {
    is_.read(out, static_cast<std::streamsize>(n));
    if (!is_) throw CheckpointError(where_ + ": truncated archive");
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::string str(std::uint64_t n) {
    if (n > (1ull << 32)) throw CheckpointError(where_ + ": implausible string length");
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& is_;
  std::string where_;
};

}  // namespace

const NamedArray* Archive::find(std::string_view name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(os, kCheckpointVersion);
  put_u64(os, archive.meta.size());
  os.write(archive.meta.data(), static_cast<std::streamsize>(archive.meta.size()));
  put_u64(os, archive.sections.size());
  for (const auto& s : archive.sections) {
    put_u32(os, static_cast<std::uint32_t>(s.name.size()));
    os.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
    put_u32(os, static_cast<std::uint32_t>(s.shape.size()));
    std::uint64_t count = 1;
    for (Index d : s.shape) {
      put_u64(os, static_cast<std::uint64_t>(d));
      count *= static_cast<std::uint64_t>(d);
    }
    if (count != s.data.size()) {
      throw CheckpointError("section " + s.name + ": payload does not match shape " +
                            to_string(s.shape));
    }
    for (double v : s.data) put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw CheckpointError("write failed for " + path.string());
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open " + path.string());
  Reader in(is, path.string());
  char magic[8];
  in.bytes(magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw CheckpointError(path.string() + ": not a checkpoint (bad magic)");
  }
  const auto version = in.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported version " + std::to_string(version));
  }
  Archive archive;
  archive.meta = in.str(in.u64());
  const auto count = in.u64();
  for (std::uint64_t k = 0; k < count; ++k) {
    NamedArray s;
    s.name = in.str(in.u32());
    const auto rank = in.u32();
    std::uint64_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto d = in.u64();
      s.shape.push_back(static_cast<Index>(d));
      n *= d;
    }
    if (n > (1ull << 34)) throw CheckpointError(path.string() + ": implausible section size");
    s.data.resize(n);
    for (auto& v : s.data) v = std::bit_cast<double>(in.u64());
    archive.sections.push_back(std::move(s));
  }
  return archive;
}

template <typename Scalar>
NamedArray to_named_array(const std::string& name, const Tensor<Scalar>& tensor) {
  NamedArray s{name, tensor.shape(), {}};
  s.data.resize(static_cast<std::size_t>(tensor.size()));
  const Scalar* src = tensor.value().data();
  for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] = static_cast<double>(src[i]);
  return s;
}

template <typename Scalar>
std::vector<NamedArray> export_parameters(const ParameterStore<Scalar>& params) {
  std::vector<NamedArray> out;
  out.reserve(params.size());
  for (const auto& e : params.entries()) out.push_back(to_named_array(e.name, e.tensor));
  return out;
}

template <typename Scalar>
void import_parameters(const Archive& archive, ParameterStore<Scalar>& params) {
  for (const auto& e : params.entries()) {
    const NamedArray* s = archive.find(e.name);
    if (s == nullptr) throw CheckpointError("checkpoint lacks parameter " + e.name);
    if (s->shape != e.tensor.shape()) {
      throw CheckpointError("parameter " + e.name + ": checkpoint shape " + to_string(s->shape) +
                            " vs model shape " + to_string(e.tensor.shape()));
    }
    auto tensor = e.tensor;
    Scalar* dst = tensor.mutable_value().data();
    for (std::size_t i = 0; i < s->data.size(); ++i) dst[i] = static_cast<Scalar>(s->data[i]);
  }
}

template NamedArray to_named_array(const std::string&, const Tensor<double>&);
template NamedArray to_named_array(const std::string&, const Tensor<float>&);
template std::vector<NamedArray> export_parameters(const ParameterStore<double>&);
template std::vector<NamedArray> export_parameters(const ParameterStore<float>&);
template void import_parameters(const Archive&, ParameterStore<double>&);
template void import_parameters(const Archive&, ParameterStore<float>&);

}  // namespace ncdre
