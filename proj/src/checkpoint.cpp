#include <bit>
#include <cstring>
#include <fstream>

#include "convrank/errors.hpp"
#include "convrank/nn.hpp"

// CVRK checkpoint layout (all integers little-endian):
//   4 bytes magic "CVRK"
//   u32 format version
//   u64 JSON length, then that many bytes of UTF-8 JSON (meta block)
//   u32 array count
//   per array: u32 name length, name bytes, u64 element count, f32 elements

namespace convrank::nn {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <class T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw TruncatedError(std::string("checkpoint truncated while reading ") + what);
  return value;
}

std::string read_bytes(std::ifstream& in, std::size_t n, const char* what) {
  std::string buf(n, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(n));
  if (!in) throw TruncatedError(std::string("checkpoint truncated while reading ") + what);
  return buf;
}

}  // namespace

const std::vector<float>& Checkpoint::array(const std::string& name) const {
  for (const auto& [n, data] : arrays)
    if (n == name) return data;
  throw CheckpointError("checkpoint has no array named '" + name + "'");
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);

  out.write(kCheckpointMagic, 4);
  write_pod<std::uint32_t>(out, ckpt.version);

  const std::string meta = ckpt.meta.dump();
  write_pod<std::uint64_t>(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));

  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& [name, data] : ckpt.arrays) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint64_t>(out, data.size());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
  }
  if (!out) throw DataError("write failure on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in) throw TruncatedError("checkpoint truncated while reading magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw BadMagicError("not a CVRK checkpoint: " + path);

  Checkpoint ckpt;
  ckpt.version = read_pod<std::uint32_t>(in, "version");
  if (ckpt.version != kCheckpointVersion)
    throw BadVersionError("unsupported checkpoint version " + std::to_string(ckpt.version) +
                          " (reader supports " + std::to_string(kCheckpointVersion) + ")");

  const auto meta_len = read_pod<std::uint64_t>(in, "meta length");
  const std::string meta = read_bytes(in, meta_len, "meta block");
  ckpt.meta = nlohmann::json::parse(meta, nullptr, false);
  if (ckpt.meta.is_discarded()) throw CheckpointError("checkpoint meta block is not valid JSON");

  const auto n_arrays = read_pod<std::uint32_t>(in, "array count");
  ckpt.arrays.reserve(n_arrays);
  for (std::uint32_t a = 0; a < n_arrays; ++a) {
    const auto name_len = read_pod<std::uint32_t>(in, "array name length");
    std::string name = read_bytes(in, name_len, "array name");
    const auto count = read_pod<std::uint64_t>(in, "array length");
    std::vector<float> data(count);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw TruncatedError("checkpoint truncated inside array '" + name + "'");
    ckpt.arrays.emplace_back(std::move(name), std::move(data));
  }
  return ckpt;
}

std::vector<float> to_f32(const double* data, Eigen::Index n) {
  std::vector<float> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(data[i]);
  return out;
}

void from_f32(const std::vector<float>& src, double* data, Eigen::Index n) {
  if (static_cast<Eigen::Index>(src.size()) != n)
    throw CheckpointError("checkpoint array size mismatch: have " + std::to_string(src.size()) +
                          ", expected " + std::to_string(n));
  for (Eigen::Index i = 0; i < n; ++i) data[i] = static_cast<double>(src[static_cast<std::size_t>(i)]);
}

void snap_f32(const std::vector<ParamView>& params) {
  for (const auto& p : params)
    for (Eigen::Index i = 0; i < p.size; ++i)
      p.data[i] = static_cast<double>(static_cast<float>(p.data[i]));
}

}  // namespace convrank::nn
