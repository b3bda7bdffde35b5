#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetplan/core/error.hpp"
#include "hetplan/nn/tensor.hpp"

namespace hetplan::nn {

// Binary layout, all integers little-endian:
//   magic "HPCK" | u32 version | u64 header length | header JSON (sorted keys)
//   u64 tensor count | per tensor: u32 name length, name bytes, u32 rank,
//   u64 dims..., f64 values...
inline constexpr char kCheckpointMagic[4] = {'H', 'P', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json header = nlohmann::json::object();
  std::vector<ParamTensor> tensors;

  const ParamTensor& find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    throw FormatError("checkpoint has no tensor named '" + name + "'");
  }
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw FormatError("checkpoint truncated");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint truncated");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  std::string out(kCheckpointMagic, 4);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  const std::string header = ck.header.dump();
  detail::put<std::uint64_t>(out, header.size());
  out += header;
  detail::put<std::uint64_t>(out, ck.tensors.size());
  for (const auto& t : ck.tensors) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) detail::put<std::uint64_t>(out, d);
    for (double v : t.values) detail::put<double>(out, v);
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes) {
  detail::Reader in(bytes);
  if (in.take(4) != std::string(kCheckpointMagic, 4)) throw FormatError("not a checkpoint file");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto header_len = in.get<std::uint64_t>();
  try {
    ck.header = nlohmann::json::parse(in.take(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  const auto count = in.get<std::uint64_t>();
  for (std::uint64_t k = 0; k < count; ++k) {
    ParamTensor t;
    t.name = in.take(in.get<std::uint32_t>());
    const auto rank = in.get<std::uint32_t>();
    for (std::uint32_t r = 0; r < rank; ++r) t.shape.push_back(in.get<std::uint64_t>());
    t.values.resize(numel(t.shape));
    for (double& v : t.values) v = in.get<double>();
    t.grad.assign(t.values.size(), 0.0);
    ck.tensors.push_back(std::move(t));
  }
  if (!in.done()) throw FormatError("trailing bytes after checkpoint tensors");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  const std::string bytes = serialize_checkpoint(ck);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

/// Copies values of same-named tensors from a checkpoint, checking shapes.
inline void assign_params(const Checkpoint& ck, const std::vector<ParamTensor*>& params) {
  for (ParamTensor* p : params) {
    const ParamTensor& src = ck.find(p->name);
    if (src.shape != p->shape) {
      throw FormatError("tensor '" + p->name + "' has shape " + shape_str(src.shape) +
                        ", expected " + shape_str(p->shape));
    }
    p->values = src.values;
  }
}

}  // namespace hetplan::nn
