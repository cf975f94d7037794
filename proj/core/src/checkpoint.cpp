#include "coherence/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "coherence/error.hpp"

namespace coherence {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

void put_string(std::string& out, std::string_view s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size()) {
      throw FormatError("checkpoint truncated while reading " + std::string(what) + ": expected " +
                        std::to_string(pos_ + n) + " bytes, file has " +
                        std::to_string(bytes_.size()));
    }
  }

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }

  std::string get_string(const char* what) {
    const auto n = get<std::uint32_t>(what);
    need(n, what);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  std::string_view raw(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t position() const { return pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void put_shape(std::string& out, const Shape& shape) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put<std::uint64_t>(out, d);
}

}  // namespace

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw FormatError("checkpoint metadata missing key '" + key + "'");
  return it->second;
}

std::size_t Checkpoint::meta_size(const std::string& key) const {
  return static_cast<std::size_t>(std::stoull(meta(key)));
}

double Checkpoint::meta_double(const std::string& key) const { return std::stod(meta(key)); }

void Checkpoint::require_kind(std::string_view kind) const {
  const std::string& actual = meta("kind");
  if (actual != kind) {
    throw FormatError("checkpoint holds model kind '" + actual + "', expected '" +
                      std::string(kind) + "'");
  }
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  std::string out(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.metadata.size()));
  for (const auto& [k, v] : checkpoint.metadata) {
    put_string(out, k);
    put_string(out, v);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.tensors.size() +
                                                     checkpoint.int_tensors.size()));
  for (const auto& [name, t] : checkpoint.tensors) {
    put_string(out, name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(DType::kFloat64));
    put_shape(out, t.shape);
    for (double v : t.data) put<double>(out, v);
  }
  for (const auto& [name, t] : checkpoint.int_tensors) {
    put_string(out, name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(DType::kInt64));
    put_shape(out, t.shape);
    for (std::int64_t v : t.data) put<std::int64_t>(out, v);
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  const auto magic = in.raw(4, "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("not a checkpoint: bad magic bytes");
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) +
                      " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  const auto n_meta = in.get<std::uint32_t>("metadata count");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = in.get_string("metadata key");
    ck.metadata[k] = in.get_string("metadata value");
  }
  const auto n_tensors = in.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = in.get_string("tensor name");
    const auto dtype = in.get<std::uint8_t>("tensor dtype");
    const auto rank = in.get<std::uint32_t>("tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(in.get<std::uint64_t>("tensor shape"));
    const std::size_t n = shape_size(shape);
    if (dtype == static_cast<std::uint8_t>(DType::kFloat64)) {
      in.need(n * 8, "tensor payload");
      Tensor t(shape);
      for (double& v : t.data) v = in.get<double>("tensor payload");
      ck.tensors.emplace(std::move(name), std::move(t));
    } else if (dtype == static_cast<std::uint8_t>(DType::kInt64)) {
      in.need(n * 8, "tensor payload");
      IntTensor t{shape, std::vector<std::int64_t>(n)};
      for (auto& v : t.data) v = in.get<std::int64_t>("tensor payload");
      ck.int_tensors.emplace(std::move(name), std::move(t));
    } else {
      throw FormatError("tensor '" + name + "' has unknown dtype tag " + std::to_string(dtype));
    }
  }
  if (!in.done()) {
    throw FormatError("checkpoint has " + std::to_string(bytes.size() - in.position()) +
                      " trailing bytes");
  }
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  const std::string bytes = serialize_checkpoint(checkpoint);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_checkpoint(buffer.str());
}

void store_params(Checkpoint& checkpoint, const ParamStore& params) {
  for (const auto& [name, p] : params.items()) checkpoint.tensors[name] = p.value;
}

ParamStore restore_params(const Checkpoint& checkpoint, std::string_view prefix) {
  ParamStore params;
  for (const auto& [name, t] : checkpoint.tensors) {
    if (name.compare(0, prefix.size(), prefix) == 0) params.add(name, t);
  }
  return params;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void load_params(const Checkpoint& ck, ParamStore& params) {
  for (auto& [name, p] : params.items()) {
    auto it = ck.tensors.find(name);
    if (it == ck.tensors.end()) throw FormatError("checkpoint missing tensor '" + name + "'");
    if (it->second.shape != p.value.shape) {
      throw FormatError("tensor '" + name + "' has shape " + shape_string(it->second.shape) +
                        ", expected " + shape_string(p.value.shape));
    }
    p.value = it->second;
  }
}

}  // namespace coherence
