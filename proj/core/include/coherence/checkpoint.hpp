#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "coherence/params.hpp"
#include "coherence/tensor.hpp"

namespace coherence {

inline constexpr char kCheckpointMagic[4] = {'C', 'O', 'H', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { kFloat64 = 0, kInt64 = 1 };

// Versioned named-tensor container shared by every model.
//
// Layout (little-endian):
//   "COHL" | u32 version | u32 n_meta | n_meta x (str key, str value)
//   | u32 n_tensors | n_tensors x (str name, u8 dtype, u32 rank, rank x u64 dim, payload)
// where str is a u32 byte length followed by the bytes.
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::map<std::string, Tensor> tensors;
  std::map<std::string, IntTensor> int_tensors;

  const std::string& meta(const std::string& key) const;
  std::size_t meta_size(const std::string& key) const;
  double meta_double(const std::string& key) const;
  void require_kind(std::string_view kind) const;

  bool operator==(const Checkpoint&) const = default;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies parameter values (not optimizer state) into the tensor table.
void store_params(Checkpoint& checkpoint, const ParamStore& params);
// Loads every tensor whose name starts with `prefix`.
ParamStore restore_params(const Checkpoint& checkpoint, std::string_view prefix = "");
// Overwrites every parameter of `params` from the checkpoint, checking shapes.
void load_params(const Checkpoint& checkpoint, ParamStore& params);

// FNV-1a, used for config digests.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace coherence
