#pragma once

#include <string>

#include "sodyolo/model.hpp"

namespace sodyolo {

inline constexpr const char* kCheckpointMagic = "SODYOLO-CKPT-v1";

// Container layout:
//   SODYOLO-CKPT-v1
//   config <n>            followed by n "key=value" lines
//   param <name> <rank> <dims...>   followed by raw little-endian doubles and '\n'
//   buffer <name> <count>           likewise
//   end
std::string serialize_model(Model& model);
Model deserialize_model(const std::string& bytes);

void save_checkpoint(Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

// FNV-1a over the serialized form; equal hashes for bitwise-equal models.
std::uint64_t model_fingerprint(Model& model);

}  // namespace sodyolo
