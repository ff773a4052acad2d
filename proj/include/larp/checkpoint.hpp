#pragma once

#include <optional>
#include <string>

#include "larp/encoder.hpp"
#include "larp/losses.hpp"

namespace larp {

// Everything needed to resume training or run inference.
struct Checkpoint {
  EncoderState encoder;
  std::optional<Fusion> fusion;
  int stage = 0;  // last completed stage, 0 = untrained
};

// Binary layout: "LARPCKPT", u32 version, u64 header length, JSON header
// (config, shapes, ids), then little-endian float64 payload. Round trips
// are bit-exact.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Hex SHA-256 of the serialized form.
std::string checkpoint_hash(const Checkpoint& checkpoint);
std::string sha256_hex(const std::string& bytes);

}  // namespace larp
