#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "csisense/nn/layers.hpp"

namespace csisense::nn {

inline constexpr std::uint16_t kCheckpointVersion = 1;

// Versioned binary weight container: magic "CKPT", u16 version, u32 tensor
// count, then per tensor u16 name length + name, u8 rank, u64 dims, and the
// f64 payload.  All fields little-endian.
std::size_t write_checkpoint(const std::vector<NamedTensor>& tensors,
                             std::ostream& sink);
std::vector<NamedTensor> read_checkpoint(std::istream& source);

std::size_t write_checkpoint_file(const std::vector<NamedTensor>& tensors,
                                  const std::string& path);
std::vector<NamedTensor> read_checkpoint_file(const std::string& path);

// Strict restore: the checkpoint must hold exactly the target names, each
// with the target's shape; payloads are copied into the target buffers.
void load_checkpoint_into(const std::string& path,
                          std::vector<NamedTensor>& target);

}  // namespace csisense::nn
