#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "csisense/csi_tensor.hpp"

namespace csisense {

inline constexpr std::uint16_t kCsitVersion = 1;

// .csit container, little-endian throughout:
//   "CSIT" | u16 version=1 | u32 T,S,M,N | f64 sample_interval |
//   S x f64 carrier freqs | T*S*M*N x (f64 re, f64 im) |
//   u32 meta_len | meta_len bytes of UTF-8 JSON (flat string map).
std::vector<std::uint8_t> serialize_csit(const CsiTensor& tensor);

// Parses one container occupying the whole buffer.  Throws FormatError on
// bad magic / unsupported version / dim overflow / trailing bytes /
// non-finite payload, IoError("unexpected EOF at offset k") on truncation.
CsiTensor parse_csit(const std::uint8_t* bytes, std::size_t size);

// Stream interface.  write_csit returns the number of bytes emitted and
// throws IoError with the failing byte offset if the sink rejects a write;
// read_csit consumes the stream to EOF and parses it as one container.
std::size_t write_csit(const CsiTensor& tensor, std::ostream& sink);
CsiTensor read_csit(std::istream& source);

// File convenience wrappers around the stream interface.
std::size_t write_csit_file(const CsiTensor& tensor, const std::string& path);
CsiTensor read_csit_file(const std::string& path);

}  // namespace csisense
