#include "csisense/csit_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "csisense/error.hpp"

namespace csisense {
namespace {

constexpr char kMagic[4] = {'C', 'S', 'I', 'T'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

// Sequential little-endian reader that reports truncation with the offset
// at which the data ran out.
class ByteReader {
 public:
  ByteReader(const std::uint8_t* bytes, std::size_t size)
      : bytes_(bytes), size_(size) {}

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return size_ - offset_; }

  void require(std::size_t n) const {
    if (size_ - offset_ < n) {
      throw IoError("unexpected EOF", size_);
    }
  }

  void read_bytes(void* dst, std::size_t n) {
    require(n);
    std::memcpy(dst, bytes_ + offset_, n);
    offset_ += n;
  }

  std::uint16_t read_u16() {
    require(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[offset_]) |
                      static_cast<std::uint16_t>(bytes_[offset_ + 1]) << 8;
    offset_ += 2;
    return v;
  }

  std::uint32_t read_u32() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(bytes_[offset_ + i]) << (8 * i);
    offset_ += 4;
    return v;
  }

  double read_f64() {
    require(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(bytes_[offset_ + i]) << (8 * i);
    offset_ += 8;
    return std::bit_cast<double>(bits);
  }

 private:
  const std::uint8_t* bytes_;
  std::size_t size_;
  std::size_t offset_ = 0;
};

std::string meta_to_json(const std::map<std::string, std::string>& meta) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : meta) j[k] = v;
  return j.dump();
}

std::map<std::string, std::string> meta_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("container metadata is not valid JSON: ") +
                      e.what());
  }
  if (!j.is_object()) {
    throw FormatError("container metadata must be a JSON object");
  }
  std::map<std::string, std::string> meta;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) {
      throw FormatError("container metadata value for \"" + k +
                        "\" must be a string");
    }
    meta[k] = v.get<std::string>();
  }
  return meta;
}

}  // namespace

std::vector<std::uint8_t> serialize_csit(const CsiTensor& tensor) {
  tensor.validate();
  constexpr auto dim_max = std::numeric_limits<std::uint32_t>::max();
  if (tensor.t() > dim_max || tensor.s() > dim_max || tensor.m() > dim_max ||
      tensor.n() > dim_max) {
    throw ValidationError("tensor dimension exceeds the u32 container field");
  }

  const std::string meta = meta_to_json(tensor.meta);
  if (meta.size() > dim_max) {
    throw ValidationError("tensor metadata exceeds the u32 container field");
  }

  std::vector<std::uint8_t> out;
  out.reserve(38 + 8 * tensor.s() + 16 * tensor.size() + 4 + meta.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kCsitVersion);
  put_u32(out, static_cast<std::uint32_t>(tensor.t()));
  put_u32(out, static_cast<std::uint32_t>(tensor.s()));
  put_u32(out, static_cast<std::uint32_t>(tensor.m()));
  put_u32(out, static_cast<std::uint32_t>(tensor.n()));
  put_f64(out, tensor.sample_interval);
  for (double f : tensor.carrier_freqs) put_f64(out, f);
  for (const auto& z : tensor.data()) {
    put_f64(out, z.real());
    put_f64(out, z.imag());
  }
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out.insert(out.end(), meta.begin(), meta.end());
  return out;
}

CsiTensor parse_csit(const std::uint8_t* bytes, std::size_t size) {
  ByteReader in(bytes, size);

  char magic[4];
  in.read_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad magic: not a CSIT container");
  }
  const std::uint16_t version = in.read_u16();
  if (version != kCsitVersion) {
    throw FormatError("unsupported version " + std::to_string(version) +
                      " (expected " + std::to_string(kCsitVersion) + ")");
  }

  const std::uint32_t t = in.read_u32();
  const std::uint32_t s = in.read_u32();
  const std::uint32_t m = in.read_u32();
  const std::uint32_t n = in.read_u32();
  if (t == 0 || s == 0 || m == 0 || n == 0) {
    throw FormatError("container declares a zero dimension");
  }
  // Declared sizes must fit the stream before anything is allocated; the
  // product is computed in steps so oversized dims cannot wrap around.
  std::uint64_t total = 1;
  for (std::uint64_t d : {t, s, m, n}) {
    if (total > std::numeric_limits<std::uint64_t>::max() / (16 * d)) {
      throw FormatError("dim overflow: T*S*M*N*16 does not fit in 64 bits");
    }
    total *= d;
  }
  // A payload larger than what the stream holds is a truncation, reported
  // with the offset at which the data ran out.
  if (total * 16 > in.remaining() || 8 * std::uint64_t{s} > in.remaining()) {
    throw IoError("unexpected EOF", size);
  }

  CsiTensor tensor(t, s, m, n);
  tensor.sample_interval = in.read_f64();
  tensor.carrier_freqs.resize(s);
  for (std::uint32_t i = 0; i < s; ++i) tensor.carrier_freqs[i] = in.read_f64();
  for (auto& z : tensor.data()) {
    const double re = in.read_f64();
    const double im = in.read_f64();
    if (!std::isfinite(re) || !std::isfinite(im)) {
      throw FormatError("container payload contains a non-finite value near "
                        "offset " + std::to_string(in.offset() - 16));
    }
    z = {re, im};
  }

  const std::uint32_t meta_len = in.read_u32();
  if (meta_len > in.remaining()) {
    throw IoError("unexpected EOF", size);
  }
  std::string meta_text(meta_len, '\0');
  in.read_bytes(meta_text.data(), meta_len);
  tensor.meta = meta_from_json(meta_text);

  if (in.remaining() != 0) {
    throw FormatError(std::to_string(in.remaining()) +
                      " trailing bytes beyond the declared container length");
  }
  tensor.validate();
  return tensor;
}

std::size_t write_csit(const CsiTensor& tensor, std::ostream& sink) {
  const std::vector<std::uint8_t> bytes = serialize_csit(tensor);
  // Chunked writes keep the failing offset meaningful on a broken sink.
  constexpr std::size_t kChunk = 1 << 20;
  std::size_t written = 0;
  while (written < bytes.size()) {
    const std::size_t n = std::min(kChunk, bytes.size() - written);
    sink.write(reinterpret_cast<const char*>(bytes.data()) +
                   static_cast<std::streamsize>(written),
               static_cast<std::streamsize>(n));
    if (!sink) {
      throw IoError("sink write failure", written);
    }
    written += n;
  }
  sink.flush();
  if (!sink) {
    throw IoError("sink write failure", written);
  }
  return written;
}

CsiTensor read_csit(std::istream& source) {
  std::vector<std::uint8_t> bytes;
  char buf[1 << 16];
  while (source.read(buf, sizeof(buf)) || source.gcount() > 0) {
    bytes.insert(bytes.end(), buf, buf + source.gcount());
  }
  if (source.bad()) {
    throw IoError("source read failure", bytes.size());
  }
  return parse_csit(bytes.data(), bytes.size());
}

std::size_t write_csit_file(const CsiTensor& tensor, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open \"" + path + "\" for writing", 0);
  }
  return write_csit(tensor, out);
}

CsiTensor read_csit_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open \"" + path + "\" for reading", 0);
  }
  return read_csit(in);
}

}  // namespace csisense
