#include "csisense/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "csisense/error.hpp"

namespace csisense::nn {
namespace {

constexpr char kMagic[4] = {'C', 'K', 'P', 'T'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class ByteReader {
 public:
  ByteReader(const std::uint8_t* bytes, std::size_t size)
      : bytes_(bytes), size_(size) {}

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

  std::uint64_t read_u64() {
    require(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(bytes_[offset_ + i]) << (8 * i);
    offset_ += 8;
    return v;
  }

  double read_f64() { return std::bit_cast<double>(read_u64()); }

  std::size_t remaining() const { return size_ - offset_; }

 private:
  const std::uint8_t* bytes_;
  std::size_t size_;
  std::size_t offset_ = 0;
};

std::vector<std::uint8_t> serialize(const std::vector<NamedTensor>& tensors) {
  if (tensors.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw ValidationError("checkpoint tensor count exceeds the u32 field");
  }
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& nt : tensors) {
    if (nt.name.empty() ||
        nt.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw ValidationError("checkpoint tensor name length is out of range");
    }
    if (nt.tensor.ndim() > 255) {
      throw ValidationError("checkpoint tensor rank exceeds the u8 field");
    }
    if (nt.tensor.numel() == 0) {
      throw ValidationError("checkpoint tensor '" + nt.name + "' is empty");
    }
    put_u16(out, static_cast<std::uint16_t>(nt.name.size()));
    out.insert(out.end(), nt.name.begin(), nt.name.end());
    out.push_back(static_cast<std::uint8_t>(nt.tensor.ndim()));
    for (std::size_t i = 0; i < nt.tensor.ndim(); ++i) {
      put_u64(out, nt.tensor.dim(i));
    }
    for (std::size_t i = 0; i < nt.tensor.numel(); ++i) {
      put_f64(out, nt.tensor[i]);
    }
  }
  return out;
}

std::vector<NamedTensor> parse(const std::uint8_t* bytes, std::size_t size) {
  ByteReader reader(bytes, size);
  char magic[4];
  reader.read_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("not a checkpoint container (bad magic)");
  }
  const std::uint16_t version = reader.read_u16();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version));
  }
  const std::uint32_t count = reader.read_u32();
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint16_t name_len = reader.read_u16();
    if (name_len == 0) {
      throw FormatError("checkpoint tensor name is empty");
    }
    std::string name(name_len, '\0');
    reader.read_bytes(name.data(), name_len);
    reader.require(1);
    std::uint8_t rank = 0;
    reader.read_bytes(&rank, 1);
    if (rank == 0) {
      throw FormatError("checkpoint tensor '" + name + "' has rank 0");
    }
    std::vector<std::size_t> shape(rank);
    std::uint64_t numel = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
      const std::uint64_t d = reader.read_u64();
      if (d == 0) {
        throw FormatError("checkpoint tensor '" + name +
                          "' has a zero dimension");
      }
      // Keep numel * 8 from wrapping; a stream merely shorter than the
      // promised payload is truncation, reported below as EOF.
      if (numel > std::numeric_limits<std::uint64_t>::max() / 8 / d) {
        throw FormatError("checkpoint tensor '" + name +
                          "' dimension overflow");
      }
      numel *= d;
      shape[i] = static_cast<std::size_t>(d);
    }
    reader.require(numel * 8);
    std::vector<double> payload(numel);
    for (std::size_t i = 0; i < numel; ++i) payload[i] = reader.read_f64();
    tensors.push_back({std::move(name), Tensor(std::move(shape),
                                               std::move(payload))});
  }
  if (reader.remaining() != 0) {
    throw FormatError("trailing bytes after the checkpoint payload");
  }
  return tensors;
}

std::vector<std::uint8_t> slurp(std::istream& source) {
  std::vector<std::uint8_t> bytes;
  char chunk[4096];
  while (source.read(chunk, sizeof(chunk)) || source.gcount() > 0) {
    bytes.insert(bytes.end(), chunk, chunk + source.gcount());
  }
  if (source.bad()) {
    throw IoError("failed while reading checkpoint stream", bytes.size());
  }
  return bytes;
}

}  // namespace

std::size_t write_checkpoint(const std::vector<NamedTensor>& tensors,
                             std::ostream& sink) {
  const std::vector<std::uint8_t> bytes = serialize(tensors);
  sink.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!sink) {
    throw IoError("failed while writing checkpoint stream", 0);
  }
  return bytes.size();
}

std::vector<NamedTensor> read_checkpoint(std::istream& source) {
  const std::vector<std::uint8_t> bytes = slurp(source);
  return parse(bytes.data(), bytes.size());
}

std::size_t write_checkpoint_file(const std::vector<NamedTensor>& tensors,
                                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open checkpoint file for writing: " + path, 0);
  }
  return write_checkpoint(tensors, out);
}

std::vector<NamedTensor> read_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint file: " + path, 0);
  }
  return read_checkpoint(in);
}

void load_checkpoint_into(const std::string& path,
                          std::vector<NamedTensor>& target) {
  std::vector<NamedTensor> loaded = read_checkpoint_file(path);
  std::map<std::string, const Tensor*> by_name;
  for (const NamedTensor& nt : loaded) {
    if (!by_name.emplace(nt.name, &nt.tensor).second) {
      throw FormatError("checkpoint holds duplicate tensor '" + nt.name +
                        "'");
    }
  }
  if (loaded.size() != target.size()) {
    throw FormatError("checkpoint holds " + std::to_string(loaded.size()) +
                      " tensors, model expects " +
                      std::to_string(target.size()));
  }
  for (NamedTensor& dst : target) {
    auto it = by_name.find(dst.name);
    if (it == by_name.end()) {
      throw FormatError("checkpoint is missing tensor '" + dst.name + "'");
    }
    const Tensor& src = *it->second;
    if (!src.same_shape(dst.tensor)) {
      throw FormatError("checkpoint tensor '" + dst.name +
                        "' has a mismatched shape");
    }
    for (std::size_t i = 0; i < src.numel(); ++i) dst.tensor[i] = src[i];
  }
}

}  // namespace csisense::nn
