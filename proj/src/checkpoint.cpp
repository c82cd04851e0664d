#include "dib/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace dib {

namespace {

constexpr char kMagic[8] = {'D', 'I', 'B', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint64_t get_u64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 8))
    throw CheckpointError("checkpoint: truncated integer field");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace

void write_checkpoint(std::ostream& os, const ParamStore& store) {
  os.write(kMagic, sizeof(kMagic));
  put_u64(os, store.size());
  for (const auto& [path, t] : store.params()) {
    put_u64(os, path.size());
    os.write(path.data(), static_cast<std::streamsize>(path.size()));
    put_u64(os, t.rank());
    for (auto s : t.shape()) put_u64(os, s);
    for (double v : t.values()) put_f64(os, v);
  }
  if (!os) throw CheckpointError("checkpoint: write failed");
}

ParamStore read_checkpoint(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError("checkpoint: bad magic (expected DIBCKPT1)");
  const std::uint64_t count = get_u64(is);
  ParamStore store;
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t len = get_u64(is);
    if (len > (1u << 20)) throw CheckpointError("checkpoint: implausible path length");
    std::string path(len, '\0');
    if (!is.read(path.data(), static_cast<std::streamsize>(len)))
      throw CheckpointError("checkpoint: truncated path");
    const std::uint64_t rank = get_u64(is);
    if (rank > 8) throw CheckpointError("checkpoint: implausible rank for '" + path + "'");
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& s : shape) {
      s = get_u64(is);
      n *= s;
    }
    std::vector<double> data(n);
    for (auto& v : data) v = get_f64(is);
    store.add(path, Tensor(std::move(shape), std::move(data)));
  }
  return store;
}

void save_checkpoint(const std::filesystem::path& file, const ParamStore& store) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("checkpoint: cannot open " + file.string());
  write_checkpoint(os, store);
}

ParamStore load_checkpoint(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw CheckpointError("checkpoint: cannot open " + file.string());
  return read_checkpoint(is);
}

}  // namespace dib
