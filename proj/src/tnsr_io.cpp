#include "searchreg/tnsr_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "searchreg/errors.hpp"

namespace sreg {

static_assert(std::endian::native == std::endian::little,
              "TNSR writer assumes a little-endian host");

void write_tnsr(std::ostream& out, const Tensor<float>& t) {
  out.write("TNSR", 4);
  const std::uint32_t rank = std::uint32_t(t.rank());
  out.write(reinterpret_cast<const char*>(&rank), 4);
  for (int d : t.shape()) {
    const std::uint32_t dim = std::uint32_t(d);
    out.write(reinterpret_cast<const char*>(&dim), 4);
  }
  out.write(reinterpret_cast<const char*>(t.values().data()),
            std::streamsize(t.numel() * 4));
  if (!out) throw DataError("TNSR: write failed");
}

Tensor<float> read_tnsr(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "TNSR", 4) != 0)
    throw DataError("TNSR: bad magic");
  std::uint32_t rank = 0;
  in.read(reinterpret_cast<char*>(&rank), 4);
  if (!in || rank > 8) throw DataError("TNSR: bad rank");
  Shape shape(rank);
  std::int64_t n = 1;
  for (auto& d : shape) {
    std::uint32_t dim = 0;
    in.read(reinterpret_cast<char*>(&dim), 4);
    if (!in) throw DataError("TNSR: truncated header");
    d = int(dim);
    n *= d;
  }
  std::vector<float> values(std::size_t(n), 0.0f);
  in.read(reinterpret_cast<char*>(values.data()), std::streamsize(n * 4));
  if (in.gcount() != std::streamsize(n * 4))
    throw DataError("TNSR: expected " + std::to_string(n * 4) +
                    " payload bytes, got " + std::to_string(in.gcount()));
  return Tensor<float>::from_data(std::move(shape), std::move(values));
}

void save_tnsr(const std::string& path, const Tensor<float>& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  write_tnsr(f, t);
}

Tensor<float> load_tnsr(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  return read_tnsr(f);
}

}  // namespace sreg
