#include "searchreg/pgm_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "searchreg/errors.hpp"

namespace sreg {
namespace {

// Skips whitespace and '#' comment lines between header tokens.
int read_header_int(std::istream& in, const char* what) {
  for (;;) {
    const int c = in.peek();
    if (c == EOF) throw DataError(std::string("PGM: truncated header before ") + what);
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    break;
  }
  int value = 0;
  if (!(in >> value))
    throw DataError(std::string("PGM: bad ") + what + " in header");
  return value;
}

struct RawPgm {
  int rows, cols, maxval;
  std::vector<unsigned char> bytes;
};

RawPgm read_p5(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '5')
    throw DataError("PGM: not a binary P5 file: " + path);
  RawPgm raw;
  raw.cols = read_header_int(in, "width");
  raw.rows = read_header_int(in, "height");
  raw.maxval = read_header_int(in, "maxval");
  if (raw.cols <= 0 || raw.rows <= 0)
    throw DataError("PGM: non-positive dimensions in " + path);
  if (raw.maxval > 255)
    throw DataError("PGM: 16-bit payload (maxval " + std::to_string(raw.maxval) +
                    ") unsupported: " + path);
  if (raw.maxval <= 0) throw DataError("PGM: bad maxval in " + path);
  in.get();  // single whitespace after maxval
  const std::size_t expected = std::size_t(raw.rows) * raw.cols;
  raw.bytes.resize(expected);
  in.read(reinterpret_cast<char*>(raw.bytes.data()), std::streamsize(expected));
  if (std::size_t(in.gcount()) != expected)
    throw DataError("PGM: expected " + std::to_string(expected) +
                    " payload bytes, got " + std::to_string(in.gcount()) +
                    ": " + path);
  return raw;
}

PadRecord pad_to_multiple_of_4(int rows, int cols, int& padded_rows,
                               int& padded_cols) {
  PadRecord pad;
  pad.right = (4 - cols % 4) % 4;
  pad.bottom = (4 - rows % 4) % 4;
  padded_rows = rows + pad.bottom;
  padded_cols = cols + pad.right;
  return pad;
}

}  // namespace

LoadedImage load_pgm(const std::string& path) {
  const RawPgm raw = read_p5(path);
  LoadedImage out;
  out.orig_rows = raw.rows;
  out.orig_cols = raw.cols;
  int rows, cols;
  out.pad = pad_to_multiple_of_4(raw.rows, raw.cols, rows, cols);
  std::vector<float> v(std::size_t(rows) * cols);
  const float inv = 1.0f / float(raw.maxval);
  for (int r = 0; r < rows; ++r) {
    const int sr = std::min(r, raw.rows - 1);
    for (int c = 0; c < cols; ++c) {
      const int sc = std::min(c, raw.cols - 1);
      v[std::size_t(r) * cols + c] =
          float(raw.bytes[std::size_t(sr) * raw.cols + sc]) * inv;
    }
  }
  out.image = Tensor<float>::from_data({1, rows, cols}, std::move(v));
  return out;
}

LoadedMask load_mask(const std::string& path) {
  const RawPgm raw = read_p5(path);
  LoadedMask out;
  out.orig_rows = raw.rows;
  out.orig_cols = raw.cols;
  int rows, cols;
  out.pad = pad_to_multiple_of_4(raw.rows, raw.cols, rows, cols);
  out.mask.rows = rows;
  out.mask.cols = cols;
  out.mask.labels.resize(std::size_t(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    const int sr = std::min(r, raw.rows - 1);
    for (int c = 0; c < cols; ++c) {
      const int sc = std::min(c, raw.cols - 1);
      out.mask.labels[std::size_t(r) * cols + c] =
          raw.bytes[std::size_t(sr) * raw.cols + sc];
    }
  }
  return out;
}

void save_pgm(const std::string& path, const Tensor<float>& image,
              const PadRecord& crop) {
  if (image.rank() != 3 || image.dim(0) != 1)
    throw std::invalid_argument("save_pgm: image must be [1,H,W]");
  const int rows = image.dim(1), cols = image.dim(2);
  const int out_rows = rows - crop.top - crop.bottom;
  const int out_cols = cols - crop.left - crop.right;
  if (out_rows <= 0 || out_cols <= 0)
    throw std::invalid_argument("save_pgm: crop leaves nothing");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << "P5\n" << out_cols << " " << out_rows << "\n255\n";
  const auto v = image.values();
  std::vector<unsigned char> line(std::size_t(out_cols), 0);
  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < out_cols; ++c) {
      const float x = v[std::size_t(r + crop.top) * cols + (c + crop.left)];
      line[std::size_t(c)] =
          (unsigned char)(std::lround(std::clamp(x, 0.0f, 1.0f) * 255.0f));
    }
    f.write(reinterpret_cast<const char*>(line.data()), out_cols);
  }
  if (!f) throw DataError("PGM: write failed: " + path);
}

void save_mask_pgm(const std::string& path, const LabelMask& mask,
                   const PadRecord& crop) {
  const int out_rows = mask.rows - crop.top - crop.bottom;
  const int out_cols = mask.cols - crop.left - crop.right;
  if (out_rows <= 0 || out_cols <= 0)
    throw std::invalid_argument("save_mask_pgm: crop leaves nothing");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << "P5\n" << out_cols << " " << out_rows << "\n255\n";
  std::vector<unsigned char> line(std::size_t(out_cols), 0);
  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < out_cols; ++c)
      line[std::size_t(c)] = (unsigned char)std::clamp<std::int32_t>(
          mask.at(r + crop.top, c + crop.left), 0, 255);
    f.write(reinterpret_cast<const char*>(line.data()), out_cols);
  }
  if (!f) throw DataError("PGM: write failed: " + path);
}

}  // namespace sreg
