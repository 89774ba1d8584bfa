#include "fgrlhf/matrix.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "fgrlhf/errors.hpp"

namespace fgrlhf {

void Matrix::axpy(double scale, const Matrix& other) {
  if (!same_shape(other)) throw ShapeError("axpy: shape mismatch");
  const std::size_t n = data_.size();
  for (std::size_t i = 0; i < n; ++i) data_[i] += scale * other.data_[i];
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw ParseError("matrix file truncated in header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_matrix(const std::filesystem::path& path, const Matrix& m, std::uint64_t aux) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  put_u64(out, aux);
  for (double d : m.data()) {
    put_u64(out, std::bit_cast<std::uint64_t>(d));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

LoadedMatrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for read: " + path.string());
  const std::uint64_t rows = get_u64(in);
  const std::uint64_t cols = get_u64(in);
  const std::uint64_t aux = get_u64(in);
  if (rows > (1u << 24) || cols > (1u << 24)) {
    throw ParseError("matrix file header implausibly large");
  }
  LoadedMatrix result;
  result.matrix = Matrix(static_cast<int>(rows), static_cast<int>(cols));
  result.aux = aux;
  for (double& d : result.matrix.data()) {
    d = std::bit_cast<double>(get_u64(in));
  }
  return result;
}

}  // namespace fgrlhf
