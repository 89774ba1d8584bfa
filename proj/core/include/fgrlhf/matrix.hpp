#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fgrlhf {

// Dense row-major matrix of doubles. Deliberately minimal: the linear
// models here only need indexed access, axpy-style updates, and exact
// binary round-trips.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v) { data_.assign(data_.size(), v); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  // this += scale * other. Shapes must match.
  void axpy(double scale, const Matrix& other);

  bool all_finite() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Binary matrix file: three little-endian uint64 header words
// (rows, cols, aux) followed by rows*cols little-endian IEEE-754 doubles
// in row-major order. aux carries a caller-defined integer (the context
// window for policy weights). Round-trips are bit-exact.
void save_matrix(const std::filesystem::path& path, const Matrix& m, std::uint64_t aux);

struct LoadedMatrix {
  Matrix matrix;
  std::uint64_t aux = 0;
};

LoadedMatrix load_matrix(const std::filesystem::path& path);

}  // namespace fgrlhf
