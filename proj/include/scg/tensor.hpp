#pragma once

// Third-order tensor algebra over frontal slices: the mixing-matrix
// transform along time, facewise products, and their composition.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace scg {

// Dense n1 x n2 x T tensor. Storage is slice-major with each frontal slice
// row-major, so element (i, j, t) lives at t*n1*n2 + i*n2 + j.
class DenseTensor3 {
 public:
  DenseTensor3() = default;
  DenseTensor3(std::size_t rows, std::size_t cols, std::size_t slices, double fill = 0.0);
  DenseTensor3(std::size_t rows, std::size_t cols, std::size_t slices, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t slices() const { return slices_; }
  std::size_t size() const { return values_.size(); }
  std::size_t slice_size() const { return rows_ * cols_; }

  double& operator()(std::size_t i, std::size_t j, std::size_t t) {
    return values_[t * rows_ * cols_ + i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t t) const {
    return values_[t * rows_ * cols_ + i * cols_ + j];
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> slice(std::size_t t) { return values().subspan(t * slice_size(), slice_size()); }
  std::span<const double> slice(std::size_t t) const {
    return values().subspan(t * slice_size(), slice_size());
  }
  std::span<double> row(std::size_t i, std::size_t t) {
    return values().subspan(t * slice_size() + i * cols_, cols_);
  }
  std::span<const double> row(std::size_t i, std::size_t t) const {
    return values().subspan(t * slice_size() + i * cols_, cols_);
  }

  bool same_shape(const DenseTensor3& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && slices_ == other.slices_;
  }

  DenseTensor3& operator+=(const DenseTensor3& other);
  DenseTensor3& operator*=(double factor);
  // this += factor * other
  void add_scaled(const DenseTensor3& other, double factor);

  friend bool operator==(const DenseTensor3&, const DenseTensor3&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t slices_ = 0;
  std::vector<double> values_;
};

double frobenius_squared(const DenseTensor3& x);
double max_abs_difference(const DenseTensor3& a, const DenseTensor3& b);
bool all_finite(const DenseTensor3& x);

// T x T matrix acting on the slice axis, stored as a band of radius
// `radius()`: entry (t, i) may be nonzero only when |t - i| <= radius.
// Indices are 0-based.
class MixingMatrix {
 public:
  MixingMatrix() = default;

  // Temporal averaging window: row t spreads weight
  // 1 / min(2K+1, T-t+K+1, t+K) (1-based t) over slices
  // [max(1, t-K), min(T, t+K)]. Requires 2K+1 <= T.
  static MixingMatrix build(std::size_t slices, std::size_t window);
  static MixingMatrix identity(std::size_t slices);
  // Arbitrary matrix given row-major; the band radius is inferred.
  static MixingMatrix from_dense(std::size_t slices, std::span<const double> row_major);

  std::size_t slices() const { return slices_; }
  std::size_t radius() const { return radius_; }
  std::size_t first_col(std::size_t t) const { return t >= radius_ ? t - radius_ : 0; }
  std::size_t last_col(std::size_t t) const { return t + radius_ < slices_ ? t + radius_ : slices_ - 1; }

  double at(std::size_t t, std::size_t i) const;
  double row_sum(std::size_t t) const;
  MixingMatrix transposed() const;
  std::vector<double> to_dense() const;

 private:
  MixingMatrix(std::size_t slices, std::size_t radius);
  double& band(std::size_t t, std::size_t i) { return band_[t * (2 * radius_ + 1) + (i + radius_ - t)]; }
  double band(std::size_t t, std::size_t i) const {
    return band_[t * (2 * radius_ + 1) + (i + radius_ - t)];
  }

  std::size_t slices_ = 0;
  std::size_t radius_ = 0;
  std::vector<double> band_;
};

struct SliceEntry {
  std::uint32_t row;
  std::uint32_t col;
  double weight;
  friend bool operator==(const SliceEntry&, const SliceEntry&) = default;
};

// Sparse n1 x n2 x T tensor held as one sorted triple list per slice.
// Within a slice entries are ordered by (row, col) and keys are unique.
class SparseSliceMatrix {
 public:
  SparseSliceMatrix() = default;
  SparseSliceMatrix(std::size_t rows, std::size_t cols, std::size_t slices);
  // Sorts each slice and rejects out-of-range or duplicate keys.
  SparseSliceMatrix(std::size_t rows, std::size_t cols, std::vector<std::vector<SliceEntry>> per_slice);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t slices() const { return per_slice_.size(); }
  std::size_t nnz() const;
  std::span<const SliceEntry> slice(std::size_t t) const { return per_slice_[t]; }

  DenseTensor3 to_dense() const;
  SparseSliceMatrix transposed() const;

  friend bool operator==(const SparseSliceMatrix&, const SparseSliceMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::vector<SliceEntry>> per_slice_;
};

// y(:,:,t) = sum_r theta(t, r) x(:,:,r)
DenseTensor3 theta_transform(const DenseTensor3& x, const MixingMatrix& theta);
// Same transform on a sparse operand; weights summing to exactly zero are kept.
SparseSliceMatrix theta_transform(const SparseSliceMatrix& x, const MixingMatrix& theta);

// z(:,:,t) = x(:,:,t) * y(:,:,t)
DenseTensor3 facewise_product(const DenseTensor3& x, const DenseTensor3& y);

// (x transformed) facewise-times (y transformed); no inverse transform.
DenseTensor3 theta_product(const DenseTensor3& x, const DenseTensor3& y, const MixingMatrix& theta);

DenseTensor3 facewise_transpose(const DenseTensor3& x);

// Facewise product with a sparse left operand.
DenseTensor3 sparse_facewise_apply(const SparseSliceMatrix& a, const DenseTensor3& x);

}  // namespace scg
