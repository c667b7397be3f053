#include "scg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scg/error.hpp"

namespace scg {

namespace {

std::string shape_string(const DenseTensor3& x) {
  std::ostringstream out;
  out << x.rows() << "x" << x.cols() << "x" << x.slices();
  return out.str();
}

void require_slices(std::size_t tensor_slices, const MixingMatrix& theta) {
  if (tensor_slices != theta.slices()) {
    throw DimensionError("mixing matrix has " + std::to_string(theta.slices()) +
                         " slices, tensor has " + std::to_string(tensor_slices));
  }
}

}  // namespace

DenseTensor3::DenseTensor3(std::size_t rows, std::size_t cols, std::size_t slices, double fill)
    : rows_(rows), cols_(cols), slices_(slices), values_(rows * cols * slices, fill) {}

DenseTensor3::DenseTensor3(std::size_t rows, std::size_t cols, std::size_t slices,
                           std::vector<double> values)
    : rows_(rows), cols_(cols), slices_(slices), values_(std::move(values)) {
  if (values_.size() != rows * cols * slices) {
    throw DimensionError("tensor " + std::to_string(rows) + "x" + std::to_string(cols) + "x" +
                         std::to_string(slices) + " given " + std::to_string(values_.size()) +
                         " values");
  }
}

DenseTensor3& DenseTensor3::operator+=(const DenseTensor3& other) {
  add_scaled(other, 1.0);
  return *this;
}

DenseTensor3& DenseTensor3::operator*=(double factor) {
  for (double& v : values_) v *= factor;
  return *this;
}

void DenseTensor3::add_scaled(const DenseTensor3& other, double factor) {
  if (!same_shape(other)) {
    throw DimensionError("cannot add " + shape_string(other) + " to " + shape_string(*this));
  }
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += factor * other.values_[k];
}

double frobenius_squared(const DenseTensor3& x) {
  double total = 0.0;
  for (double v : x.values()) total += v * v;
  return total;
}

double max_abs_difference(const DenseTensor3& a, const DenseTensor3& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("cannot compare " + shape_string(a) + " with " + shape_string(b));
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, std::abs(a.values()[k] - b.values()[k]));
  }
  return worst;
}

bool all_finite(const DenseTensor3& x) {
  return std::all_of(x.values().begin(), x.values().end(), [](double v) { return std::isfinite(v); });
}

// MixingMatrix

MixingMatrix::MixingMatrix(std::size_t slices, std::size_t radius)
    : slices_(slices), radius_(radius), band_(slices * (2 * radius + 1), 0.0) {}

MixingMatrix MixingMatrix::build(std::size_t slices, std::size_t window) {
  if (slices == 0) throw ConfigError("mixing matrix needs at least one slice");
  if (2 * window + 1 > slices) {
    throw ConfigError("temporal window K=" + std::to_string(window) + " violates 2K+1 <= T with T=" +
                      std::to_string(slices));
  }
  MixingMatrix theta(slices, window);
  const double full = static_cast<double>(2 * window + 1);
  for (std::size_t t = 0; t < slices; ++t) {
    // 1-based position of the row.
    const double pos = static_cast<double>(t + 1);
    const double k = static_cast<double>(window);
    const double n = static_cast<double>(slices);
    const double weight = 1.0 / std::min({full, n - pos + k + 1.0, pos + k});
    for (std::size_t i = theta.first_col(t); i <= theta.last_col(t); ++i) theta.band(t, i) = weight;
  }
  return theta;
}

MixingMatrix MixingMatrix::identity(std::size_t slices) { return build(slices, 0); }

MixingMatrix MixingMatrix::from_dense(std::size_t slices, std::span<const double> row_major) {
  if (row_major.size() != slices * slices) {
    throw DimensionError("mixing matrix needs " + std::to_string(slices * slices) + " values, got " +
                         std::to_string(row_major.size()));
  }
  std::size_t radius = 0;
  for (std::size_t t = 0; t < slices; ++t) {
    for (std::size_t i = 0; i < slices; ++i) {
      if (row_major[t * slices + i] != 0.0) radius = std::max(radius, t > i ? t - i : i - t);
    }
  }
  MixingMatrix theta(slices, radius);
  for (std::size_t t = 0; t < slices; ++t) {
    for (std::size_t i = theta.first_col(t); i <= theta.last_col(t); ++i) {
      theta.band(t, i) = row_major[t * slices + i];
    }
  }
  return theta;
}

double MixingMatrix::at(std::size_t t, std::size_t i) const {
  if (t >= slices_ || i >= slices_) throw DimensionError("mixing matrix index out of range");
  const std::size_t gap = t > i ? t - i : i - t;
  return gap > radius_ ? 0.0 : band(t, i);
}

double MixingMatrix::row_sum(std::size_t t) const {
  double total = 0.0;
  for (std::size_t i = first_col(t); i <= last_col(t); ++i) total += band(t, i);
  return total;
}

MixingMatrix MixingMatrix::transposed() const {
  MixingMatrix out(slices_, radius_);
  for (std::size_t t = 0; t < slices_; ++t) {
    for (std::size_t i = first_col(t); i <= last_col(t); ++i) out.band(i, t) = band(t, i);
  }
  return out;
}

std::vector<double> MixingMatrix::to_dense() const {
  std::vector<double> dense(slices_ * slices_, 0.0);
  for (std::size_t t = 0; t < slices_; ++t) {
    for (std::size_t i = first_col(t); i <= last_col(t); ++i) dense[t * slices_ + i] = band(t, i);
  }
  return dense;
}

// SparseSliceMatrix

SparseSliceMatrix::SparseSliceMatrix(std::size_t rows, std::size_t cols, std::size_t slices)
    : rows_(rows), cols_(cols), per_slice_(slices) {}

SparseSliceMatrix::SparseSliceMatrix(std::size_t rows, std::size_t cols,
                                     std::vector<std::vector<SliceEntry>> per_slice)
    : rows_(rows), cols_(cols), per_slice_(std::move(per_slice)) {
  for (std::size_t t = 0; t < per_slice_.size(); ++t) {
    auto& entries = per_slice_[t];
    std::sort(entries.begin(), entries.end(), [](const SliceEntry& a, const SliceEntry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& e = entries[k];
      if (e.row >= rows_ || e.col >= cols_) {
        throw DimensionError("sparse entry (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                             ") out of range in slice " + std::to_string(t));
      }
      if (k > 0 && entries[k - 1].row == e.row && entries[k - 1].col == e.col) {
        throw DataError("duplicate sparse entry (" + std::to_string(e.row) + ", " +
                        std::to_string(e.col) + ") in slice " + std::to_string(t));
      }
    }
  }
}

std::size_t SparseSliceMatrix::nnz() const {
  std::size_t total = 0;
  for (const auto& entries : per_slice_) total += entries.size();
  return total;
}

DenseTensor3 SparseSliceMatrix::to_dense() const {
  DenseTensor3 dense(rows_, cols_, slices());
  for (std::size_t t = 0; t < slices(); ++t) {
    for (const auto& e : per_slice_[t]) dense(e.row, e.col, t) = e.weight;
  }
  return dense;
}

SparseSliceMatrix SparseSliceMatrix::transposed() const {
  std::vector<std::vector<SliceEntry>> flipped(slices());
  for (std::size_t t = 0; t < slices(); ++t) {
    flipped[t].reserve(per_slice_[t].size());
    for (const auto& e : per_slice_[t]) flipped[t].push_back({e.col, e.row, e.weight});
  }
  return SparseSliceMatrix(cols_, rows_, std::move(flipped));
}

// Operations

DenseTensor3 theta_transform(const DenseTensor3& x, const MixingMatrix& theta) {
  require_slices(x.slices(), theta);
  DenseTensor3 y(x.rows(), x.cols(), x.slices());
  for (std::size_t t = 0; t < x.slices(); ++t) {
    auto out = y.slice(t);
    for (std::size_t r = theta.first_col(t); r <= theta.last_col(t); ++r) {
      const double w = theta.at(t, r);
      if (w == 0.0) continue;
      const auto in = x.slice(r);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * in[k];
    }
  }
  return y;
}

SparseSliceMatrix theta_transform(const SparseSliceMatrix& x, const MixingMatrix& theta) {
  require_slices(x.slices(), theta);
  std::vector<std::vector<SliceEntry>> mixed(x.slices());
  for (std::size_t t = 0; t < x.slices(); ++t) {
    std::vector<SliceEntry> gathered;
    for (std::size_t r = theta.first_col(t); r <= theta.last_col(t); ++r) {
      const double w = theta.at(t, r);
      if (w == 0.0) continue;
      for (const auto& e : x.slice(r)) gathered.push_back({e.row, e.col, w * e.weight});
    }
    // Stable sort keeps the source-slice order for equal keys, so the merged
    // sums are accumulated in ascending r.
    std::stable_sort(gathered.begin(), gathered.end(), [](const SliceEntry& a, const SliceEntry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    auto& merged = mixed[t];
    for (const auto& e : gathered) {
      if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col) {
        merged.back().weight += e.weight;
      } else {
        merged.push_back(e);
      }
    }
  }
  return SparseSliceMatrix(x.rows(), x.cols(), std::move(mixed));
}

DenseTensor3 facewise_product(const DenseTensor3& x, const DenseTensor3& y) {
  if (x.cols() != y.rows() || x.slices() != y.slices()) {
    throw DimensionError("facewise product of " + shape_string(x) + " and " + shape_string(y));
  }
  const std::size_t n1 = x.rows(), m = x.cols(), n2 = y.cols();
  DenseTensor3 z(n1, n2, x.slices());
  for (std::size_t t = 0; t < x.slices(); ++t) {
    for (std::size_t i = 0; i < n1; ++i) {
      auto out = z.row(i, t);
      const auto xi = x.row(i, t);
      for (std::size_t k = 0; k < m; ++k) {
        const double a = xi[k];
        const auto yk = y.row(k, t);
        for (std::size_t j = 0; j < n2; ++j) out[j] += a * yk[j];
      }
    }
  }
  return z;
}

DenseTensor3 theta_product(const DenseTensor3& x, const DenseTensor3& y, const MixingMatrix& theta) {
  return facewise_product(theta_transform(x, theta), theta_transform(y, theta));
}

DenseTensor3 facewise_transpose(const DenseTensor3& x) {
  DenseTensor3 y(x.cols(), x.rows(), x.slices());
  for (std::size_t t = 0; t < x.slices(); ++t) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) y(j, i, t) = x(i, j, t);
    }
  }
  return y;
}

DenseTensor3 sparse_facewise_apply(const SparseSliceMatrix& a, const DenseTensor3& x) {
  if (a.cols() != x.rows() || a.slices() != x.slices()) {
    throw DimensionError("sparse facewise product of " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + "x" + std::to_string(a.slices()) + " and " +
                         shape_string(x));
  }
  DenseTensor3 y(a.rows(), x.cols(), x.slices());
  for (std::size_t t = 0; t < x.slices(); ++t) {
    for (const auto& e : a.slice(t)) {
      auto out = y.row(e.row, t);
      const auto in = x.row(e.col, t);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += e.weight * in[j];
    }
  }
  return y;
}

}  // namespace scg
