#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace scg {

struct TensorDims {
  std::size_t users = 0;
  std::size_t services = 0;
  std::size_t slices = 0;
  friend bool operator==(const TensorDims&, const TensorDims&) = default;
};

struct QosEntry {
  std::uint32_t user;
  std::uint32_t service;
  std::uint32_t slice;
  double value;
  friend bool operator==(const QosEntry&, const QosEntry&) = default;
};

// Observed cells of a user x service x time QoS tensor, in coordinate form.
// Construction rejects out-of-range indices and duplicate keys; entry order is
// preserved as given.
class SparseQosTensor {
 public:
  SparseQosTensor() = default;
  SparseQosTensor(TensorDims dims, std::vector<QosEntry> entries);

  const TensorDims& dims() const { return dims_; }
  const std::vector<QosEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  friend bool operator==(const SparseQosTensor&, const SparseQosTensor&) = default;

 private:
  TensorDims dims_;
  std::vector<QosEntry> entries_;
};

// Triples text format: optional "dims U S T" header, '#' comments, then one
// "user service slice value" line per entry. Without a header each axis
// extends to the largest index seen plus one.
SparseQosTensor parse_dataset(std::istream& in, const std::string& source = "<stream>");
SparseQosTensor load_dataset(const std::filesystem::path& path);
// Writes the header and every entry with round-trip exact values.
void write_dataset(std::ostream& out, const SparseQosTensor& tensor);
void save_dataset(const std::filesystem::path& path, const SparseQosTensor& tensor);

// Affine map of the values onto [lo, hi]. A constant tensor maps to lo.
SparseQosTensor normalize_values(const SparseQosTensor& tensor, double lo = 0.0, double hi = 10.0);

struct DatasetSplit {
  SparseQosTensor train;
  SparseQosTensor test;
  std::uint64_t seed = 0;
  double train_fraction = 0.0;
};

// Number of entries the first part of a split receives:
// round(fraction * n) clamped to [1, n-1].
std::size_t split_count(std::size_t n, double fraction);

// Seeded uniform partition of the entries. Both parts keep source order.
DatasetSplit split(const SparseQosTensor& tensor, double train_fraction, std::uint64_t seed);

struct SyntheticParams {
  std::size_t users = 20;
  std::size_t services = 30;
  std::size_t slices = 8;
  std::size_t rank = 4;
  double temporal_smoothness = 0.95;
  double noise_std = 0.1;
  double density = 0.3;
  std::uint64_t seed = 1;
};

// Low-rank ground truth with factors following a stationary AR(1) walk over
// slices, plus Gaussian noise, subsampled to round(density * U*S*T) entries
// and clipped to [0, 10]. Entries come out ordered by (slice, user, service).
SparseQosTensor generate_synthetic(const SyntheticParams& params);

}  // namespace scg
