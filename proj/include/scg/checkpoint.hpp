#pragma once

#include <filesystem>
#include <iosfwd>

#include "scg/config.hpp"
#include "scg/data.hpp"
#include "scg/model.hpp"
#include "scg/train.hpp"

namespace scg {

// Trained layer-0 features with the configuration that produced them.
//
// Binary layout, little-endian:
//   8 bytes   magic "SCGCKPT\0"
//   u32       format version (1)
//   u32       header length n
//   n bytes   header text, one "key=value" per line: users, services, slices
//             and every RunConfig key
//   tensor    user features
//   tensor    service features
// where a tensor is u64 rows, u64 cols, u64 slices followed by
// rows*cols*slices f64 values in slice-major order.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  RunConfig config;
  TensorDims dims;
  FeatureTensor users;
  FeatureTensor services;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rebuilds the propagation graph from the training entries the checkpoint
// was fitted on. Throws DimensionError if the dims disagree.
Model restore_model(const Checkpoint& checkpoint, const SparseQosTensor& train);

}  // namespace scg
