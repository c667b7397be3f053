#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "scg/data.hpp"
#include "scg/train.hpp"

namespace scg {

struct MetricsReport {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t entries = 0;
  TrainConfig config;
  double wall_seconds = 0.0;
};

// RMSE and MAE of predictions against observed values. Throws if the sizes
// differ or there is nothing to score; asserts rmse >= mae.
MetricsReport score(std::span<const double> predictions, const SparseQosTensor& observed);

MetricsReport evaluate(const Model& model, const SparseQosTensor& test);

enum class SweepAxis { layers, window };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view text);
// Copy of `base` with the swept hyperparameter set to `value`.
TrainConfig with_axis_value(TrainConfig base, SweepAxis axis, std::size_t value);

struct SweepRun {
  std::size_t value = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  MetricsReport report;
  std::string error;
};

struct SweepSummary {
  std::size_t value = 0;
  std::size_t completed = 0;
  double mean_rmse = 0.0;
  double std_rmse = 0.0;
  double mean_mae = 0.0;
  double std_mae = 0.0;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::layers;
  std::vector<std::size_t> values;
  std::vector<std::uint64_t> seeds;
  std::vector<SweepRun> runs;  // ordered by (value, seed)

  std::size_t failures() const;
  std::vector<SweepSummary> summarize() const;
};

// One fit per (value, seed), each scored on split.test. A failing run is
// recorded in its row rather than aborting the sweep. `jobs` > 1 runs fits on
// that many threads; results do not depend on it.
SweepResult sweep(const TrainConfig& base, SweepAxis axis, std::vector<std::size_t> values,
                  std::vector<std::uint64_t> seeds, const DatasetSplit& split, std::size_t jobs = 1);

struct AblationResult {
  MetricsReport full;                    // the configured model
  MetricsReport without_temporal;        // K = 0
  MetricsReport without_spatiotemporal;  // L = 0 and K = 0, per-slice factorization
};

AblationResult ablate(const TrainConfig& base, const DatasetSplit& split);

void write_sweep_csv(std::ostream& out, const SweepResult& result);
void write_sweep_summary_csv(std::ostream& out, const SweepResult& result);
// Header plus one row per variant; callers append seeds by writing rows only.
void write_ablation_header(std::ostream& out);
void write_ablation_rows(std::ostream& out, const AblationResult& result);
// Deterministic JSON: metrics and the config snapshot, no timing.
std::string metrics_json(const MetricsReport& report);

}  // namespace scg
