#include "scg/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "scg/error.hpp"
#include "scg/format.hpp"

namespace scg {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

MetricsReport fit_and_score(const TrainConfig& config, const DatasetSplit& split) {
  const auto start = std::chrono::steady_clock::now();
  const auto result = fit(config, split);
  auto report = evaluate(result.model, split.test);
  report.wall_seconds = seconds_since(start);
  return report;
}

}  // namespace

MetricsReport score(std::span<const double> predictions, const SparseQosTensor& observed) {
  if (observed.empty()) throw DataError("cannot score an empty test set");
  if (predictions.size() != observed.size()) {
    throw DimensionError(std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(observed.size()) + " entries");
  }
  double squared = 0.0, absolute = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double r = observed.entries()[k].value - predictions[k];
    squared += r * r;
    absolute += std::abs(r);
  }
  const double n = static_cast<double>(predictions.size());
  MetricsReport report;
  report.rmse = std::sqrt(squared / n);
  report.mae = absolute / n;
  report.entries = predictions.size();
  // Root-mean-square dominates mean-absolute; allow for rounding when all
  // residual magnitudes are equal.
  if (!(report.rmse >= report.mae * (1.0 - 1e-12))) {
    throw Error("metric invariant violated: rmse " + format_double(report.rmse) + " < mae " +
                format_double(report.mae));
  }
  return report;
}

MetricsReport evaluate(const Model& model, const SparseQosTensor& test) {
  const auto& d = test.dims();
  if (d.users != model.users.rows() || d.services != model.services.rows() || d.slices != model.users.slices()) {
    throw DimensionError("test dims " + std::to_string(d.users) + "x" + std::to_string(d.services) + "x" +
                         std::to_string(d.slices) + " do not match the model");
  }
  if (test.empty()) throw DataError("cannot evaluate on an empty test set");
  auto report = score(model.predict(test.entries()), test);
  report.config = model.config;
  return report;
}

std::string_view to_string(SweepAxis axis) { return axis == SweepAxis::layers ? "L" : "K"; }

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "L") return SweepAxis::layers;
  if (text == "K") return SweepAxis::window;
  throw ConfigError("unknown sweep axis '" + std::string(text) + "' (expected L or K)");
}

TrainConfig with_axis_value(TrainConfig base, SweepAxis axis, std::size_t value) {
  (axis == SweepAxis::layers ? base.layers : base.window) = value;
  return base;
}

std::size_t SweepResult::failures() const {
  return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const SweepRun& r) { return !r.ok; }));
}

std::vector<SweepSummary> SweepResult::summarize() const {
  std::vector<SweepSummary> out;
  for (std::size_t value : values) {
    SweepSummary s;
    s.value = value;
    std::vector<double> rmse, mae;
    for (const auto& run : runs) {
      if (run.value != value || !run.ok) continue;
      rmse.push_back(run.report.rmse);
      mae.push_back(run.report.mae);
    }
    s.completed = rmse.size();
    const auto mean_std = [](std::vector<double> xs, double& mean, double& sd) {
      // Sorted so the reduction does not depend on completion order.
      std::sort(xs.begin(), xs.end());
      mean = sd = 0.0;
      if (xs.empty()) return;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      for (double x : xs) sd += (x - mean) * (x - mean);
      sd = xs.size() > 1 ? std::sqrt(sd / static_cast<double>(xs.size() - 1)) : 0.0;
    };
    mean_std(rmse, s.mean_rmse, s.std_rmse);
    mean_std(mae, s.mean_mae, s.std_mae);
    out.push_back(s);
  }
  return out;
}

SweepResult sweep(const TrainConfig& base, SweepAxis axis, std::vector<std::size_t> values,
                  std::vector<std::uint64_t> seeds, const DatasetSplit& split, std::size_t jobs) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  if (values.empty() || seeds.empty()) throw ConfigError("sweep needs at least one value and one seed");

  SweepResult result;
  result.axis = axis;
  result.values = values;
  result.seeds = seeds;
  for (std::size_t value : values) {
    for (std::uint64_t seed : seeds) result.runs.push_back({value, seed, false, {}, {}});
  }

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < result.runs.size(); k = next++) {
      auto& run = result.runs[k];
      auto config = with_axis_value(base, axis, run.value);
      config.seed = run.seed;
      try {
        run.report = fit_and_score(config, split);
        run.ok = true;
      } catch (const Error& err) {
        run.error = err.what();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, result.runs.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  return result;
}

AblationResult ablate(const TrainConfig& base, const DatasetSplit& split) {
  validate(base, split.train.dims());
  AblationResult out;
  out.full = fit_and_score(base, split);
  out.without_temporal = fit_and_score(with_axis_value(base, SweepAxis::window, 0), split);
  out.without_spatiotemporal =
      fit_and_score(with_axis_value(with_axis_value(base, SweepAxis::layers, 0), SweepAxis::window, 0), split);
  return out;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << to_string(result.axis) << ",seed,rmse,mae,status\n";
  for (const auto& run : result.runs) {
    out << run.value << ',' << run.seed << ',';
    if (run.ok) {
      out << format_double(run.report.rmse) << ',' << format_double(run.report.mae) << ",ok\n";
    } else {
      std::string reason = run.error;
      std::replace(reason.begin(), reason.end(), ',', ';');
      std::replace(reason.begin(), reason.end(), '\n', ' ');
      out << ",,failed: " << reason << '\n';
    }
  }
}

void write_sweep_summary_csv(std::ostream& out, const SweepResult& result) {
  out << to_string(result.axis) << ",runs,rmse_mean,rmse_std,mae_mean,mae_std\n";
  for (const auto& s : result.summarize()) {
    out << s.value << ',' << s.completed << ',' << format_double(s.mean_rmse) << ',' << format_double(s.std_rmse)
        << ',' << format_double(s.mean_mae) << ',' << format_double(s.std_mae) << '\n';
  }
}

void write_ablation_header(std::ostream& out) { out << "variant,L,K,seed,rmse,mae\n"; }

void write_ablation_rows(std::ostream& out, const AblationResult& result) {
  const auto row = [&](std::string_view name, const MetricsReport& r) {
    out << name << ',' << r.config.layers << ',' << r.config.window << ',' << r.config.seed << ','
        << format_double(r.rmse) << ',' << format_double(r.mae) << '\n';
  };
  row("SCG", result.full);
  row("SCG-w/o-T", result.without_temporal);
  row("SCG-w/o-S&T", result.without_spatiotemporal);
}

std::string metrics_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["rmse"] = report.rmse;
  j["mae"] = report.mae;
  j["entries"] = report.entries;
  auto& config = j["config"];
  config = nlohmann::ordered_json::object();
  for (const auto& [key, value] : to_key_values(report.config)) config[key] = value;
  return j.dump(2) + "\n";
}

}  // namespace scg
