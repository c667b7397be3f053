// scg: command-line front end for synthesis, training, evaluation, sweeps
// and ablations.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "scg/checkpoint.hpp"
#include "scg/config.hpp"
#include "scg/error.hpp"
#include "scg/eval.hpp"
#include "scg/format.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode { ok = 0, usage = 2, data = 3, divergence = 4 };

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw scg::DataError("cannot read '" + path.string() + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buffer[1 << 16];
  while (in) {
    in.read(buffer, sizeof buffer);
    EVP_DigestUpdate(ctx, buffer, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int k = 0; k < length; ++k) {
    std::snprintf(byte, sizeof byte, "%02x", digest[k]);
    hex += byte;
  }
  return hex;
}

// Writes through a sibling temp file and renames it into place.
template <typename Writer>
void write_atomically(const fs::path& path, Writer&& writer) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path temp = path;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw scg::DataError("cannot write '" + temp.string() + "'");
    writer(out);
    out.flush();
    if (!out) throw scg::DataError("write failed for '" + temp.string() + "'");
  }
  fs::rename(temp, path);
}

void write_text(const fs::path& path, const std::string& text) {
  write_atomically(path, [&](std::ostream& out) { out << text; });
}

// Flags that mirror RunConfig keys. Each is kept as the raw string and
// applied through apply_setting so that file and flag parsing agree.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "Key-value config file; flags override it")->check(CLI::ExistingFile);
    const std::vector<std::pair<std::string, std::string>> flags = {
        {"d", "--d,--dim"},
        {"L", "--L,--layers"},
        {"K", "--K,--window"},
        {"pooling", "--pooling"},
        {"tau", "--tau"},
        {"lr", "--lr"},
        {"epochs", "--epochs"},
        {"patience", "--patience"},
        {"seed", "--seed"},
        {"adjacency", "--adjacency"},
        {"val_fraction", "--val-fraction"},
        {"train_fraction", "--train-fraction"},
        {"split_seed", "--split-seed"},
        {"normalize", "--normalize"},
    };
    for (const auto& [key, names] : flags) {
      options.emplace_back(key, app->add_option(names, values[key], "config key '" + key + "'"));
    }
  }

  // defaults < config file < flags; --seed also fixes the split seed unless
  // one is given explicitly.
  scg::RunConfig resolve() const {
    scg::RunConfig config;
    if (!config_file.empty()) scg::apply_config_file(config, config_file);
    for (const auto& [key, option] : options) {
      if (option->count() > 0) scg::apply_setting(config, key, values.at(key));
    }
    if (given("seed") && !given("split_seed")) config.split_seed = config.train.seed;
    return config;
  }

  bool given(const std::string& key) const {
    for (const auto& [k, option] : options)
      if (k == key) return option->count() > 0;
    return false;
  }
};

json config_json(const scg::RunConfig& config) {
  json out = json::object();
  for (const auto& [key, value] : scg::to_key_values(config)) out[key] = value;
  return out;
}

json manifest(const std::string& command, const std::vector<std::string>& argv, const json& config,
              const std::vector<fs::path>& inputs, std::uint64_t seed, const std::vector<fs::path>& outputs) {
  json m;
  m["command"] = command;
  m["argv"] = argv;
  m["config"] = config;
  json digests = json::object();
  for (const auto& input : inputs) digests[input.string()] = "sha256:" + sha256_file(input);
  m["inputs"] = digests;
  m["seed"] = seed;
  json outs = json::array();
  for (const auto& o : outputs) outs.push_back(o.string());
  m["outputs"] = outs;
  m["version"] = kVersion;
  return m;
}

scg::DatasetSplit load_split(const fs::path& data_path, const scg::RunConfig& config) {
  auto data = scg::load_dataset(data_path);
  if (config.normalize) data = scg::normalize_values(data);
  return scg::split(data, config.train_fraction, config.split_seed);
}

std::vector<std::size_t> parse_sizes(const std::vector<std::string>& items, const std::string& flag) {
  std::vector<std::size_t> out;
  for (const auto& item : items) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw scg::ConfigError("invalid value '" + item + "' for " + flag);
    }
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Spatiotemporal graph convolution for time-aware QoS prediction"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic low-rank QoS tensor");
  scg::SyntheticParams sp;
  fs::path synth_out;
  synth->add_option("--users", sp.users)->required();
  synth->add_option("--services", sp.services)->required();
  synth->add_option("--slices", sp.slices)->required();
  synth->add_option("--rank", sp.rank)->required();
  synth->add_option("--density", sp.density)->required();
  synth->add_option("--smoothness", sp.temporal_smoothness, "AR(1) coefficient of the factors")->capture_default_str();
  synth->add_option("--noise", sp.noise_std, "Gaussian noise standard deviation")->capture_default_str();
  synth->add_option("--seed", sp.seed)->capture_default_str();
  synth->add_option("-o,--out", synth_out, "Output triples file")->required();

  // train
  auto* train = app.add_subcommand("train", "Fit a model and write checkpoint, history and manifest");
  ConfigFlags train_flags;
  fs::path train_data, train_out = "run";
  train->add_option("--data", train_data, "Triples file")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--out", train_out, "Output directory")->capture_default_str();
  train_flags.attach(train);

  // eval
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on its held-out split");
  fs::path eval_ckpt, eval_data, eval_out = "metrics.json";
  eval->add_option("--checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "Triples file the checkpoint was trained on")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("-o,--out", eval_out, "Metrics JSON path")->capture_default_str();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Sweep L or K over values and seeds");
  ConfigFlags sweep_flags;
  fs::path sweep_data, sweep_out = "sweep";
  std::string sweep_axis;
  std::vector<std::string> sweep_values, sweep_seeds;
  std::size_t jobs = 1;
  sweep->add_option("--data", sweep_data)->required()->check(CLI::ExistingFile);
  sweep->add_option("--axis", sweep_axis, "L or K")->required();
  sweep->add_option("--values", sweep_values)->required()->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds)->delimiter(',');
  sweep->add_option("--jobs", jobs, "Parallel fits")->capture_default_str()->check(CLI::PositiveNumber);
  sweep->add_option("-o,--out", sweep_out, "Output directory")->capture_default_str();
  sweep_flags.attach(sweep);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Compare the full model with its K=0 and L=0 variants");
  ConfigFlags ablate_flags;
  fs::path ablate_data, ablate_out = "ablation";
  std::vector<std::string> ablate_seeds;
  ablate->add_option("--data", ablate_data)->required()->check(CLI::ExistingFile);
  ablate->add_option("--seeds", ablate_seeds, "Model seeds; defaults to the config seed")->delimiter(',');
  ablate->add_option("-o,--out", ablate_out, "Output directory")->capture_default_str();
  ablate_flags.attach(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? ExitCode::ok : ExitCode::usage;
  }

  try {
    if (*synth) {
      const auto tensor = scg::generate_synthetic(sp);
      scg::save_dataset(synth_out, tensor);
      json config = {{"users", sp.users},
                     {"services", sp.services},
                     {"slices", sp.slices},
                     {"rank", sp.rank},
                     {"density", scg::format_double(sp.density)},
                     {"smoothness", scg::format_double(sp.temporal_smoothness)},
                     {"noise", scg::format_double(sp.noise_std)}};
      fs::path manifest_path = synth_out;
      manifest_path += ".manifest.json";
      write_text(manifest_path, manifest("synth", args, config, {}, sp.seed, {synth_out}).dump(2) + "\n");
      std::cout << "wrote " << tensor.size() << " entries to " << synth_out.string() << "\n";
    } else if (*train) {
      const auto config = train_flags.resolve();
      const auto start = std::chrono::steady_clock::now();
      const auto split = load_split(train_data, config);
      scg::validate(config.train, split.train.dims());
      const auto result = scg::fit(config.train, split);
      const fs::path ckpt = train_out / "checkpoint.bin", history = train_out / "history.csv";
      write_atomically(ckpt, [&](std::ostream& out) {
        scg::write_checkpoint(out, {config, split.train.dims(), result.model.users, result.model.services});
      });
      write_atomically(history, [&](std::ostream& out) { scg::write_history_csv(out, result.history); });
      auto m = manifest("train", args, config_json(config), {train_data}, config.train.seed, {ckpt, history});
      m["epochs_run"] = result.history.size();
      m["best_epoch"] = result.state.best_epoch;
      m["best_val_rmse"] = scg::format_double(result.state.best_val_rmse);
      m["wall_seconds"] = seconds_since(start);
      write_text(train_out / "manifest.json", m.dump(2) + "\n");
      std::cout << "trained " << result.history.size() << " epochs, best epoch " << result.state.best_epoch
                << ", monitored rmse " << scg::format_double(result.state.best_val_rmse) << "\n";
    } else if (*eval) {
      const auto start = std::chrono::steady_clock::now();
      const auto ckpt = scg::load_checkpoint(eval_ckpt);
      const auto split = load_split(eval_data, ckpt.config);
      const auto model = scg::restore_model(ckpt, split.train);
      const auto report = scg::evaluate(model, split.test);
      write_text(eval_out, scg::metrics_json(report) + "\n");
      fs::path manifest_path = eval_out;
      manifest_path += ".manifest.json";
      auto m = manifest("eval", args, config_json(ckpt.config), {eval_ckpt, eval_data}, ckpt.config.train.seed,
                        {eval_out});
      m["wall_seconds"] = seconds_since(start);
      write_text(manifest_path, m.dump(2) + "\n");
      std::cout << "rmse " << scg::format_double(report.rmse) << " mae " << scg::format_double(report.mae) << " on "
                << report.entries << " entries\n";
    } else if (*sweep) {
      const auto config = sweep_flags.resolve();
      const auto axis = scg::parse_sweep_axis(sweep_axis);
      const auto values = parse_sizes(sweep_values, "--values");
      std::vector<std::uint64_t> seeds;
      for (auto s : parse_sizes(sweep_seeds, "--seeds")) seeds.push_back(s);
      if (seeds.empty()) seeds.push_back(config.train.seed);
      const auto start = std::chrono::steady_clock::now();
      const auto split = load_split(sweep_data, config);
      const auto result = scg::sweep(config.train, axis, values, seeds, split, jobs);
      const std::string stem = "sweep_" + std::string(scg::to_string(axis));
      const fs::path rows = sweep_out / (stem + ".csv"), summary = sweep_out / (stem + "_summary.csv");
      write_atomically(rows, [&](std::ostream& out) { scg::write_sweep_csv(out, result); });
      write_atomically(summary, [&](std::ostream& out) { scg::write_sweep_summary_csv(out, result); });
      auto m = manifest("sweep", args, config_json(config), {sweep_data}, config.train.seed, {rows, summary});
      m["failures"] = result.failures();
      m["wall_seconds"] = seconds_since(start);
      write_text(sweep_out / "manifest.json", m.dump(2) + "\n");
      std::cout << "wrote " << result.runs.size() << " runs to " << rows.string() << "\n";
      if (result.failures() > 0) std::cerr << "warning: " << result.failures() << " run(s) failed\n";
    } else if (*ablate) {
      const auto config = ablate_flags.resolve();
      std::vector<std::uint64_t> seeds;
      for (auto s : parse_sizes(ablate_seeds, "--seeds")) seeds.push_back(s);
      if (seeds.empty()) seeds.push_back(config.train.seed);
      const auto start = std::chrono::steady_clock::now();
      const auto split = load_split(ablate_data, config);
      std::ostringstream csv;
      scg::write_ablation_header(csv);
      for (auto seed : seeds) {
        auto base = config.train;
        base.seed = seed;
        scg::write_ablation_rows(csv, scg::ablate(base, split));
      }
      const fs::path rows = ablate_out / "ablation.csv";
      write_text(rows, csv.str());
      auto m = manifest("ablate", args, config_json(config), {ablate_data}, config.train.seed, {rows});
      m["wall_seconds"] = seconds_since(start);
      write_text(ablate_out / "manifest.json", m.dump(2) + "\n");
      std::cout << "wrote " << 3 * seeds.size() << " rows to " << rows.string() << "\n";
    }
  } catch (const scg::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return ExitCode::usage;
  } catch (const scg::DivergenceError& err) {
    std::cerr << "diverged at epoch " << err.epoch() << ": " << err.what() << "\n";
    return ExitCode::divergence;
  } catch (const scg::DimensionError& err) {
    std::cerr << "dimension error: " << err.what() << "\n";
    return ExitCode::data;
  } catch (const scg::DataError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return ExitCode::data;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "file error: " << err.what() << "\n";
    return ExitCode::data;
  }
  return ExitCode::ok;
}
