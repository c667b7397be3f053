#include "scg/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "scg/error.hpp"
#include "scg/format.hpp"
#include "scg/rng.hpp"

namespace scg {

namespace {

std::uint64_t entry_key(const QosEntry& e, const TensorDims& dims) {
  return (static_cast<std::uint64_t>(e.slice) * dims.users + e.user) * dims.services + e.service;
}

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    const std::size_t start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
    if (pos > start) tokens.push_back(line.substr(start, pos - start));
  }
  return tokens;
}

template <typename T>
bool parse_number(std::string_view token, T& value) {
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  return ec == std::errc() && ptr == end;
}

}  // namespace

SparseQosTensor::SparseQosTensor(TensorDims dims, std::vector<QosEntry> entries)
    : dims_(dims), entries_(std::move(entries)) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (e.user >= dims_.users || e.service >= dims_.services || e.slice >= dims_.slices) {
      throw DataError("entry (" + std::to_string(e.user) + ", " + std::to_string(e.service) + ", " +
                      std::to_string(e.slice) + ") outside dims " + std::to_string(dims_.users) + "x" +
                      std::to_string(dims_.services) + "x" + std::to_string(dims_.slices));
    }
    if (!seen.insert(entry_key(e, dims_)).second) {
      throw DataError("duplicate entry (" + std::to_string(e.user) + ", " + std::to_string(e.service) +
                      ", " + std::to_string(e.slice) + ")");
    }
  }
}

SparseQosTensor parse_dataset(std::istream& in, const std::string& source) {
  std::vector<QosEntry> entries;
  TensorDims dims;
  bool has_header = false;
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& why) {
    throw DataError(source + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const auto tokens = tokenize(content);
    if (tokens.front() == "dims") {
      if (has_header || !entries.empty()) fail("dims header must be the first data line");
      if (tokens.size() != 4 || !parse_number(tokens[1], dims.users) ||
          !parse_number(tokens[2], dims.services) || !parse_number(tokens[3], dims.slices)) {
        fail("expected 'dims U S T'");
      }
      has_header = true;
      continue;
    }
    if (tokens.size() != 4) fail("expected 'user service slice value', got " + std::to_string(tokens.size()) + " fields");
    QosEntry e{};
    for (int axis = 0; axis < 3; ++axis) {
      if (!tokens[axis].empty() && tokens[axis].front() == '-') fail("negative index '" + std::string(tokens[axis]) + "'");
    }
    if (!parse_number(tokens[0], e.user) || !parse_number(tokens[1], e.service) ||
        !parse_number(tokens[2], e.slice)) {
      fail("invalid index");
    }
    if (!parse_number(tokens[3], e.value) || !std::isfinite(e.value)) {
      fail("invalid value '" + std::string(tokens[3]) + "'");
    }
    if (has_header && (e.user >= dims.users || e.service >= dims.services || e.slice >= dims.slices)) {
      fail("index out of range for dims " + std::to_string(dims.users) + "x" + std::to_string(dims.services) +
           "x" + std::to_string(dims.slices));
    }
    entries.push_back(e);
  }
  if (entries.empty()) throw DataError(source + ": no entries");
  if (!has_header) {
    for (const auto& e : entries) {
      dims.users = std::max<std::size_t>(dims.users, e.user + 1);
      dims.services = std::max<std::size_t>(dims.services, e.service + 1);
      dims.slices = std::max<std::size_t>(dims.slices, e.slice + 1);
    }
  }
  try {
    return SparseQosTensor(dims, std::move(entries));
  } catch (const DataError& err) {
    throw DataError(source + ": " + err.what());
  }
}

SparseQosTensor load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return parse_dataset(in, path.string());
}

void write_dataset(std::ostream& out, const SparseQosTensor& tensor) {
  const auto& d = tensor.dims();
  out << "dims " << d.users << ' ' << d.services << ' ' << d.slices << '\n';
  for (const auto& e : tensor.entries()) {
    out << e.user << ' ' << e.service << ' ' << e.slice << ' ' << format_double(e.value) << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const SparseQosTensor& tensor) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
  write_dataset(out, tensor);
  if (!out) throw DataError("failed writing dataset '" + path.string() + "'");
}

SparseQosTensor normalize_values(const SparseQosTensor& tensor, double lo, double hi) {
  if (tensor.empty()) throw DataError("cannot normalize an empty tensor");
  double min_value = std::numeric_limits<double>::infinity();
  double max_value = -min_value;
  for (const auto& e : tensor.entries()) {
    min_value = std::min(min_value, e.value);
    max_value = std::max(max_value, e.value);
  }
  std::vector<QosEntry> entries = tensor.entries();
  const double range = max_value - min_value;
  for (auto& e : entries) {
    if (range > 0.0) {
      // Endpoints are pinned so repeated normalization is a fixed point.
      if (e.value == min_value) {
        e.value = lo;
      } else if (e.value == max_value) {
        e.value = hi;
      } else {
        e.value = lo + (e.value - min_value) / range * (hi - lo);
      }
    } else {
      e.value = lo;
    }
  }
  return SparseQosTensor(tensor.dims(), std::move(entries));
}

std::size_t split_count(std::size_t n, double fraction) {
  const auto wanted = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(wanted, 1, n - 1);
}

DatasetSplit split(const SparseQosTensor& tensor, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1), got " + format_double(train_fraction));
  }
  if (tensor.size() < 2) throw DataError("splitting needs at least two entries");
  const std::size_t n = tensor.size();
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<char> in_train(n, 0);
  const std::size_t n_train = split_count(n, train_fraction);
  for (std::size_t k = 0; k < n_train; ++k) in_train[order[k]] = 1;

  std::vector<QosEntry> train, test;
  train.reserve(n_train);
  test.reserve(n - n_train);
  for (std::size_t k = 0; k < n; ++k) {
    (in_train[k] ? train : test).push_back(tensor.entries()[k]);
  }
  return DatasetSplit{SparseQosTensor(tensor.dims(), std::move(train)),
                      SparseQosTensor(tensor.dims(), std::move(test)), seed, train_fraction};
}

SparseQosTensor generate_synthetic(const SyntheticParams& p) {
  if (p.users == 0 || p.services == 0 || p.slices == 0 || p.rank == 0) {
    throw ConfigError("synthetic dims and rank must be positive");
  }
  if (!(p.density > 0.0 && p.density <= 1.0)) throw ConfigError("density must lie in (0, 1]");
  if (!(p.temporal_smoothness >= 0.0 && p.temporal_smoothness <= 1.0)) {
    throw ConfigError("temporal smoothness must lie in [0, 1]");
  }
  if (!(p.noise_std >= 0.0) || !std::isfinite(p.noise_std)) throw ConfigError("noise std must be >= 0");

  // Factors are mu * (1 + tanh(z) / 2) with z a unit-variance AR(1) walk, so
  // every factor stays in (mu/2, 3mu/2) and the noiseless values in
  // (0, 9] with mean near 4.
  const double mu = std::sqrt(4.0 / static_cast<double>(p.rank));
  const double rho = p.temporal_smoothness;
  const double innovation = std::sqrt(1.0 - rho * rho);
  Rng rng(p.seed);

  const auto walk = [&](std::size_t count) {
    std::vector<double> latent(count * p.rank);
    for (double& z : latent) z = rng.normal();
    std::vector<double> factors(p.slices * count * p.rank);
    for (std::size_t t = 0; t < p.slices; ++t) {
      if (t > 0) {
        for (double& z : latent) z = rho * z + innovation * rng.normal();
      }
      for (std::size_t k = 0; k < latent.size(); ++k) {
        factors[t * latent.size() + k] = mu * (1.0 + 0.5 * std::tanh(latent[k]));
      }
    }
    return factors;
  };
  const auto user_factors = walk(p.users);
  const auto service_factors = walk(p.services);

  const std::size_t total = p.users * p.services * p.slices;
  const auto keep = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(p.density * static_cast<double>(total))), 1, total);
  std::vector<std::size_t> cells(total);
  for (std::size_t k = 0; k < total; ++k) cells[k] = k;
  rng.shuffle(cells);
  cells.resize(keep);
  std::sort(cells.begin(), cells.end());

  std::vector<QosEntry> entries;
  entries.reserve(keep);
  for (std::size_t cell : cells) {
    const std::size_t t = cell / (p.users * p.services);
    const std::size_t u = (cell / p.services) % p.users;
    const std::size_t s = cell % p.services;
    const double* pu = &user_factors[(t * p.users + u) * p.rank];
    const double* rs = &service_factors[(t * p.services + s) * p.rank];
    double value = 0.0;
    for (std::size_t k = 0; k < p.rank; ++k) value += pu[k] * rs[k];
    if (p.noise_std > 0.0) value += p.noise_std * rng.normal();
    entries.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(s),
                       static_cast<std::uint32_t>(t), std::clamp(value, 0.0, 10.0)});
  }
  return SparseQosTensor({p.users, p.services, p.slices}, std::move(entries));
}

}  // namespace scg
