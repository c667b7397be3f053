#include "scg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "scg/error.hpp"

namespace scg {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'C', 'G', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw DataError("truncated checkpoint");
  return value;
}

void put_tensor(std::ostream& out, const FeatureTensor& x) {
  put<std::uint64_t>(out, x.rows());
  put<std::uint64_t>(out, x.cols());
  put<std::uint64_t>(out, x.slices());
  out.write(reinterpret_cast<const char*>(x.values().data()),
            static_cast<std::streamsize>(x.size() * sizeof(double)));
}

FeatureTensor get_tensor(std::istream& in) {
  const auto rows = get<std::uint64_t>(in);
  const auto cols = get<std::uint64_t>(in);
  const auto slices = get<std::uint64_t>(in);
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 34;
  if (rows == 0 || cols == 0 || slices == 0 || rows * cols > kLimit || rows * cols * slices > kLimit) {
    throw DataError("checkpoint tensor has implausible dims");
  }
  std::vector<double> values(rows * cols * slices);
  if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)))) {
    throw DataError("truncated checkpoint tensor");
  }
  return FeatureTensor(rows, cols, slices, std::move(values));
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const auto n = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return n;
  } catch (const std::exception&) {
    throw DataError("checkpoint header has invalid " + key + " '" + value + "'");
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  std::ostringstream header;
  header << "users=" << c.dims.users << '\n' << "services=" << c.dims.services << '\n' << "slices=" << c.dims.slices << '\n';
  for (const auto& [key, value] : to_key_values(c.config)) header << key << '=' << value << '\n';
  const std::string text = header.str();

  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, Checkpoint::kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_tensor(out, c.users);
  put_tensor(out, c.services);
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != Checkpoint::kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_size = get<std::uint32_t>(in);
  std::string text(header_size, '\0');
  if (!in.read(text.data(), header_size)) throw DataError("truncated checkpoint header");

  Checkpoint c;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("malformed checkpoint header line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "users") {
      c.dims.users = parse_count(key, value);
    } else if (key == "services") {
      c.dims.services = parse_count(key, value);
    } else if (key == "slices") {
      c.dims.slices = parse_count(key, value);
    } else {
      try {
        apply_setting(c.config, key, value);
      } catch (const ConfigError& err) {
        throw DataError(std::string("checkpoint header: ") + err.what());
      }
    }
  }
  c.users = get_tensor(in);
  c.services = get_tensor(in);
  if (c.users.rows() != c.dims.users || c.services.rows() != c.dims.services ||
      c.users.slices() != c.dims.slices || c.services.slices() != c.dims.slices ||
      c.users.cols() != c.services.cols()) {
    throw DataError("checkpoint tensors disagree with its header dims");
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  write_checkpoint(out, checkpoint);
  if (!out) throw DataError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  try {
    return read_checkpoint(in);
  } catch (const DataError& err) {
    throw DataError(path.string() + ": " + err.what());
  }
}

Model restore_model(const Checkpoint& checkpoint, const SparseQosTensor& train) {
  if (!(train.dims() == checkpoint.dims)) {
    const auto& a = checkpoint.dims;
    const auto& b = train.dims();
    throw DimensionError("checkpoint dims " + std::to_string(a.users) + "x" + std::to_string(a.services) + "x" +
                         std::to_string(a.slices) + " do not match dataset dims " + std::to_string(b.users) + "x" +
                         std::to_string(b.services) + "x" + std::to_string(b.slices));
  }
  Model model;
  model.config = checkpoint.config.train;
  model.graph = build_model_graph(model.config, train);
  model.users = checkpoint.users;
  model.services = checkpoint.services;
  return model;
}

}  // namespace scg
