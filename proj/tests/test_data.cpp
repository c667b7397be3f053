#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "oracles.hpp"
#include "scg/data.hpp"
#include "scg/error.hpp"

using namespace scg;

namespace {

SparseQosTensor parse(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset(in, "test.txt");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& err) {
    return err.what();
  }
  return {};
}

std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> keys(const SparseQosTensor& t) {
  std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> out;
  for (const auto& e : t.entries()) out.insert({e.user, e.service, e.slice});
  return out;
}

SparseQosTensor values_tensor(const std::vector<double>& values) {
  std::vector<QosEntry> entries;
  for (std::uint32_t k = 0; k < values.size(); ++k) entries.push_back({k, 0, 0, values[k]});
  return SparseQosTensor({values.size(), 1, 1}, entries);
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("parse triples") {
  const auto t = parse("0 0 0 2.5\n1 2 3 7.0\n");
  CHECK(t.size() == 2);
  CHECK(t.dims() == TensorDims{2, 3, 4});
  CHECK(t.entries()[1] == QosEntry{1, 2, 3, 7.0});
}

TEST_CASE("parse header and comments") {
  const auto t = parse("# comment\ndims 5 6 7\n\n# more\n0 1 2 3.25\n");
  CHECK(t.dims() == TensorDims{5, 6, 7});
  CHECK(t.size() == 1);
}

TEST_CASE("parse errors") {
  CHECK(error_of("").find("no entries") != std::string::npos);
  CHECK(error_of("# only comments\n").find("no entries") != std::string::npos);
  CHECK(error_of("0 0 0 abc\n").find("test.txt:1:") != std::string::npos);
  CHECK(error_of("0 0 0 1\n0 0 1\n").find("test.txt:2:") != std::string::npos);
  CHECK(error_of("0 -1 0 1\n").find("negative") != std::string::npos);
  CHECK(error_of("dims 2 2 2\n0 2 0 1\n").find("out of range") != std::string::npos);
  CHECK(error_of("0 0 0 1\n0 0 0 2\n").find("duplicate") != std::string::npos);
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.txt"), DataError);
}

TEST_CASE("write then parse reproduces entries") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto original = oracle::random_observations(4, 5, 3, 0.5, gen);
    if (original.empty()) continue;
    std::stringstream buffer;
    write_dataset(buffer, original);
    CHECK(parse_dataset(buffer) == original);
  }
}

TEST_CASE("normalize values") {
  const auto same = normalize_values(values_tensor({0, 5, 10}));
  CHECK(same.entries()[0].value == 0.0);
  CHECK(same.entries()[1].value == 5.0);
  CHECK(same.entries()[2].value == 10.0);

  const auto pair = normalize_values(values_tensor({1, 3}));
  CHECK(pair.entries()[0].value == 0.0);
  CHECK(pair.entries()[1].value == 10.0);

  const auto flat = normalize_values(values_tensor({4, 4, 4}));
  for (const auto& e : flat.entries()) CHECK(e.value == 0.0);
  CHECK_THROWS_AS(normalize_values(SparseQosTensor({1, 1, 1}, {})), DataError);
}

TEST_CASE("normalize is idempotent and order preserving") {
  std::mt19937_64 gen(23);
  for (int trial = 0; trial < 20; ++trial) {
    const auto raw = oracle::random_observations(5, 5, 2, 0.6, gen);
    if (raw.size() < 2) continue;
    const auto once = normalize_values(raw);
    const auto twice = normalize_values(once);
    for (std::size_t k = 0; k < once.size(); ++k) {
      CHECK(std::abs(once.entries()[k].value - twice.entries()[k].value) <= 1e-12);
      CHECK(once.entries()[k].value >= 0.0);
      CHECK(once.entries()[k].value <= 10.0);
      for (std::size_t j = 0; j < once.size(); ++j) {
        if (raw.entries()[k].value < raw.entries()[j].value) CHECK(once.entries()[k].value <= once.entries()[j].value);
      }
    }
  }
}

TEST_CASE("split counts") {
  CHECK(split_count(100, 0.1) == 10);
  CHECK(split_count(10, 0.999) == 9);
  CHECK(split_count(10, 0.001) == 1);

  std::vector<QosEntry> entries;
  for (std::uint32_t k = 0; k < 100; ++k) entries.push_back({k % 10, k / 10, 0, 1.0});
  const SparseQosTensor t({10, 10, 1}, entries);
  const auto s = split(t, 0.1, 3);
  CHECK(s.train.size() == 10);
  CHECK(s.test.size() == 90);

  std::vector<QosEntry> small(entries.begin(), entries.begin() + 10);
  const auto tiny = split(SparseQosTensor({10, 10, 1}, small), 0.999, 3);
  CHECK(tiny.train.size() == 9);
  CHECK(tiny.test.size() == 1);

  CHECK_THROWS_AS(split(t, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split(t, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(split(SparseQosTensor({1, 1, 1}, {}), 0.5, 1), DataError);
}

TEST_CASE("split is a deterministic partition") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 25; ++trial) {
    const auto t = oracle::random_observations(6, 7, 3, 0.4, gen);
    if (t.size() < 2) continue;
    const double fraction = std::uniform_real_distribution<double>(0.05, 0.95)(gen);
    const auto seed = gen();
    const auto a = split(t, fraction, seed);
    const auto b = split(t, fraction, seed);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK_FALSE(a.test.empty());
    CHECK_FALSE(a.train.empty());

    const auto train_keys = keys(a.train);
    const auto test_keys = keys(a.test);
    std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> both;
    std::set_intersection(train_keys.begin(), train_keys.end(), test_keys.begin(), test_keys.end(),
                          std::back_inserter(both));
    CHECK(both.empty());
    auto all = train_keys;
    all.insert(test_keys.begin(), test_keys.end());
    CHECK(all == keys(t));
  }
}

TEST_CASE("synthetic entry count and reproducibility") {
  SyntheticParams p;
  p.users = 20;
  p.services = 30;
  p.slices = 8;
  p.rank = 4;
  p.density = 0.3;
  p.seed = 7;
  const auto a = generate_synthetic(p);
  CHECK(a.size() == 1440);
  CHECK(a == generate_synthetic(p));
  for (const auto& e : a.entries()) {
    CHECK(e.value >= 0.0);
    CHECK(e.value <= 10.0);
  }
  p.seed = 8;
  CHECK_FALSE(a == generate_synthetic(p));
}

TEST_CASE("synthetic with constant factors is rank one replicated over slices") {
  SyntheticParams p;
  p.users = 6;
  p.services = 5;
  p.slices = 4;
  p.rank = 1;
  p.noise_std = 0.0;
  p.density = 1.0;
  p.temporal_smoothness = 1.0;
  const auto t = generate_synthetic(p);
  REQUIRE(t.size() == 6 * 5 * 4);
  std::vector<double> q(6 * 5 * 4);
  for (const auto& e : t.entries()) q[(e.slice * 6 + e.user) * 5 + e.service] = e.value;
  const auto at = [&](std::size_t u, std::size_t s, std::size_t k) { return q[(k * 6 + u) * 5 + s]; };
  for (std::size_t k = 1; k < 4; ++k)
    for (std::size_t u = 0; u < 6; ++u)
      for (std::size_t s = 0; s < 5; ++s) CHECK(at(u, s, k) == at(u, s, 0));
  // Every 2x2 minor of a rank-1 matrix vanishes.
  for (std::size_t u = 1; u < 6; ++u)
    for (std::size_t s = 1; s < 5; ++s)
      CHECK(std::abs(at(0, 0, 0) * at(u, s, 0) - at(0, s, 0) * at(u, 0, 0)) <= 1e-12);
}

TEST_CASE("synthetic parameter validation") {
  SyntheticParams p;
  p.density = 0.0;
  CHECK_THROWS_AS(generate_synthetic(p), ConfigError);
  p.density = 0.5;
  p.rank = 0;
  CHECK_THROWS_AS(generate_synthetic(p), ConfigError);
  p.rank = 2;
  p.temporal_smoothness = 1.5;
  CHECK_THROWS_AS(generate_synthetic(p), ConfigError);
}

}  // TEST_SUITE
