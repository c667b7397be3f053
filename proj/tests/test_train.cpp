#include <doctest.h>

#include <random>
#include <sstream>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "scg/error.hpp"
#include "scg/train.hpp"

using namespace scg;

namespace {

struct Problem {
  SparseQosTensor observed;
  TrainConfig config;
  ModelGraph graph;
  DenseTensor3 users, services;
};

Problem random_problem(std::uint64_t seed, std::size_t layers = 2, std::size_t window = 1,
                       Pooling pooling = Pooling::mean, double tau = 0.1) {
  std::mt19937_64 gen(seed);
  Problem p;
  p.observed = oracle::random_observations(5, 7, 6, 0.4, gen);
  p.config.latent_dim = 3;
  p.config.layers = layers;
  p.config.window = window;
  p.config.pooling = pooling;
  p.config.regularization = tau;
  p.graph = build_model_graph(p.config, p.observed);
  p.users = oracle::random_tensor(5, 3, 6, gen, -0.5, 0.5);
  p.services = oracle::random_tensor(7, 3, 6, gen, -0.5, 0.5);
  return p;
}

SparseQosTensor with_values(const SparseQosTensor& t, const std::vector<double>& values) {
  auto entries = t.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) entries[k].value = values[k];
  return SparseQosTensor(t.dims(), entries);
}

DatasetSplit synthetic_split(std::size_t users, std::size_t services, std::size_t slices, double density,
                             double fraction, std::uint64_t seed) {
  SyntheticParams p;
  p.users = users;
  p.services = services;
  p.slices = slices;
  p.rank = 2;
  p.density = density;
  p.seed = seed;
  return split(generate_synthetic(p), fraction, seed);
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("loss examples") {
  const SparseQosTensor obs({1, 1, 1}, {{0, 0, 0, 3.0}});
  const DenseTensor3 zero(1, 1, 1);
  const std::vector<double> exact = {3.0};
  CHECK(loss(exact, obs, zero, zero, 0.0) == 0.0);

  DenseTensor3 u(1, 2, 1), s(1, 3, 1);
  u(0, 0, 0) = 1.0;
  u(0, 1, 0) = 1.0;  // |U|^2 = 2
  s(0, 0, 0) = 1.0;
  s(0, 1, 0) = 1.0;
  s(0, 2, 0) = 1.0;  // |S|^2 = 3
  CHECK(loss(exact, obs, u, s, 0.1) == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<double> off = {1.0};
  CHECK(loss(off, obs, zero, zero, 0.0) == 4.0);

  CHECK_THROWS_AS(loss(std::vector<double>{1.0, 2.0}, obs, zero, zero, 0.0), DimensionError);
}

TEST_CASE("objective agrees with the dense reference") {
  for (auto kind : {Pooling::mean, Pooling::sum, Pooling::concatenation}) {
    auto p = random_problem(3, 3, 2, kind);
    const double expected = oracle::objective(p.observed, false, oracle::dense_rows(p.graph.theta), p.users,
                                              p.services, 3, kind, 0.1, p.observed);
    CHECK(objective(p.config, p.graph, p.users, p.services, p.observed) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("gradient vanishes at an exact fit without regularization") {
  auto p = random_problem(4, 2, 1, Pooling::mean, 0.0);
  const auto pooled = pool(propagate(p.graph.adjacency, p.graph.theta, p.users, p.services, 2), Pooling::mean);
  const auto fitted = with_values(p.observed, predict_entries(pooled.users, pooled.services, p.observed.entries()));
  const auto g = gradients(p.config, p.graph, p.users, p.services, fitted);
  for (double v : g.users.values()) CHECK(v == 0.0);
  for (double v : g.services.values()) CHECK(v == 0.0);
}

TEST_CASE("gradient with no entries is the regularizer derivative") {
  auto p = random_problem(5, 2, 1, Pooling::sum, 0.3);
  const SparseQosTensor none(p.observed.dims(), {});
  const auto g = gradients(p.config, p.graph, p.users, p.services, none);
  auto expected_u = p.users;
  expected_u *= 0.6;
  auto expected_s = p.services;
  expected_s *= 0.6;
  CHECK(max_abs_difference(g.users, expected_u) <= 1e-15);
  CHECK(max_abs_difference(g.services, expected_s) <= 1e-15);
}

TEST_CASE("analytic gradient matches central differences") {
  oracle::GradCheckCase c;
  c.tau = 0.1;
  const auto r = oracle::check_gradient(c, 50);
  CHECK(r.coordinates == 50);
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("gradient check across depths, windows and pooling kinds") {
  std::uint64_t seed = 100;
  for (std::size_t layers = 0; layers <= 3; ++layers) {
    for (std::size_t window = 0; window <= 2; ++window) {
      for (auto kind : {Pooling::mean, Pooling::sum, Pooling::concatenation}) {
        oracle::GradCheckCase c;
        c.layers = layers;
        c.window = window;
        c.pooling = kind;
        c.tau = seed % 2 == 0 ? 0.0 : 0.1;
        c.adjacency = seed % 3 == 0 ? AdjacencyMode::weighted : AdjacencyMode::binary;
        c.seed = seed++;
        CAPTURE(layers);
        CAPTURE(window);
        CHECK(oracle::check_gradient(c, 20).max_relative_error < 1e-4);
      }
    }
  }
}

TEST_CASE("small plain gradient step does not increase the objective") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto p = random_problem(seed, 2, 1, Pooling::mean, 0.1);
    const auto g = gradients(p.config, p.graph, p.users, p.services, p.observed);
    auto u = p.users, s = p.services;
    u.add_scaled(g.users, -1e-6);
    s.add_scaled(g.services, -1e-6);
    CHECK(objective(p.config, p.graph, u, s, p.observed) <= g.objective + 1e-12);
  }
}

TEST_CASE("loss increases strictly with tau") {
  auto p = random_problem(6);
  double previous = -1.0;
  for (double tau : {0.0, 0.01, 0.1, 1.0, 10.0}) {
    p.config.regularization = tau;
    const double value = objective(p.config, p.graph, p.users, p.services, p.observed);
    CHECK(value > previous);
    previous = value;
  }
}

TEST_CASE("objective is symmetric under swapping users and services") {
  auto p = random_problem(7, 3, 2, Pooling::concatenation, 0.1);
  std::vector<QosEntry> swapped;
  for (const auto& e : p.observed.entries()) swapped.push_back({e.service, e.user, e.slice, e.value});
  const SparseQosTensor mirrored({7, 5, 6}, swapped);
  const auto graph = build_model_graph(p.config, mirrored);
  CHECK(objective(p.config, graph, p.services, p.users, mirrored) ==
        doctest::Approx(objective(p.config, p.graph, p.users, p.services, p.observed)).epsilon(1e-12));
}

TEST_CASE("adam step") {
  auto p = random_problem(8);
  auto state = TrainState::start(p.users, p.services);
  Gradients zero{DenseTensor3(5, 3, 6), DenseTensor3(7, 3, 6), 0.0, {}};
  const auto still = adam_step(state, zero, AdamParams{});
  CHECK(still.users == p.users);
  CHECK(still.services == p.services);
  CHECK(still.step == 1);

  Gradients constant{DenseTensor3(5, 3, 6, 0.7), DenseTensor3(7, 3, 6, -2.0), 0.0, {}};
  const AdamParams params{0.01};
  const auto moved = adam_step(state, constant, params);
  for (std::size_t k = 0; k < p.users.size(); ++k) {
    CHECK(std::abs(moved.users.values()[k] - (p.users.values()[k] - 0.01)) <= 1e-6);
  }
  for (std::size_t k = 0; k < p.services.size(); ++k) {
    CHECK(std::abs(moved.services.values()[k] - (p.services.values()[k] + 0.01)) <= 1e-6);
  }
  const auto again = adam_step(state, constant, params);
  CHECK(again.users == moved.users);
  CHECK(again.users_m == moved.users_m);
  CHECK(again.services_v == moved.services_v);

  Gradients wrong{DenseTensor3(4, 3, 6), DenseTensor3(7, 3, 6), 0.0, {}};
  CHECK_THROWS_AS(adam_step(state, wrong, params), DimensionError);
}

TEST_CASE("early stopping on a plateau") {
  EarlyStopper stopper(1);
  CHECK_FALSE(stopper.observe(0.5));
  CHECK(stopper.observe(0.5));

  EarlyStopper patient(3);
  CHECK_FALSE(patient.observe(1.0));
  CHECK_FALSE(patient.observe(0.9));
  CHECK_FALSE(patient.observe(0.95));
  CHECK_FALSE(patient.observe(0.92));
  CHECK(patient.observe(0.9));
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(validate(c));
  c.regularization = -1.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.max_epochs = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.patience = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.window = 40;
  CHECK_THROWS_AS(validate(c, TensorDims{3, 3, 8}), ConfigError);
}

TEST_CASE("config key values round trip") {
  TrainConfig c;
  c.latent_dim = 7;
  c.pooling = Pooling::concatenation;
  c.regularization = 0.125;
  c.adjacency = AdjacencyMode::weighted;
  c.seed = 99;
  TrainConfig back;
  back.latent_dim = 1;
  for (const auto& [key, value] : to_key_values(c)) CHECK(apply_setting(back, key, value));
  CHECK(back == c);
  CHECK_FALSE(apply_setting(back, "nonsense", "1"));
  CHECK_THROWS_AS(apply_setting(back, "d", "abc"), ConfigError);
}

TEST_CASE("fit is deterministic and records history") {
  const auto data = synthetic_split(6, 7, 4, 0.6, 0.7, 3);
  TrainConfig c;
  c.latent_dim = 4;
  c.layers = 2;
  c.window = 1;
  c.max_epochs = 40;
  c.learning_rate = 1e-2;
  const auto a = fit(c, data);
  const auto b = fit(c, data);
  CHECK(a.history == b.history);
  CHECK(a.model.users == b.model.users);
  CHECK(a.history.size() <= 40);
  CHECK(a.history.front().epoch == 1);
  CHECK(a.validation_entries + a.fit_entries == data.train.size());
  CHECK(a.history.back().train_loss < a.history.front().train_loss);

  std::ostringstream csv;
  write_history_csv(csv, a.history);
  CHECK(csv.str().rfind("epoch,train_loss,val_rmse\n1,", 0) == 0);
}

TEST_CASE("fit stops early once validation stalls") {
  const auto data = synthetic_split(6, 7, 4, 0.6, 0.7, 5);
  TrainConfig c;
  c.latent_dim = 4;
  c.layers = 1;
  c.window = 1;
  c.max_epochs = 5000;
  c.patience = 5;
  c.learning_rate = 0.05;
  const auto r = fit(c, data);
  CHECK(r.history.size() < 5000);
  CHECK(r.history.size() >= r.state.best_epoch + 5);
  CHECK(r.history[r.state.best_epoch - 1].val_rmse == r.state.best_val_rmse);
}

TEST_CASE("fit reports divergence with the epoch") {
  const auto data = synthetic_split(5, 5, 3, 0.8, 0.7, 2);
  TrainConfig c;
  c.latent_dim = 2;
  c.layers = 1;
  c.window = 1;
  c.max_epochs = 50;
  c.learning_rate = 1e200;
  try {
    fit(c, data);
    FAIL("expected divergence");
  } catch (const DivergenceError& err) {
    CHECK(err.epoch() >= 2);
  }
}

}  // TEST_SUITE
