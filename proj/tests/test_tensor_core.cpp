#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "scg/error.hpp"
#include "scg/tensor.hpp"

using namespace scg;

namespace {

void check_rows(const MixingMatrix& theta, const std::vector<std::vector<double>>& expected) {
  REQUIRE(theta.slices() == expected.size());
  for (std::size_t t = 0; t < expected.size(); ++t)
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(theta.at(t, i) == doctest::Approx(expected[t][i]).epsilon(1e-15));
}

SparseSliceMatrix random_sparse(std::size_t n1, std::size_t n2, std::size_t slices, double density,
                                std::mt19937_64& gen) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::vector<SliceEntry>> per_slice(slices);
  for (std::size_t t = 0; t < slices; ++t)
    for (std::uint32_t i = 0; i < n1; ++i)
      for (std::uint32_t j = 0; j < n2; ++j)
        if (coin(gen) < density) per_slice[t].push_back({i, j, coin(gen) * 2.0 - 1.0});
  return SparseSliceMatrix(n1, n2, std::move(per_slice));
}

}  // namespace

TEST_SUITE("tensor_core") {

TEST_CASE("mixing matrix with K=0 is the identity") {
  for (std::size_t T : {1u, 2u, 5u, 64u}) {
    const auto theta = MixingMatrix::build(T, 0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < T; ++i) CHECK(theta.at(t, i) == (t == i ? 1.0 : 0.0));
  }
}

TEST_CASE("mixing matrix hand-evaluated rows") {
  check_rows(MixingMatrix::build(3, 1), {{1.0 / 2, 1.0 / 2, 0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0, 1.0 / 2, 1.0 / 2}});
  check_rows(MixingMatrix::build(4, 1), {{1.0 / 2, 1.0 / 2, 0, 0},
                                         {1.0 / 3, 1.0 / 3, 1.0 / 3, 0},
                                         {0, 1.0 / 3, 1.0 / 3, 1.0 / 3},
                                         {0, 0, 1.0 / 2, 1.0 / 2}});
}

TEST_CASE("mixing matrix rows sum to one and stay inside the window") {
  for (std::size_t T = 2; T <= 64; ++T) {
    for (std::size_t K = 0; 2 * K + 1 <= T; ++K) {
      const auto theta = MixingMatrix::build(T, K);
      for (std::size_t t = 0; t < T; ++t) {
        CHECK(std::abs(theta.row_sum(t) - 1.0) <= 1e-12);
        for (std::size_t i = 0; i < T; ++i) {
          const bool inside = i + K >= t && i <= t + K;
          if (!inside) CHECK(theta.at(t, i) == 0.0);
        }
      }
    }
  }
}

TEST_CASE("mixing matrix rejects oversize windows") {
  CHECK_THROWS_AS(MixingMatrix::build(4, 2), ConfigError);
  CHECK_THROWS_AS(MixingMatrix::build(0, 0), ConfigError);
  CHECK_NOTHROW(MixingMatrix::build(5, 2));
}

TEST_CASE("theta transform examples") {
  std::mt19937_64 gen(11);
  const auto x = oracle::random_tensor(3, 2, 4, gen);
  CHECK(theta_transform(x, MixingMatrix::identity(4)) == x);

  const std::vector<double> swap = {0, 1, 1, 0};
  const auto y = oracle::random_tensor(2, 2, 2, gen);
  const auto swapped = theta_transform(y, MixingMatrix::from_dense(2, swap));
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(swapped.slice(0)[k] == y.slice(1)[k]);
    CHECK(swapped.slice(1)[k] == y.slice(0)[k]);
  }

  const DenseTensor3 ramp(1, 1, 3, std::vector<double>{1, 2, 3});
  const auto mixed = theta_transform(ramp, MixingMatrix::build(3, 1));
  CHECK(mixed(0, 0, 0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(mixed(0, 0, 1) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(mixed(0, 0, 2) == doctest::Approx(2.5).epsilon(1e-15));

  CHECK_THROWS_AS(theta_transform(ramp, MixingMatrix::identity(2)), DimensionError);
}

TEST_CASE("theta transform preserves constants and is linear") {
  std::mt19937_64 gen(5);
  const auto theta = MixingMatrix::build(9, 3);
  DenseTensor3 constant(3, 4, 9);
  const auto base = oracle::random_tensor(3, 4, 1, gen);
  for (std::size_t t = 0; t < 9; ++t)
    for (std::size_t k = 0; k < 12; ++k) constant.slice(t)[k] = base.slice(0)[k];
  CHECK(max_abs_difference(theta_transform(constant, theta), constant) <= 1e-12);

  const auto x = oracle::random_tensor(3, 4, 9, gen);
  const auto y = oracle::random_tensor(3, 4, 9, gen);
  DenseTensor3 combo = x;
  combo *= 2.5;
  combo.add_scaled(y, -0.75);
  DenseTensor3 expected = theta_transform(x, theta);
  expected *= 2.5;
  expected.add_scaled(theta_transform(y, theta), -0.75);
  CHECK(max_abs_difference(theta_transform(combo, theta), expected) <= 1e-10);
}

TEST_CASE("facewise product examples") {
  std::mt19937_64 gen(3);
  const auto x = oracle::random_tensor(3, 4, 2, gen);
  DenseTensor3 eye(4, 4, 2);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t i = 0; i < 4; ++i) eye(i, i, t) = 1.0;
  CHECK(facewise_product(x, eye) == x);

  const DenseTensor3 a(1, 1, 2, std::vector<double>{2, 3});
  const DenseTensor3 b(1, 1, 2, std::vector<double>{4, 5});
  const auto c = facewise_product(a, b);
  CHECK(c(0, 0, 0) == 8.0);
  CHECK(c(0, 0, 1) == 15.0);

  const auto y = oracle::random_tensor(4, 2, 2, gen);
  CHECK(max_abs_difference(facewise_product(x, y), oracle::facewise(x, y)) <= 1e-12);
  CHECK_THROWS_AS(facewise_product(x, x), DimensionError);
}

TEST_CASE("facewise product distributes and associates") {
  std::mt19937_64 gen(8);
  const auto a = oracle::random_tensor(3, 4, 5, gen);
  const auto b = oracle::random_tensor(4, 2, 5, gen);
  const auto c = oracle::random_tensor(4, 2, 5, gen);
  const auto e = oracle::random_tensor(2, 3, 5, gen);
  DenseTensor3 bc = b;
  bc += c;
  DenseTensor3 split = facewise_product(a, b);
  split += facewise_product(a, c);
  CHECK(max_abs_difference(facewise_product(a, bc), split) <= 1e-12);

  const auto left = facewise_product(facewise_product(a, b), e);
  const auto right = facewise_product(a, facewise_product(b, e));
  CHECK(max_abs_difference(left, right) <= 1e-12);
}

TEST_CASE("theta product examples") {
  std::mt19937_64 gen(9);
  const auto x = oracle::random_tensor(2, 3, 4, gen);
  const auto y = oracle::random_tensor(3, 2, 4, gen);
  CHECK(theta_product(x, y, MixingMatrix::identity(4)) == facewise_product(x, y));

  const DenseTensor3 ramp(1, 1, 3, std::vector<double>{1, 2, 3});
  const DenseTensor3 ones(1, 1, 3, 1.0);
  const auto z = theta_product(ramp, ones, MixingMatrix::build(3, 1));
  CHECK(z(0, 0, 0) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(z(0, 0, 1) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(z(0, 0, 2) == doctest::Approx(2.5).epsilon(1e-14));

  const DenseTensor3 zeros(3, 2, 4);
  const auto annihilated = theta_product(x, zeros, MixingMatrix::build(4, 1));
  for (double v : annihilated.values()) CHECK(v == 0.0);
}

TEST_CASE("facewise transpose") {
  const DenseTensor3 scalar(1, 1, 3, std::vector<double>{4, 5, 6});
  CHECK(facewise_transpose(scalar) == scalar);

  const DenseTensor3 x(2, 2, 2, std::vector<double>{1, 2, 3, 4, 1, 2, 3, 4});
  const auto y = facewise_transpose(x);
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(y(0, 0, t) == 1);
    CHECK(y(0, 1, t) == 3);
    CHECK(y(1, 0, t) == 2);
    CHECK(y(1, 1, t) == 4);
  }

  std::mt19937_64 gen(1);
  const auto r = oracle::random_tensor(3, 5, 4, gen);
  CHECK(facewise_transpose(r).rows() == 5);
  CHECK(facewise_transpose(facewise_transpose(r)) == r);
}

TEST_CASE("sparse facewise apply") {
  std::mt19937_64 gen(21);
  const auto x = oracle::random_tensor(4, 3, 2, gen);

  const SparseSliceMatrix empty(5, 4, 2);
  const auto nothing = sparse_facewise_apply(empty, x);
  for (double v : nothing.values()) CHECK(v == 0.0);

  const SparseSliceMatrix single(5, 4, {{{0, 0, 2.5}}, {{0, 0, 2.5}}});
  const auto y = sparse_facewise_apply(single, x);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(y(i, j, t) == (i == 0 ? 2.5 * x(0, j, t) : 0.0));

  const auto a = random_sparse(30, 40, 6, 0.1, gen);
  const auto features = oracle::random_tensor(40, 7, 6, gen);
  CHECK(max_abs_difference(sparse_facewise_apply(a, features), oracle::facewise(a.to_dense(), features)) < 1e-12);

  CHECK_THROWS_AS(sparse_facewise_apply(a, x), DimensionError);
}

TEST_CASE("sparse slice matrix validation") {
  CHECK_THROWS_AS(SparseSliceMatrix(2, 2, {{{0, 0, 1.0}, {0, 0, 2.0}}}), DataError);
  CHECK_THROWS_AS(SparseSliceMatrix(2, 2, {{{2, 0, 1.0}}}), DimensionError);
  const SparseSliceMatrix a(3, 2, {{{2, 1, 1.0}, {0, 1, 2.0}}});
  CHECK(a.slice(0)[0].row == 0);
  CHECK(a.transposed().transposed() == a);
  CHECK(a.transposed().to_dense() == facewise_transpose(a.to_dense()));
}

TEST_CASE("sparse theta transform matches dense") {
  std::mt19937_64 gen(4);
  const auto a = random_sparse(6, 5, 7, 0.3, gen);
  const auto theta = MixingMatrix::build(7, 2);
  CHECK(max_abs_difference(theta_transform(a, theta).to_dense(), theta_transform(a.to_dense(), theta)) <= 1e-15);
}

TEST_CASE("oracle equivalence on random 5x5x5 instances") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = oracle::random_tensor(5, 5, 5, gen);
    const auto y = oracle::random_tensor(5, 5, 5, gen);
    CHECK(max_abs_difference(facewise_product(x, y), oracle::facewise(x, y)) <= 1e-12);
    const auto a = random_sparse(5, 5, 5, 0.4, gen);
    CHECK(max_abs_difference(sparse_facewise_apply(a, y), oracle::facewise(a.to_dense(), y)) <= 1e-12);
  }
}

}  // TEST_SUITE
