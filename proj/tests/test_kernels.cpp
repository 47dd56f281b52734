#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "hilcert/sparse.hpp"

using namespace hilcert;

namespace {

Vec random_vec(std::mt19937& rng, std::size_t n) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vec v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

SparseOperator random_sparse(std::mt19937& rng, std::size_t rows, std::size_t cols,
                             double density) {
  std::uniform_real_distribution<double> val(-2.0, 2.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  SparseOperator a(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (coin(rng) < density) a.add(r, c, val(rng));
  a.assemble();
  return a;
}

}  // namespace

TEST_CASE("parallel dot matches serial reference") {
  std::mt19937 rng(11);
  for (std::size_t n : {7u, 1000u, 5000u, 70000u}) {
    Vec a = random_vec(rng, n), b = random_vec(rng, n);
    const double par = kernels::dot(a.data(), b.data(), n);
    const double ser = kernels::serial::dot(a.data(), b.data(), n);
    CHECK(par == doctest::Approx(ser).epsilon(1e-13));
    // Blocked reduction: repeated calls are bit-identical.
    CHECK(par == kernels::dot(a.data(), b.data(), n));
  }
}

TEST_CASE("parallel axpy and scale match serial exactly") {
  std::mt19937 rng(12);
  const std::size_t n = 50000;
  Vec x = random_vec(rng, n), y1 = random_vec(rng, n), y2 = y1;
  kernels::axpy(0.7, x.data(), y1.data(), n);
  kernels::serial::axpy(0.7, x.data(), y2.data(), n);
  CHECK(y1 == y2);
  kernels::scale(-1.3, y1.data(), n);
  kernels::serial::scale(-1.3, y2.data(), n);
  CHECK(y1 == y2);
}

TEST_CASE("parallel CSR apply is bitwise equal to serial") {
  std::mt19937 rng(13);
  for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{40, 60},
                            {3000, 2500}}) {
    SparseOperator a = random_sparse(rng, rows, cols, 0.02);
    Vec x = random_vec(rng, cols);
    Vec y_par(rows), y_ser(rows);
    a.apply(x.data(), y_par.data());
    kernels::serial::csr_apply(a.row_ptr().data(), a.col_idx().data(), a.values().data(),
                               rows, x.data(), y_ser.data());
    CHECK(y_par == y_ser);
  }
}

TEST_CASE("assembly sums duplicates and sorts rows") {
  SparseOperator a(2, 3);
  a.add(1, 2, 1.0);
  a.add(0, 1, 2.0);
  a.add(1, 2, 0.5);
  a.add(0, 0, -1.0);
  a.assemble();
  CHECK(a.nnz() == 3);
  Vec x{1.0, 1.0, 1.0};
  Vec y = a.apply(x);
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == doctest::Approx(1.5));
}

TEST_CASE("transpose and product agree with direct evaluation") {
  std::mt19937 rng(14);
  SparseOperator a = random_sparse(rng, 30, 20, 0.15);
  SparseOperator b = random_sparse(rng, 20, 25, 0.15);
  SparseOperator ab = a.multiply(b);
  SparseOperator at = a.transposed();
  Vec x = random_vec(rng, 25);
  Vec direct = a.apply(b.apply(x));
  Vec prod = ab.apply(x);
  for (std::size_t i = 0; i < direct.size(); ++i)
    CHECK(prod[i] == doctest::Approx(direct[i]).epsilon(1e-13));

  Vec u = random_vec(rng, 30);
  Vec atu = at.apply(u);
  Vec v = random_vec(rng, 20);
  const double lhs = kernels::dot(u.data(), a.apply(v).data(), 30);
  const double rhs = kernels::dot(atu.data(), v.data(), 20);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
}

TEST_CASE("out of range indices are rejected") {
  SparseOperator a(2, 2);
  CHECK_THROWS_AS(a.add(2, 0, 1.0), std::out_of_range);
  CHECK_THROWS_AS(a.add(0, 5, 1.0), std::out_of_range);
}
