#include "hilcert/kernels.hpp"

namespace hilcert::kernels {

namespace serial {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void csr_apply(const std::size_t* row_ptr, const std::size_t* col_idx,
               const double* values, std::size_t rows,
               const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      s += values[k] * x[col_idx[k]];
    y[r] = s;
  }
}

}  // namespace serial

double dot(const double* a, const double* b, std::size_t n) {
  if (n < 4 * reduction_block) return serial::dot(a, b, n);
  const std::size_t nblocks = (n + reduction_block - 1) / reduction_block;
  std::vector<double> partial(nblocks);
#pragma omp parallel for schedule(static)
  for (std::size_t blk = 0; blk < nblocks; ++blk) {
    const std::size_t lo = blk * reduction_block;
    const std::size_t hi = lo + reduction_block < n ? lo + reduction_block : n;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
    partial[blk] = s;
  }
  double s = 0.0;
  for (std::size_t blk = 0; blk < nblocks; ++blk) s += partial[blk];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
#pragma omp parallel for schedule(static) if (n >= 4 * reduction_block)
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
#pragma omp parallel for schedule(static) if (n >= 4 * reduction_block)
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void csr_apply(const std::size_t* row_ptr, const std::size_t* col_idx,
               const double* values, std::size_t rows,
               const double* x, double* y) {
#pragma omp parallel for schedule(static) if (rows >= 2 * reduction_block)
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      s += values[k] * x[col_idx[k]];
    y[r] = s;
  }
}

void combine(double a, const double* x, double b, const double* z, double* y,
             std::size_t n) {
#pragma omp parallel for schedule(static) if (n >= 4 * reduction_block)
  for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b * z[i];
}

}  // namespace hilcert::kernels
