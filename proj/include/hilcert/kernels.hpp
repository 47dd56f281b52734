#pragma once

#include <cstddef>
#include <vector>

namespace hilcert {

using Vec = std::vector<double>;

// Low-level data-parallel kernels. The OpenMP versions in this namespace are
// what the library runs on; hilcert::kernels::serial keeps straightforward
// single-threaded implementations as the reference the parallel ones are
// tested and benchmarked against.
//
// Reductions use a fixed block partition with the block partials summed in
// block order, so results do not depend on the number of threads.
namespace kernels {

inline constexpr std::size_t reduction_block = 1024;

namespace serial {

double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void csr_apply(const std::size_t* row_ptr, const std::size_t* col_idx,
               const double* values, std::size_t rows,
               const double* x, double* y);

}  // namespace serial

double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void csr_apply(const std::size_t* row_ptr, const std::size_t* col_idx,
               const double* values, std::size_t rows,
               const double* x, double* y);

// y = a*x + b*z, elementwise
void combine(double a, const double* x, double b, const double* z, double* y,
             std::size_t n);

}  // namespace kernels

inline double dot(const Vec& a, const Vec& b) {
  return kernels::dot(a.data(), b.data(), a.size());
}

}  // namespace hilcert
