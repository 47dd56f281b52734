#pragma once

#include <memory>
#include <stdexcept>

#include "hilcert/gram.hpp"

namespace hilcert {

// Scale-invariant rule for treating a singular value as zero.
inline constexpr double kernel_rtol = 1e-10;
// Numerical rank stability: the smallest kept singular value must clear the
// detection threshold by this factor, else the operator is ill-posed.
inline constexpr double rank_stability_factor = 1e3;

struct OracleCapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t default_oracle_cap = 2000;

// Brute-force ground truth for one operator between two weighted spaces:
// singular values, kernels, projections onto range/corange, pseudoinverse.
// All geometry is taken in the Gram inner products of the two spaces.
class DenseSvd {
 public:
  DenseSvd() = default;

  std::size_t rows() const;
  std::size_t cols() const;
  const std::vector<double>& singular_values() const;  // descending
  std::size_t rank() const;
  double smallest_nonzero() const;  // 0 when rank is 0

  Vec pseudo_apply(const Vec& y) const;          // min-norm least-squares solution
  Vec pseudo_apply_adjoint(const Vec& g) const;  // min-norm solution of A* x = g
  Vec project_range(const Vec& y) const;     // onto R(A) in the row space
  Vec project_corange(const Vec& x) const;   // onto R(A*) in the column space
  std::vector<Vec> null_basis() const;       // N(A), column-space orthonormal
  std::vector<Vec> left_null_basis() const;  // N(A*), row-space orthonormal

  // Rejects operators whose nonzero spectrum reaches into the kernel
  // detection band (rank_stability_factor rule).
  bool rank_stable() const;

  struct Impl;
  std::shared_ptr<const Impl> impl;
};

// Total dimension rows+cols must stay within cap.
DenseSvd dense_svd(const SparseOperator& a, const GramOperator& m_col,
                   const GramOperator& m_row, std::size_t cap = default_oracle_cap);

// Orthonormal basis of N(a_cur) ∩ N(a_prev*) computed from the stacked
// weighted matrix, independent of the Hodge-operator route. Either operator
// may be null (treated as zero).
std::vector<Vec> dense_cohomology(const SparseOperator* a_prev,
                                  const SparseOperator* a_cur,
                                  const GramOperator& m_prev,
                                  const GramOperator& m_level,
                                  const GramOperator& m_next,
                                  std::size_t cap = default_oracle_cap);

}  // namespace hilcert
