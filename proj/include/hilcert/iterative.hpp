#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "hilcert/gram.hpp"

namespace hilcert {

// Action of a linear operator; rows/cols are the output/input dimensions.
struct LinOp {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::function<void(const double*, double*)> apply_fn;

  Vec apply(const Vec& x) const;
};

LinOp as_linop(const SparseOperator& a);
LinOp zero_linop(std::size_t rows, std::size_t cols);
LinOp compose(const LinOp& outer, const LinOp& inner);          // outer ∘ inner
LinOp shifted(const LinOp& a, double sigma);                    // A + sigma*I
LinOp scaled_linop(const LinOp& a, double alpha);               // alpha*A

struct IterStats {
  std::size_t iterations = 0;
  double final_residual = 0.0;  // relative to the M-norm of the right-hand side
  bool converged = false;
  std::string breakdown_reason;
};

struct CgOptions {
  double tol = 1e-10;      // relative to ||b||_M
  std::size_t maxit = 0;   // 0 = 10 * dimension
};

// Conjugate gradients in the M-inner product for an M-self-adjoint positive
// semidefinite operator. On consistent semidefinite systems started inside
// the range the limit is the minimum-M-norm solution. Stagnation with
// (near-)zero search-direction curvature is reported as a breakdown.
std::pair<Vec, IterStats> cg_solve(const LinOp& a, const GramOperator& m,
                                   const Vec& b, CgOptions opt = {},
                                   const Vec* x0 = nullptr);

// MINRES in the M-inner product for an M-self-adjoint (possibly indefinite)
// operator. Started from zero on a consistent singular system it converges to
// the minimum-M-norm solution.
std::pair<Vec, IterStats> minres_solve(const LinOp& a, const GramOperator& m,
                                       const Vec& b, CgOptions opt = {});

enum class Extremal { SmallestNonzero, Largest };

struct LanczosOptions {
  double tol = 1e-10;        // relative accuracy of the eigenvalue estimate
  std::size_t max_steps = 400;
  double inner_tol = 1e-13;  // CG tolerance for inverted applications
};

struct EigenEstimate {
  double value = 0.0;
  IterStats stats;
};

// Extremal Rayleigh quotient of an M-self-adjoint PSD operator. Supplied
// kernel vectors (M-orthonormal) are deflated from every Krylov vector.
// SmallestNonzero runs Lanczos on the pseudoinverse action (inner CG solves)
// with the start vector confined to the range, so the nullspace never enters.
EigenEstimate lanczos_extremal(const LinOp& a, const GramOperator& m,
                               Extremal which,
                               const std::vector<Vec>& kernel_basis = {},
                               LanczosOptions opt = {});

}  // namespace hilcert
