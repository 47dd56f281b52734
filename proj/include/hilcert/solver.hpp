#pragma once

#include "hilcert/complex.hpp"

namespace hilcert {

// Data for the first-order system at an interior level l of a complex:
//   A_l x = f,   A_{l-1}^* x = g,   pi_l x = k.
// Empty vectors mean zero data; f and g must be empty when the corresponding
// operator does not exist at that level.
struct FirstOrderProblem {
  const HilbertComplex* cx = nullptr;
  std::size_t level = 0;
  Vec f, g, k;
};

// Second-order variant: A_l^* A_l x = f (f lives in H_l), rest unchanged.
struct SecondOrderProblem {
  const HilbertComplex* cx = nullptr;
  std::size_t level = 0;
  Vec f, g, k;
};

struct CompatibilityReport {
  double dist_f = 0.0, dist_g = 0.0, dist_k = 0.0;  // M-distances to the subspaces
  double rel_f = 0.0, rel_g = 0.0, rel_k = 0.0;
  bool pass = true;
  Vec f_proj, g_proj, k_proj;  // data projected onto the required subspaces
};

inline constexpr double compat_rtol = 1e-8;

struct SolveReport {
  Field x;
  Vec x_f, x_g, k;  // M-orthogonal partial solutions
  Vec y_f, z_g;     // potentials with x_f = A_l^* y_f and x_g = A_{l-1} z_g
  double res_f = 0.0, res_g = 0.0, res_k = 0.0;
  double norm_identity_gap = 0.0;  // relative Pythagoras defect of the partials
  IterStats stats_f, stats_g;
  CompatibilityReport compat;
  std::string backend;
};

enum class SolveBackend { Variational, Saddle };

CompatibilityReport check_compatibility(const FirstOrderProblem& p, double tol = 1e-10);
CompatibilityReport check_compatibility(const SecondOrderProblem& p, double tol = 1e-10);

// Incompatible data (relative distance beyond compat_rtol) throws
// IncompatibleData; data inside the band is projected before solving and the
// projection distances are reported. start_seed != 0 re-solves from a
// different range-confined CG start (uniqueness probe).
SolveReport solve_first_order(const FirstOrderProblem& p,
                              SolveBackend backend = SolveBackend::Variational,
                              double tol = 1e-10, unsigned start_seed = 0);

enum class SaddlePart { FPart, GPart };

struct SaddleResult {
  Vec potential;
  Vec multiplier;               // empty for the non-augmented form
  double multiplier_image_norm = 0.0;  // ||A_{l+1}^* v|| resp. ||A_{l-2} w||
  IterStats stats;
};

// The two saddle-point routes for the potentials. The non-augmented form
// seeks the potential orthogonal to the kernel (MINRES from zero on the
// singular normal operator); the augmented form solves the block system with
// an explicit multiplier, which requires the relevant cohomology to vanish.
SaddleResult solve_saddle(const FirstOrderProblem& p, SaddlePart part,
                          bool augmented, double tol = 1e-10);

struct SecondOrderReport {
  SolveReport first_order;
  Vec y;               // y = A_l x, the intermediate first-order unknown
  double res_second = 0.0;  // ||A_l^* y - f||
};

SecondOrderReport solve_second_order(const SecondOrderProblem& p, double tol = 1e-10);

struct IncompatibleData : std::runtime_error {
  IncompatibleData(const std::string& what, CompatibilityReport r)
      : std::runtime_error(what), report(std::move(r)) {}
  CompatibilityReport report;
};

}  // namespace hilcert
