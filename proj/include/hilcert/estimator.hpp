#pragma once

#include "hilcert/solver.hpp"

namespace hilcert {

// Error decomposition of e = x - x_tilde at a level into range / kernel /
// adjoint-range parts, M-orthogonal by construction.
struct ErrorDecomposition {
  Vec e, e_prev, e_kernel, e_adj;
  double pythagoras_gap = 0.0;
};

ErrorDecomposition decompose_error(const HilbertComplex& cx, std::size_t level,
                                   const Vec& x_tilde, const Vec& x,
                                   double tol = 1e-10);

// Friedrichs/Poincare constants entering the bounds, inflated by a safety
// factor so the upper bounds stay guaranteed under eigenvalue tolerance.
// Overrides replace the computed values (any upper bound keeps validity).
struct BoundConstants {
  double c_prev = 0.0;  // constant of A_{level-1}
  double c_cur = 0.0;   // constant of A_level
  double c_next = 0.0;  // constant of A_{level+1}
  double safety = 1e-8;
};

struct ConstantOverrides {
  std::optional<double> c_prev, c_cur, c_next;
};

BoundConstants bound_constants(const HilbertComplex& cx, std::size_t level,
                               const ConstantOverrides& overrides = {});

// The free vectors entering the bound functionals. Any choice with matching
// dimensions is admissible; the bounds hold for all of them.
struct TrialFields {
  Vec zeta;       // H_level, upper g-part
  Vec xi;         // H_level, upper f-part
  Vec phi;        // H_{level-1}, lower g-part and kernel upper
  Vec phi_prime;  // H_{level+1}, lower f-part and kernel upper
  Vec theta;      // K_level, kernel lower

  void validate(const HilbertComplex& cx, std::size_t level) const;
};

struct BoundValues {
  double upper_g = 0.0, upper_f = 0.0, upper_k = 0.0;  // bound the component norms
  double lower_g = 0.0, lower_f = 0.0, lower_k = 0.0;  // bound the squared norms
};

// Point evaluations of the bound functionals. Every value is a guaranteed
// bound for its error component no matter which trial field is supplied:
// uppers bound the component norm, lowers bound its square.
double upper_bound_g_part(const HilbertComplex& cx, std::size_t level,
                          const Vec& x_tilde, const Vec& g, const Vec& zeta,
                          double c_prev);
double upper_bound_f_part(const HilbertComplex& cx, std::size_t level,
                          const Vec& x_tilde, const Vec& f, const Vec& xi,
                          double c_cur);
double upper_bound_kernel_part(const HilbertComplex& cx, std::size_t level,
                               const Vec& x_tilde, const Vec& k, const Vec& phi,
                               const Vec& phi_prime);
double lower_bound_g_part(const HilbertComplex& cx, std::size_t level,
                          const Vec& x_tilde, const Vec& g, const Vec& phi);
double lower_bound_f_part(const HilbertComplex& cx, std::size_t level,
                          const Vec& x_tilde, const Vec& f, const Vec& phi_prime);
double lower_bound_kernel_part(const HilbertComplex& cx, std::size_t level,
                               const Vec& x_tilde, const Vec& k, const Vec& theta);

// All six forms at once for a trial-field bundle.
BoundValues evaluate_bounds(const HilbertComplex& cx, std::size_t level,
                            const Vec& x_tilde, const Vec& f, const Vec& g,
                            const Vec& k, const TrialFields& trial,
                            const BoundConstants& c);

// Weighted least-squares functional for conforming approximations; two-sided
// equivalent to the graph-norm error.
double conforming_functional(const HilbertComplex& cx, std::size_t level,
                             const Vec& x_tilde, const Vec& f, const Vec& g,
                             const Vec& k, const BoundConstants& c);

struct MinimizeOptions {
  double stop_rtol = 1e-6;   // relative F-decrease that ends the loop
  std::size_t maxit = 20;    // outer iteration budget
  double inner_tol = 1e-12;  // CG tolerance of the inner solves
};

struct MinimizeResult {
  double t = 0.0;
  Vec arg;
  double bound_sq = 0.0;  // final functional value, >= squared component norm
  std::vector<std::pair<double, double>> log;  // (t_n, F_n) per outer step
  bool converged = false;
  std::size_t inner_iterations = 0;
};

// Alternating minimization of the split upper-bound functional
//   F(xi, t) = (1 + 1/t) c^2 ||A xi - data||^2 + (1 + t) ||xi - x_tilde||^2,
// exact in t, CG in xi. The _f variant works on A_level against f, the _g
// variant on A_{level-1}^* against g. start may be null (a default start
// different from x_tilde is chosen).
MinimizeResult minimize_upper_f(const HilbertComplex& cx, std::size_t level,
                                const Vec& x_tilde, const Vec& f, double c_cur,
                                MinimizeOptions opt = {}, const Vec* start = nullptr);
MinimizeResult minimize_upper_g(const HilbertComplex& cx, std::size_t level,
                                const Vec& x_tilde, const Vec& g, double c_prev,
                                MinimizeOptions opt = {}, const Vec* start = nullptr);

struct ComponentBound {
  std::string name;
  bool active = true;       // false when the operator is absent or zero
  bool exact_zero = false;  // membership-detected zero, estimation skipped
  double lower = 0.0;       // guaranteed lower bound for the component norm
  double upper = 0.0;       // guaranteed upper bound
  Vec upper_arg, lower_arg;
  std::vector<std::pair<double, double>> log;
  bool converged = true;
  bool ok = true;
  std::string error;
};

struct BoundReport {
  std::vector<ComponentBound> components;
  double lower_total = 0.0, upper_total = 0.0;  // combined in quadrature
  bool all_ok = true;
  bool all_converged = true;
  double efficiency_index = 0.0;  // upper_total / ||e||, when exact e known
};

BoundReport two_sided_estimate(const HilbertComplex& cx, std::size_t level,
                               const Vec& x_tilde, const Vec& f, const Vec& g,
                               const Vec& k, std::size_t budget = 20,
                               double tol = 1e-10,
                               const ConstantOverrides& overrides = {});

void attach_efficiency(BoundReport& report, double exact_error_norm);

struct SecondOrderBoundReport {
  BoundReport e_report;  // components of e = x - x_tilde
  BoundReport h_report;  // components of h = A_level x - y_tilde
  double e_adj_composite_upper = 0.0;  // three-term composite bound for ||e_adj||
};

// Bounds for the second-order system A_l^* A_l x = f, A_{l-1}^* x = g,
// pi_l x = k, with y_tilde approximating y = A_l x.
SecondOrderBoundReport second_order_estimate(const HilbertComplex& cx,
                                             std::size_t level, const Vec& x_tilde,
                                             const Vec& y_tilde, const Vec& f,
                                             const Vec& g, const Vec& k,
                                             std::size_t budget = 20,
                                             double tol = 1e-10,
                                             const ConstantOverrides& overrides = {});

}  // namespace hilcert
