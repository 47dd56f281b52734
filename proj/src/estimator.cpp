#include "hilcert/estimator.hpp"

#include <cmath>
#include <limits>

namespace hilcert {

namespace {

Vec or_zeros(const Vec& v, std::size_t n) {
  if (v.empty()) return Vec(n, 0.0);
  if (v.size() != n) throw std::invalid_argument("estimator: dimension mismatch");
  return v;
}

Vec diff(const Vec& a, const Vec& b) {
  Vec d = a;
  kernels::axpy(-1.0, b.data(), d.data(), d.size());
  return d;
}

bool op_active(const HilbertComplex& cx, std::size_t l) {
  return cx.has_op(l) && cx.op(l).max_abs() > 0.0;
}

constexpr double membership_rtol = 1e-10;

}  // namespace

ErrorDecomposition decompose_error(const HilbertComplex& cx, std::size_t level,
                                   const Vec& x_tilde, const Vec& x, double tol) {
  if (x.size() != cx.dim(level) || x_tilde.size() != cx.dim(level))
    throw std::invalid_argument("decompose_error: dimension mismatch");
  ErrorDecomposition dec;
  dec.e = diff(x, x_tilde);
  HelmholtzParts parts = helmholtz_decompose(cx, level, dec.e, tol);
  dec.e_prev = std::move(parts.prev);
  dec.e_kernel = std::move(parts.kernel);
  dec.e_adj = std::move(parts.adj);
  dec.pythagoras_gap = parts.pythagoras_gap;
  return dec;
}

BoundConstants bound_constants(const HilbertComplex& cx, std::size_t level,
                               const ConstantOverrides& overrides) {
  BoundConstants c;
  auto fetch = [&](std::size_t op_index) -> double {
    const ConstantsReport& rep = cx.constants(op_index);
    if (rep.no_nonzero_singular_value) return 0.0;  // unused: operator is zero
    if (!rep.rank_stable)
      throw std::domain_error(
          "bound_constants: operator " + std::to_string(op_index) +
          " is numerically rank-deficient; bounds would be meaningless");
    return rep.c * (1.0 + c.safety);
  };
  if (level > 0 && op_active(cx, level - 1))
    c.c_prev = overrides.c_prev ? *overrides.c_prev : fetch(level - 1);
  if (op_active(cx, level))
    c.c_cur = overrides.c_cur ? *overrides.c_cur : fetch(level);
  if (cx.has_op(level + 1) && op_active(cx, level + 1))
    c.c_next = overrides.c_next ? *overrides.c_next : fetch(level + 1);
  return c;
}

double upper_bound_g_part(const HilbertComplex& cx, std::size_t level,
                          const Vec& x_tilde, const Vec& g, const Vec& zeta,
                          double c_prev) {
  if (level == 0 || !cx.has_op(level - 1)) return 0.0;
  Vec r = cx.adjoint_action(level - 1).apply(zeta);
  kernels::axpy(-1.0, g.data(), r.data(), r.size());
  return c_prev * cx.gram(level - 1).norm(r) + cx.gram(level).norm(diff(zeta, x_tilde));
}

double upper_bound_f_part(const HilbertComplex& cx, std::size_t level,
                          const Vec& x_tilde, const Vec& f, const Vec& xi,
                          double c_cur) {
  if (!cx.has_op(level)) return 0.0;
  Vec r = cx.op(level).apply(xi);
  kernels::axpy(-1.0, f.data(), r.data(), r.size());
  return c_cur * cx.gram(level + 1).norm(r) + cx.gram(level).norm(diff(xi, x_tilde));
}

double upper_bound_kernel_part(const HilbertComplex& cx, std::size_t level,
                               const Vec& x_tilde, const Vec& k, const Vec& phi,
                               const Vec& phi_prime) {
  Vec v = diff(k, x_tilde);
  if (level > 0 && cx.has_op(level - 1) && !phi.empty()) {
    Vec ap = cx.op(level - 1).apply(phi);
    kernels::axpy(1.0, ap.data(), v.data(), v.size());
  }
  if (cx.has_op(level) && !phi_prime.empty()) {
    Vec ap = cx.adjoint_action(level).apply(phi_prime);
    kernels::axpy(1.0, ap.data(), v.data(), v.size());
  }
  return cx.gram(level).norm(v);
}

double lower_bound_g_part(const HilbertComplex& cx, std::size_t level,
                          const Vec& x_tilde, const Vec& g, const Vec& phi) {
  if (level == 0 || !cx.has_op(level - 1)) return 0.0;
  Vec ap = cx.op(level - 1).apply(phi);
  Vec two_xt_plus = x_tilde;
  kernels::scale(2.0, two_xt_plus.data(), two_xt_plus.size());
  kernels::axpy(1.0, ap.data(), two_xt_plus.data(), two_xt_plus.size());
  return 2.0 * cx.gram(level - 1).dot(g, phi) - cx.gram(level).dot(two_xt_plus, ap);
}

double lower_bound_f_part(const HilbertComplex& cx, std::size_t level,
                          const Vec& x_tilde, const Vec& f, const Vec& phi_prime) {
  if (!cx.has_op(level)) return 0.0;
  Vec ap = cx.adjoint_action(level).apply(phi_prime);
  Vec two_xt_plus = x_tilde;
  kernels::scale(2.0, two_xt_plus.data(), two_xt_plus.size());
  kernels::axpy(1.0, ap.data(), two_xt_plus.data(), two_xt_plus.size());
  return 2.0 * cx.gram(level + 1).dot(f, phi_prime) - cx.gram(level).dot(two_xt_plus, ap);
}

double lower_bound_kernel_part(const HilbertComplex& cx, std::size_t level,
                               const Vec& x_tilde, const Vec& k, const Vec& theta) {
  Vec v = diff(k, x_tilde);
  kernels::scale(2.0, v.data(), v.size());
  kernels::axpy(-1.0, theta.data(), v.data(), v.size());
  return cx.gram(level).dot(v, theta);
}

void TrialFields::validate(const HilbertComplex& cx, std::size_t level) const {
  auto check = [](const Vec& v, std::size_t n, const char* what) {
    if (!v.empty() && v.size() != n)
      throw std::invalid_argument(std::string("TrialFields: bad size for ") + what);
  };
  check(zeta, cx.dim(level), "zeta");
  check(xi, cx.dim(level), "xi");
  if (level > 0) check(phi, cx.dim(level - 1), "phi");
  if (level + 1 < cx.num_spaces()) check(phi_prime, cx.dim(level + 1), "phi_prime");
  check(theta, cx.dim(level), "theta");
}

BoundValues evaluate_bounds(const HilbertComplex& cx, std::size_t level,
                            const Vec& x_tilde, const Vec& f, const Vec& g,
                            const Vec& k, const TrialFields& trial,
                            const BoundConstants& c) {
  trial.validate(cx, level);
  BoundValues v;
  if (!trial.zeta.empty())
    v.upper_g = upper_bound_g_part(cx, level, x_tilde, g, trial.zeta, c.c_prev);
  if (!trial.xi.empty())
    v.upper_f = upper_bound_f_part(cx, level, x_tilde, f, trial.xi, c.c_cur);
  v.upper_k = upper_bound_kernel_part(cx, level, x_tilde, k, trial.phi, trial.phi_prime);
  if (!trial.phi.empty())
    v.lower_g = lower_bound_g_part(cx, level, x_tilde, g, trial.phi);
  if (!trial.phi_prime.empty())
    v.lower_f = lower_bound_f_part(cx, level, x_tilde, f, trial.phi_prime);
  if (!trial.theta.empty())
    v.lower_k = lower_bound_kernel_part(cx, level, x_tilde, k, trial.theta);
  return v;
}

double conforming_functional(const HilbertComplex& cx, std::size_t level,
                             const Vec& x_tilde, const Vec& f, const Vec& g,
                             const Vec& k, const BoundConstants& c) {
  const std::size_t n = cx.dim(level);
  Vec kk = or_zeros(k, n);
  double value = 0.0;
  Vec pk = cohomology_project(cx, level, x_tilde);
  Vec dk = diff(kk, pk);
  const double nk = cx.gram(level).norm(dk);
  value += nk * nk;
  if (cx.has_op(level)) {
    Vec r = cx.op(level).apply(x_tilde);
    kernels::axpy(-1.0, f.data(), r.data(), r.size());
    const double nr = cx.gram(level + 1).norm(r);
    value += (1.0 + c.c_cur * c.c_cur) * nr * nr;
  }
  if (level > 0 && cx.has_op(level - 1)) {
    Vec r = cx.adjoint_action(level - 1).apply(x_tilde);
    kernels::axpy(-1.0, g.data(), r.data(), r.size());
    const double nr = cx.gram(level - 1).norm(r);
    value += (1.0 + c.c_prev * c.c_prev) * nr * nr;
  }
  return value;
}

namespace {

struct SplitForm {
  // F(arg, t) = (1 + 1/t) c^2 ||op(arg) - data||^2 + (1 + t) ||arg - x_tilde||^2
  LinOp op;            // A_level or A_{level-1}^*
  LinOp op_adj;        // its adjoint
  const GramOperator* m_arg;
  const GramOperator* m_data;
  const Vec* data;
  const Vec* x_tilde;
  double c = 0.0;

  double residual(const Vec& arg) const {
    Vec r = op.apply(arg);
    kernels::axpy(-1.0, data->data(), r.data(), r.size());
    return m_data->norm(r);
  }
  double distance(const Vec& arg) const {
    Vec d = arg;
    kernels::axpy(-1.0, x_tilde->data(), d.data(), d.size());
    return m_arg->norm(d);
  }
  double value(double res, double dist, double t) const {
    return (1.0 + 1.0 / t) * c * c * res * res + (1.0 + t) * dist * dist;
  }
};

MinimizeResult minimize_split(const SplitForm& form, MinimizeOptions opt,
                              const Vec* start) {
  const std::size_t n = form.op.cols;
  MinimizeResult out;

  Vec xi;
  if (start && start->size() == n) {
    xi = *start;
  } else {
    // Any start different from x_tilde is admissible.
    xi = Vec(n, 0.0);
    if (form.m_arg->norm(*form.x_tilde) == 0.0 && n > 0) xi[0] = 1.0;
  }

  // t = infinity corresponds to arg = x_tilde; its functional value
  // c^2 ||op(x_tilde) - data||^2 is a valid fallback bound.
  const double res_xt = form.residual(*form.x_tilde);
  double best = form.c * form.c * res_xt * res_xt;
  Vec best_arg = *form.x_tilde;
  double best_t = std::numeric_limits<double>::infinity();
  if (best == 0.0) {
    out.converged = true;
    out.bound_sq = 0.0;
    out.arg = best_arg;
    out.t = best_t;
    return out;
  }

  LinOp normal = compose(form.op_adj, form.op);  // A^* A on the argument space
  double f_prev = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < opt.maxit; ++it) {
    const double res = form.residual(xi);
    const double dist = form.distance(xi);
    if (dist == 0.0) {
      // Degenerate: xi == x_tilde, covered by the fallback bound.
      break;
    }
    const double t = form.c * res / dist;
    if (t == 0.0) {
      const double fv = dist * dist;
      out.log.emplace_back(t, fv);
      if (fv < best) {
        best = fv;
        best_arg = xi;
        best_t = t;
      }
      out.converged = true;
      break;
    }
    // Inner minimization: (c^2 A^* A + t) arg = c^2 A^* data + t x_tilde.
    const double c2 = form.c * form.c;
    LinOp shifted_normal{n, n, [&normal, c2, t](const double* x, double* y) {
                           normal.apply_fn(x, y);
                           for (std::size_t i = 0; i < normal.rows; ++i)
                             y[i] = c2 * y[i] + t * x[i];
                         }};
    Vec rhs = form.op_adj.apply(*form.data);
    kernels::scale(c2, rhs.data(), rhs.size());
    kernels::axpy(t, form.x_tilde->data(), rhs.data(), rhs.size());
    auto [next, st] = cg_solve(shifted_normal, *form.m_arg, rhs, {opt.inner_tol, 0}, &xi);
    out.inner_iterations += st.iterations;
    if (!st.converged)
      throw IterationFailure("minimize: inner CG failed (" + st.breakdown_reason + ")", st);
    xi = std::move(next);

    const double fv = form.value(form.residual(xi), form.distance(xi), t);
    if (fv >= f_prev) {
      // Exact alternation cannot increase F; stop at stagnation.
      out.converged = true;
      break;
    }
    out.log.emplace_back(t, fv);
    if (fv < best) {
      best = fv;
      best_arg = xi;
      best_t = t;
    }
    if (f_prev - fv <= opt.stop_rtol * std::max(fv, 1e-300) &&
        f_prev != std::numeric_limits<double>::infinity()) {
      out.converged = true;
      break;
    }
    f_prev = fv;
  }

  out.t = best_t;
  out.arg = std::move(best_arg);
  out.bound_sq = best;
  return out;
}

}  // namespace

MinimizeResult minimize_upper_f(const HilbertComplex& cx, std::size_t level,
                                const Vec& x_tilde, const Vec& f, double c_cur,
                                MinimizeOptions opt, const Vec* start) {
  if (!cx.has_op(level))
    throw std::invalid_argument("minimize_upper_f: no operator at this level");
  SplitForm form{cx.op_action(level), cx.adjoint_action(level), &cx.gram(level),
                 &cx.gram(level + 1), &f, &x_tilde, c_cur};
  return minimize_split(form, opt, start);
}

MinimizeResult minimize_upper_g(const HilbertComplex& cx, std::size_t level,
                                const Vec& x_tilde, const Vec& g, double c_prev,
                                MinimizeOptions opt, const Vec* start) {
  if (level == 0 || !cx.has_op(level - 1))
    throw std::invalid_argument("minimize_upper_g: no operator below this level");
  SplitForm form{cx.adjoint_action(level - 1), cx.op_action(level - 1), &cx.gram(level),
                 &cx.gram(level - 1), &g, &x_tilde, c_prev};
  return minimize_split(form, opt, start);
}

namespace {

// Maximizer of the concave lower-bound quadratic by CG on its stationarity
// equation; any iterate yields a valid lower bound.
Vec maximize_lower_g(const HilbertComplex& cx, std::size_t level, const Vec& x_tilde,
                     const Vec& g, double tol) {
  LinOp a = cx.op_action(level - 1);
  LinOp as = cx.adjoint_action(level - 1);
  Vec rhs = g;
  Vec asx = as.apply(x_tilde);
  kernels::axpy(-1.0, asx.data(), rhs.data(), rhs.size());
  auto [phi, st] = cg_solve(compose(as, a), cx.gram(level - 1), rhs, {tol, 0});
  return phi;
}

Vec maximize_lower_f(const HilbertComplex& cx, std::size_t level, const Vec& x_tilde,
                     const Vec& f, double tol) {
  LinOp a = cx.op_action(level);
  LinOp as = cx.adjoint_action(level);
  Vec rhs = f;
  Vec ax = a.apply(x_tilde);
  kernels::axpy(-1.0, ax.data(), rhs.data(), rhs.size());
  auto [phi, st] = cg_solve(compose(a, as), cx.gram(level + 1), rhs, {tol, 0});
  return phi;
}

ComponentBound estimate_g_component(const HilbertComplex& cx, std::size_t level,
                                    const Vec& x_tilde, const Vec& g,
                                    const BoundConstants& consts, std::size_t budget,
                                    double tol, const Vec* warm) {
  ComponentBound comp;
  comp.name = "g-part";
  if (level == 0 || !op_active(cx, level - 1)) {
    comp.active = false;
    return comp;
  }
  try {
    MinimizeResult up = minimize_upper_g(cx, level, x_tilde, g, consts.c_prev,
                                         {1e-6, budget, tol * 1e-2}, warm);
    comp.upper = std::sqrt(up.bound_sq);
    comp.upper_arg = std::move(up.arg);
    comp.log = std::move(up.log);
    comp.converged = up.converged;
    Vec phi = maximize_lower_g(cx, level, x_tilde, g, tol);
    const double lower_sq = lower_bound_g_part(cx, level, x_tilde, g, phi);
    comp.lower = std::sqrt(std::max(lower_sq, 0.0));
    comp.lower_arg = std::move(phi);
  } catch (const IterationFailure& e) {
    comp.ok = false;
    comp.error = e.what();
  }
  return comp;
}

ComponentBound estimate_f_component(const HilbertComplex& cx, std::size_t level,
                                    const Vec& x_tilde, const Vec& f,
                                    const BoundConstants& consts, std::size_t budget,
                                    double tol, const Vec* warm) {
  ComponentBound comp;
  comp.name = "f-part";
  if (!op_active(cx, level)) {
    comp.active = false;
    return comp;
  }
  try {
    MinimizeResult up = minimize_upper_f(cx, level, x_tilde, f, consts.c_cur,
                                         {1e-6, budget, tol * 1e-2}, warm);
    comp.upper = std::sqrt(up.bound_sq);
    comp.upper_arg = std::move(up.arg);
    comp.log = std::move(up.log);
    comp.converged = up.converged;
    Vec phi = maximize_lower_f(cx, level, x_tilde, f, tol);
    const double lower_sq = lower_bound_f_part(cx, level, x_tilde, f, phi);
    comp.lower = std::sqrt(std::max(lower_sq, 0.0));
    comp.lower_arg = std::move(phi);
  } catch (const IterationFailure& e) {
    comp.ok = false;
    comp.error = e.what();
  }
  return comp;
}

ComponentBound estimate_kernel_component(const HilbertComplex& cx, std::size_t level,
                                         const Vec& x_tilde, const Vec& k, double tol) {
  ComponentBound comp;
  comp.name = "kernel-part";
  if (cx.cohomology(level).dim() == 0) {
    comp.active = false;
    return comp;
  }
  const GramOperator& m = cx.gram(level);
  Vec pk = cohomology_project(cx, level, x_tilde);
  Vec theta = diff(k, pk);  // = pi(k - x_tilde) for k in the kernel space
  const double scale = std::max(m.norm(x_tilde), m.norm(k));
  if (m.norm(theta) <= membership_rtol * std::max(scale, 1e-300)) {
    comp.exact_zero = true;
    comp.lower = comp.upper = 0.0;
    return comp;
  }
  try {
    Vec phi, phi_prime;
    if (auto w = projection_potential(cx, RangeSide::PrevRange, level, x_tilde, tol))
      phi = std::move(*w);
    if (auto w = projection_potential(cx, RangeSide::AdjRange, level, x_tilde, tol))
      phi_prime = std::move(*w);
    comp.upper = upper_bound_kernel_part(cx, level, x_tilde, k, phi, phi_prime);
    comp.lower = std::sqrt(std::max(lower_bound_kernel_part(cx, level, x_tilde, k, theta), 0.0));
    comp.lower_arg = std::move(theta);
  } catch (const IterationFailure& e) {
    comp.ok = false;
    comp.error = e.what();
  }
  return comp;
}

void finalize_totals(BoundReport& rep) {
  double lo2 = 0.0, up2 = 0.0;
  for (const ComponentBound& c : rep.components) {
    rep.all_ok = rep.all_ok && c.ok;
    rep.all_converged = rep.all_converged && (!c.active || !c.ok || c.converged);
    if (!c.active || !c.ok || c.exact_zero) continue;
    lo2 += c.lower * c.lower;
    up2 += c.upper * c.upper;
  }
  rep.lower_total = std::sqrt(lo2);
  rep.upper_total = std::sqrt(up2);
}

}  // namespace

BoundReport two_sided_estimate(const HilbertComplex& cx, std::size_t level,
                               const Vec& x_tilde, const Vec& f, const Vec& g,
                               const Vec& k, std::size_t budget, double tol,
                               const ConstantOverrides& overrides) {
  const std::size_t n = cx.dim(level);
  Vec xt = or_zeros(x_tilde, n);
  Vec kk = or_zeros(k, n);
  Vec ff = cx.has_op(level) ? or_zeros(f, cx.dim(level + 1)) : Vec();
  Vec gg = (level > 0 && cx.has_op(level - 1)) ? or_zeros(g, cx.dim(level - 1)) : Vec();

  BoundConstants consts = bound_constants(cx, level, overrides);
  BoundReport rep;

  // Warm starts shift x_tilde by the data-derived partial solution of the
  // other component, which leaves that component's residual unchanged.
  Vec warm_f, warm_g;
  const Vec* warm_f_ptr = nullptr;
  const Vec* warm_g_ptr = nullptr;
  if (level > 0 && op_active(cx, level - 1) && cx.gram(level - 1).norm(gg) > 0.0) {
    LinOp a = cx.op_action(level - 1);
    LinOp as = cx.adjoint_action(level - 1);
    auto [z, st] = cg_solve(compose(as, a), cx.gram(level - 1), gg, {tol, 0});
    Vec xg = a.apply(z);
    warm_f = xt;
    kernels::axpy(1.0, xg.data(), warm_f.data(), n);
    warm_f_ptr = &warm_f;
  }
  if (op_active(cx, level) && cx.gram(level + 1).norm(ff) > 0.0) {
    LinOp a = cx.op_action(level);
    LinOp as = cx.adjoint_action(level);
    auto [w, st] = cg_solve(compose(a, as), cx.gram(level + 1), ff, {tol, 0});
    Vec xf = as.apply(w);
    warm_g = xt;
    kernels::axpy(1.0, xf.data(), warm_g.data(), n);
    warm_g_ptr = &warm_g;
  }

  rep.components.push_back(
      estimate_g_component(cx, level, xt, gg, consts, budget, tol, warm_g_ptr));
  rep.components.push_back(estimate_kernel_component(cx, level, xt, kk, tol));
  rep.components.push_back(
      estimate_f_component(cx, level, xt, ff, consts, budget, tol, warm_f_ptr));
  finalize_totals(rep);
  return rep;
}

void attach_efficiency(BoundReport& report, double exact_error_norm) {
  report.efficiency_index =
      exact_error_norm > 0.0 ? report.upper_total / exact_error_norm : 0.0;
}

SecondOrderBoundReport second_order_estimate(const HilbertComplex& cx,
                                             std::size_t level, const Vec& x_tilde,
                                             const Vec& y_tilde, const Vec& f,
                                             const Vec& g, const Vec& k,
                                             std::size_t budget, double tol,
                                             const ConstantOverrides& overrides) {
  if (!cx.has_op(level))
    throw std::invalid_argument("second_order_estimate: no operator at this level");
  const std::size_t n = cx.dim(level);
  const std::size_t n1 = cx.dim(level + 1);
  Vec xt = or_zeros(x_tilde, n);
  Vec yt = or_zeros(y_tilde, n1);
  Vec ff = or_zeros(f, n);
  Vec gg = (level > 0 && cx.has_op(level - 1)) ? or_zeros(g, cx.dim(level - 1)) : Vec();
  Vec kk = or_zeros(k, n);

  BoundConstants consts = bound_constants(cx, level, overrides);
  SecondOrderBoundReport out;

  // ---- components of e ------------------------------------------------
  out.e_report.components.push_back(
      estimate_g_component(cx, level, xt, gg, consts, budget, tol, nullptr));
  out.e_report.components.push_back(estimate_kernel_component(cx, level, xt, kk, tol));

  // e_adj via the second-order forms built on S = A^* A.
  {
    ComponentBound comp;
    comp.name = "f-part-second-order";
    LinOp a = cx.op_action(level);
    LinOp as = cx.adjoint_action(level);
    LinOp s = compose(as, a);
    const double c2 = consts.c_cur;
    try {
      SplitForm form{s, s, &cx.gram(level), &cx.gram(level), &ff, &xt, c2 * c2};
      MinimizeResult up = minimize_split(form, {1e-6, budget, tol * 1e-2}, nullptr);
      comp.upper = std::sqrt(up.bound_sq);
      comp.upper_arg = up.arg;
      comp.log = std::move(up.log);
      comp.converged = up.converged;

      // Composite three-term bound at (xi*, zeta*): zeta* from the h-side
      // split form around A xi*.
      Vec axi = a.apply(up.arg);
      MinimizeResult zr = minimize_upper_g(cx, level + 1, axi, ff, c2,
                                           {1e-6, budget, tol * 1e-2}, nullptr);
      Vec zres = as.apply(zr.arg);
      kernels::axpy(-1.0, ff.data(), zres.data(), zres.size());
      Vec zdiff = zr.arg;
      kernels::axpy(-1.0, axi.data(), zdiff.data(), zdiff.size());
      Vec xdiff = up.arg;
      kernels::axpy(-1.0, xt.data(), xdiff.data(), xdiff.size());
      out.e_adj_composite_upper = c2 * c2 * cx.gram(level).norm(zres) +
                                  c2 * cx.gram(level + 1).norm(zdiff) +
                                  cx.gram(level).norm(xdiff);

      // Lower bound: stationarity S^2 phi = f - S x_tilde, any iterate valid.
      Vec rhs = ff;
      Vec sx = s.apply(xt);
      kernels::axpy(-1.0, sx.data(), rhs.data(), rhs.size());
      auto [phi, st] = cg_solve(compose(s, s), cx.gram(level), rhs, {tol, 0});
      Vec sphi = s.apply(phi);
      Vec two_xt_plus = xt;
      kernels::scale(2.0, two_xt_plus.data(), two_xt_plus.size());
      kernels::axpy(1.0, sphi.data(), two_xt_plus.data(), two_xt_plus.size());
      const double lower_sq =
          2.0 * cx.gram(level).dot(ff, phi) - cx.gram(level).dot(two_xt_plus, sphi);
      comp.lower = std::sqrt(std::max(lower_sq, 0.0));
      comp.lower_arg = std::move(phi);
    } catch (const IterationFailure& e) {
      comp.ok = false;
      comp.error = e.what();
    }
    out.e_report.components.push_back(std::move(comp));
  }
  finalize_totals(out.e_report);

  // ---- components of h at level+1 --------------------------------------
  // The pair (x, y = A x) solves the first-order system at level+1 with data
  // f (previous-range part), 0 (current part), 0 (kernel part).
  const std::size_t lh = level + 1;
  BoundConstants h_consts;
  h_consts.c_prev = consts.c_cur;   // constant of A_level
  h_consts.c_cur = consts.c_next;   // constant of A_{level+1}
  h_consts.safety = consts.safety;

  // Membership y_tilde in R(A_level): both h_adj and h_K vanish then.
  bool y_in_range = false;
  {
    Vec py = project_range(cx, RangeSide::PrevRange, lh, yt, tol);
    Vec d = diff(yt, py);
    const double ny = cx.gram(lh).norm(yt);
    y_in_range = cx.gram(lh).norm(d) <= membership_rtol * std::max(ny, 1e-300);
  }

  out.h_report.components.push_back(
      estimate_g_component(cx, lh, yt, ff, h_consts, budget, tol, nullptr));

  {
    ComponentBound comp;
    comp.name = "kernel-part";
    if (cx.cohomology(lh).dim() == 0) {
      comp.active = false;
    } else if (y_in_range) {
      comp.exact_zero = true;
    } else {
      comp = estimate_kernel_component(cx, lh, yt, Vec(cx.dim(lh), 0.0), tol);
    }
    out.h_report.components.push_back(std::move(comp));
  }

  {
    ComponentBound comp;
    comp.name = "f-part-constant-free";
    if (!cx.has_op(lh) || !op_active(cx, lh)) {
      // No operator above: R(A_{lh}^*) is trivial, the component vanishes.
      comp.active = cx.has_op(lh) && op_active(cx, lh);
      if (!comp.active) comp.upper = comp.lower = 0.0;
    }
    if (y_in_range) {
      comp.exact_zero = true;
      comp.active = true;
    } else if (cx.has_op(lh) && op_active(cx, lh)) {
      try {
        // Constant-free form: project y_tilde onto R(A_{lh}^*); evaluating the
        // generic form at the projected argument keeps the guarantee under
        // inexact projection via the c_next residual term.
        Vec p = project_range(cx, RangeSide::AdjRange, lh, yt, tol);
        Vec xi_hat = diff(yt, p);
        comp.upper = upper_bound_f_part(cx, lh, yt, Vec(cx.dim(lh + 1), 0.0), xi_hat,
                                        consts.c_next);
        comp.upper_arg = std::move(xi_hat);
        Vec phi = maximize_lower_f(cx, lh, yt, Vec(cx.dim(lh + 1), 0.0), tol);
        comp.lower =
            std::sqrt(std::max(lower_bound_f_part(cx, lh, yt, Vec(cx.dim(lh + 1), 0.0), phi), 0.0));
        comp.lower_arg = std::move(phi);
      } catch (const IterationFailure& e) {
        comp.ok = false;
        comp.error = e.what();
      }
    }
    out.h_report.components.push_back(std::move(comp));
  }
  finalize_totals(out.h_report);
  return out;
}

}  // namespace hilcert
