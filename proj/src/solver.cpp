#include "hilcert/solver.hpp"

#include <cmath>
#include <random>

namespace hilcert {

namespace {

Vec zeros(std::size_t n) { return Vec(n, 0.0); }

Vec or_zeros(const Vec& v, std::size_t n, const char* what) {
  if (v.empty()) return zeros(n);
  if (v.size() != n) throw std::invalid_argument(std::string("solver: bad size for ") + what);
  return v;
}

void require_absent(const Vec& v, const char* what) {
  if (!v.empty())
    throw std::invalid_argument(std::string("solver: ") + what +
                                " given but the operator does not exist at this level");
}

struct LevelOps {
  bool has_cur = false, has_prev = false;
  LinOp a_cur, a_cur_adj;    // A_l, A_l^*
  LinOp a_prev, a_prev_adj;  // A_{l-1}, A_{l-1}^*
};

LevelOps level_ops(const HilbertComplex& cx, std::size_t level) {
  LevelOps ops;
  ops.has_cur = cx.has_op(level);
  ops.has_prev = level > 0 && cx.has_op(level - 1);
  if (ops.has_cur) {
    ops.a_cur = cx.op_action(level);
    ops.a_cur_adj = cx.adjoint_action(level);
  }
  if (ops.has_prev) {
    ops.a_prev = cx.op_action(level - 1);
    ops.a_prev_adj = cx.adjoint_action(level - 1);
  }
  return ops;
}

double rel(double dist, double norm) { return norm > 0.0 ? dist / norm : 0.0; }

Vec range_confined_start(const LinOp& normal, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vec v(normal.cols);
  for (double& x : v) x = dist(rng);
  return normal.apply(v);
}

}  // namespace

CompatibilityReport check_compatibility(const FirstOrderProblem& p, double tol) {
  const HilbertComplex& cx = *p.cx;
  const std::size_t l = p.level;
  LevelOps ops = level_ops(cx, l);
  CompatibilityReport rep;

  if (ops.has_cur) {
    Vec f = or_zeros(p.f, cx.dim(l + 1), "f");
    rep.f_proj = project_range(cx, RangeSide::PrevRange, l + 1, f, tol);
    Vec d = f;
    kernels::axpy(-1.0, rep.f_proj.data(), d.data(), d.size());
    rep.dist_f = cx.gram(l + 1).norm(d);
    rep.rel_f = rel(rep.dist_f, cx.gram(l + 1).norm(f));
  } else {
    require_absent(p.f, "f");
  }
  if (ops.has_prev) {
    Vec g = or_zeros(p.g, cx.dim(l - 1), "g");
    rep.g_proj = project_range(cx, RangeSide::AdjRange, l - 1, g, tol);
    Vec d = g;
    kernels::axpy(-1.0, rep.g_proj.data(), d.data(), d.size());
    rep.dist_g = cx.gram(l - 1).norm(d);
    rep.rel_g = rel(rep.dist_g, cx.gram(l - 1).norm(g));
  } else {
    require_absent(p.g, "g");
  }
  Vec k = or_zeros(p.k, cx.dim(l), "k");
  rep.k_proj = cohomology_project(cx, l, k);
  Vec d = k;
  kernels::axpy(-1.0, rep.k_proj.data(), d.data(), d.size());
  rep.dist_k = cx.gram(l).norm(d);
  rep.rel_k = rel(rep.dist_k, cx.gram(l).norm(k));

  rep.pass = rep.rel_f <= compat_rtol && rep.rel_g <= compat_rtol && rep.rel_k <= compat_rtol;
  return rep;
}

CompatibilityReport check_compatibility(const SecondOrderProblem& p, double tol) {
  const HilbertComplex& cx = *p.cx;
  const std::size_t l = p.level;
  LevelOps ops = level_ops(cx, l);
  CompatibilityReport rep;

  if (ops.has_cur) {
    Vec f = or_zeros(p.f, cx.dim(l), "f");
    rep.f_proj = project_range(cx, RangeSide::AdjRange, l, f, tol);
    Vec d = f;
    kernels::axpy(-1.0, rep.f_proj.data(), d.data(), d.size());
    rep.dist_f = cx.gram(l).norm(d);
    rep.rel_f = rel(rep.dist_f, cx.gram(l).norm(f));
  } else {
    require_absent(p.f, "f");
  }
  FirstOrderProblem q{p.cx, p.level, {}, p.g, p.k};
  CompatibilityReport base = check_compatibility(q, tol);
  rep.dist_g = base.dist_g;
  rep.rel_g = base.rel_g;
  rep.g_proj = std::move(base.g_proj);
  rep.dist_k = base.dist_k;
  rep.rel_k = base.rel_k;
  rep.k_proj = std::move(base.k_proj);
  rep.pass = rep.rel_f <= compat_rtol && rep.rel_g <= compat_rtol && rep.rel_k <= compat_rtol;
  return rep;
}

SaddleResult solve_saddle(const FirstOrderProblem& p, SaddlePart part,
                          bool augmented, double tol) {
  const HilbertComplex& cx = *p.cx;
  const std::size_t l = p.level;
  LevelOps ops = level_ops(cx, l);
  SaddleResult out;

  if (part == SaddlePart::FPart) {
    if (!ops.has_cur) throw std::invalid_argument("solve_saddle: no f-part at this level");
    const Vec f = or_zeros(p.f, cx.dim(l + 1), "f");
    LinOp normal = compose(ops.a_cur, ops.a_cur_adj);  // A_l A_l^* on H_{l+1}
    if (!augmented) {
      auto [y, st] = minres_solve(normal, cx.gram(l + 1), f, {tol, 0});
      if (!st.converged)
        throw IterationFailure("solve_saddle: MINRES failed (" + st.breakdown_reason + ")", st);
      out.potential = std::move(y);
      out.stats = st;
      return out;
    }
    if (!cx.has_op(l + 1))
      throw std::invalid_argument("solve_saddle: augmented form needs the next operator");
    if (cx.cohomology(l + 1).dim() != 0)
      throw std::invalid_argument("solve_saddle: augmented form needs trivial cohomology");
    if (!cx.gram(l + 1).is_diagonal() || !cx.gram(l + 2).is_diagonal())
      throw std::invalid_argument("solve_saddle: augmented form needs diagonal Grams");

    const std::size_t n1 = cx.dim(l + 1), n2 = cx.dim(l + 2);
    LinOp a3 = cx.op_action(l + 1);
    LinOp a3s = cx.adjoint_action(l + 1);
    LinOp block{n1 + n2, n1 + n2, [normal, a3, a3s, n1](const double* x, double* y) {
                  Vec tmp(n1);
                  normal.apply_fn(x, y);
                  a3s.apply_fn(x + n1, tmp.data());
                  for (std::size_t i = 0; i < n1; ++i) y[i] += tmp[i];
                  a3.apply_fn(x, y + n1);
                }};
    Vec gram_diag = cx.gram(l + 1).diag();
    gram_diag.insert(gram_diag.end(), cx.gram(l + 2).diag().begin(), cx.gram(l + 2).diag().end());
    GramOperator block_gram = GramOperator::diagonal(std::move(gram_diag));
    Vec rhs = f;
    rhs.resize(n1 + n2, 0.0);
    auto [sol, st] = minres_solve(block, block_gram, rhs, {tol, 0});
    if (!st.converged)
      throw IterationFailure("solve_saddle: MINRES failed (" + st.breakdown_reason + ")", st);
    out.potential = Vec(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(n1));
    out.multiplier = Vec(sol.begin() + static_cast<std::ptrdiff_t>(n1), sol.end());
    out.multiplier_image_norm = cx.gram(l + 1).norm(a3s.apply(out.multiplier));
    out.stats = st;
    return out;
  }

  if (!ops.has_prev) throw std::invalid_argument("solve_saddle: no g-part at this level");
  const Vec g = or_zeros(p.g, cx.dim(l - 1), "g");
  LinOp normal = compose(ops.a_prev_adj, ops.a_prev);  // A_{l-1}^* A_{l-1} on H_{l-1}
  if (!augmented) {
    auto [z, st] = minres_solve(normal, cx.gram(l - 1), g, {tol, 0});
    if (!st.converged)
      throw IterationFailure("solve_saddle: MINRES failed (" + st.breakdown_reason + ")", st);
    out.potential = std::move(z);
    out.stats = st;
    return out;
  }
  if (l < 2 || !cx.has_op(l - 2))
    throw std::invalid_argument("solve_saddle: augmented form needs the operator below");
  if (cx.cohomology(l - 1).dim() != 0)
    throw std::invalid_argument("solve_saddle: augmented form needs trivial cohomology");
  if (!cx.gram(l - 1).is_diagonal() || !cx.gram(l - 2).is_diagonal())
    throw std::invalid_argument("solve_saddle: augmented form needs diagonal Grams");

  const std::size_t n1 = cx.dim(l - 1), n0 = cx.dim(l - 2);
  LinOp a0 = cx.op_action(l - 2);
  LinOp a0s = cx.adjoint_action(l - 2);
  LinOp block{n1 + n0, n1 + n0, [normal, a0, a0s, n1, n0](const double* x, double* y) {
                Vec tmp(n1);
                normal.apply_fn(x, y);
                a0.apply_fn(x + n1, tmp.data());
                for (std::size_t i = 0; i < n1; ++i) y[i] += tmp[i];
                a0s.apply_fn(x, y + n1);
              }};
  Vec gram_diag = cx.gram(l - 1).diag();
  gram_diag.insert(gram_diag.end(), cx.gram(l - 2).diag().begin(), cx.gram(l - 2).diag().end());
  GramOperator block_gram = GramOperator::diagonal(std::move(gram_diag));
  Vec rhs = g;
  rhs.resize(n1 + n0, 0.0);
  auto [sol, st] = minres_solve(block, block_gram, rhs, {tol, 0});
  if (!st.converged)
    throw IterationFailure("solve_saddle: MINRES failed (" + st.breakdown_reason + ")", st);
  out.potential = Vec(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(n1));
  out.multiplier = Vec(sol.begin() + static_cast<std::ptrdiff_t>(n1), sol.end());
  out.multiplier_image_norm = cx.gram(l - 1).norm(a0.apply(out.multiplier));
  out.stats = st;
  return out;
}

SolveReport solve_first_order(const FirstOrderProblem& p, SolveBackend backend,
                              double tol, unsigned start_seed) {
  const HilbertComplex& cx = *p.cx;
  const std::size_t l = p.level;
  const std::size_t n = cx.dim(l);
  LevelOps ops = level_ops(cx, l);

  SolveReport rep;
  rep.backend = backend == SolveBackend::Variational ? "variational" : "saddle";
  rep.compat = check_compatibility(p, tol);
  if (!rep.compat.pass)
    throw IncompatibleData("solve_first_order: data not in the required subspaces",
                           rep.compat);

  rep.x_f = zeros(n);
  rep.x_g = zeros(n);
  rep.k = rep.compat.k_proj.empty() ? zeros(n) : rep.compat.k_proj;

  if (ops.has_cur) {
    const Vec& f = rep.compat.f_proj;
    if (backend == SolveBackend::Variational) {
      LinOp normal = compose(ops.a_cur, ops.a_cur_adj);
      const Vec* x0 = nullptr;
      Vec start;
      if (start_seed) {
        start = range_confined_start(normal, start_seed);
        x0 = &start;
      }
      auto [y, st] = cg_solve(normal, cx.gram(l + 1), f, {tol, 0}, x0);
      if (!st.converged)
        throw IterationFailure("solve_first_order: f-part CG failed (" + st.breakdown_reason + ")", st);
      rep.y_f = std::move(y);
      rep.stats_f = st;
    } else {
      FirstOrderProblem q = p;
      q.f = f;
      const bool augmented = cx.has_op(l + 1) && cx.cohomology(l + 1).dim() == 0 &&
                             cx.gram(l + 1).is_diagonal() && cx.gram(l + 2).is_diagonal();
      SaddleResult sr = solve_saddle(q, SaddlePart::FPart, augmented, tol);
      rep.y_f = std::move(sr.potential);
      rep.stats_f = sr.stats;
    }
    rep.x_f = ops.a_cur_adj.apply(rep.y_f);
  }

  if (ops.has_prev) {
    const Vec& g = rep.compat.g_proj;
    if (backend == SolveBackend::Variational) {
      LinOp normal = compose(ops.a_prev_adj, ops.a_prev);
      const Vec* x0 = nullptr;
      Vec start;
      if (start_seed) {
        start = range_confined_start(normal, start_seed + 1);
        x0 = &start;
      }
      auto [z, st] = cg_solve(normal, cx.gram(l - 1), g, {tol, 0}, x0);
      if (!st.converged)
        throw IterationFailure("solve_first_order: g-part CG failed (" + st.breakdown_reason + ")", st);
      rep.z_g = std::move(z);
      rep.stats_g = st;
    } else {
      FirstOrderProblem q = p;
      q.g = g;
      const bool augmented = l >= 2 && cx.has_op(l - 2) && cx.cohomology(l - 1).dim() == 0 &&
                             cx.gram(l - 1).is_diagonal() && cx.gram(l - 2).is_diagonal();
      SaddleResult sr = solve_saddle(q, SaddlePart::GPart, augmented, tol);
      rep.z_g = std::move(sr.potential);
      rep.stats_g = sr.stats;
    }
    rep.x_g = ops.a_prev.apply(rep.z_g);
  }

  Vec x = rep.k;
  kernels::axpy(1.0, rep.x_f.data(), x.data(), n);
  kernels::axpy(1.0, rep.x_g.data(), x.data(), n);
  rep.x = Field{l, std::move(x)};

  const GramOperator& m = cx.gram(l);
  if (ops.has_cur) {
    Vec r = ops.a_cur.apply(rep.x.data);
    kernels::axpy(-1.0, rep.compat.f_proj.data(), r.data(), r.size());
    rep.res_f = cx.gram(l + 1).norm(r);
  }
  if (ops.has_prev) {
    Vec r = ops.a_prev_adj.apply(rep.x.data);
    kernels::axpy(-1.0, rep.compat.g_proj.data(), r.data(), r.size());
    rep.res_g = cx.gram(l - 1).norm(r);
  }
  Vec pk = cohomology_project(cx, l, rep.x.data);
  kernels::axpy(-1.0, rep.k.data(), pk.data(), n);
  rep.res_k = m.norm(pk);

  const double nx2 = m.dot(rep.x.data, rep.x.data);
  const double parts2 = m.dot(rep.x_f, rep.x_f) + m.dot(rep.x_g, rep.x_g) + m.dot(rep.k, rep.k);
  rep.norm_identity_gap = nx2 > 0.0 ? std::abs(nx2 - parts2) / nx2 : 0.0;
  return rep;
}

SecondOrderReport solve_second_order(const SecondOrderProblem& p, double tol) {
  const HilbertComplex& cx = *p.cx;
  const std::size_t l = p.level;
  LevelOps ops = level_ops(cx, l);
  if (!ops.has_cur)
    throw std::invalid_argument("solve_second_order: no operator at this level");

  CompatibilityReport compat = check_compatibility(p, tol);
  if (!compat.pass)
    throw IncompatibleData("solve_second_order: data not in the required subspaces", compat);

  // Cascade: y solves A_l^* y = f in R(A_l), then the first-order system with
  // data (y, g, k).
  LinOp normal_low = compose(ops.a_cur_adj, ops.a_cur);  // A^* A on H_l
  auto [u, st] = cg_solve(normal_low, cx.gram(l), compat.f_proj, {tol, 0});
  if (!st.converged)
    throw IterationFailure("solve_second_order: potential CG failed (" + st.breakdown_reason + ")", st);
  Vec y = ops.a_cur.apply(u);

  FirstOrderProblem first{p.cx, l, y, p.g, p.k};
  SecondOrderReport rep;
  rep.first_order = solve_first_order(first, SolveBackend::Variational, tol);
  rep.y = std::move(y);
  Vec r = ops.a_cur_adj.apply(rep.y);
  kernels::axpy(-1.0, compat.f_proj.data(), r.data(), r.size());
  rep.res_second = cx.gram(l).norm(r);
  rep.first_order.compat.dist_f = compat.dist_f;
  rep.first_order.compat.rel_f = compat.rel_f;
  return rep;
}

}  // namespace hilcert
