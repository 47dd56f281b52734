#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hilcert/dense_oracle.hpp"
#include "hilcert/estimator.hpp"
#include "hilcert/instances.hpp"

using namespace hilcert;

namespace {

Vec random_vec(std::mt19937& rng, std::size_t n) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vec v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

Vec add(const Vec& a, const Vec& b, double s = 1.0) {
  Vec d = a;
  kernels::axpy(s, b.data(), d.data(), d.size());
  return d;
}

struct Setup {
  HilbertComplex cx;
  ManufacturedScenario sc;
  Vec x_tilde;
  ErrorDecomposition dec;
  BoundConstants consts;
};

// A 2d grid with a hole so that all three error components are present.
Setup make_setup(unsigned seed, double perturbation = 0.3) {
  GridSpec spec;
  spec.dimension = 2;
  spec.cells = {6, 6, 1};
  spec.hole = {{2, 4, 2, 4, 0, 0}};
  Setup s{build_grid2d(spec), {}, {}, {}, {}};
  s.sc = manufacture(s.cx, 1, Recipe::SmoothPotential, seed);
  std::mt19937 rng(seed + 1000);
  Vec noise = random_vec(rng, s.cx.dim(1));
  const double scale = perturbation * s.cx.gram(1).norm(s.sc.exact_x) /
                       std::max(s.cx.gram(1).norm(noise), 1e-300);
  s.x_tilde = add(s.sc.exact_x, noise, -scale);
  s.dec = decompose_error(s.cx, 1, s.x_tilde, s.sc.exact_x, 1e-12);
  s.consts = bound_constants(s.cx, 1);
  return s;
}

}  // namespace

TEST_CASE("decompose_error: exact approximation, kernel shift, oracle match") {
  Setup s = make_setup(3);
  const GramOperator& m = s.cx.gram(1);

  ErrorDecomposition zero = decompose_error(s.cx, 1, s.sc.exact_x, s.sc.exact_x);
  CHECK(m.norm(zero.e) == 0.0);
  CHECK(m.norm(zero.e_prev) < 1e-14);
  CHECK(m.norm(zero.e_adj) < 1e-14);

  // Shift by a harmonic field: only the kernel component moves.
  const CohomologyBasis& kb = s.cx.cohomology(1);
  REQUIRE(kb.dim() == 1);
  Vec shifted = add(s.sc.exact_x, kb.vectors[0], -0.5);
  ErrorDecomposition dk = decompose_error(s.cx, 1, shifted, s.sc.exact_x);
  CHECK(m.norm(dk.e_kernel) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(m.norm(dk.e_prev) < 1e-9);
  CHECK(m.norm(dk.e_adj) < 1e-9);

  // Against the dense oracle projections.
  DenseSvd prev = dense_svd(s.cx.op(0), s.cx.gram(0), s.cx.gram(1));
  Vec pd = prev.project_range(s.dec.e);
  for (std::size_t i = 0; i < pd.size(); ++i)
    CHECK(s.dec.e_prev[i] == doctest::Approx(pd[i]).epsilon(1e-9).scale(1.0));
  CHECK(s.dec.pythagoras_gap < 1e-9);
}

TEST_CASE("sharpness: each bound evaluated at its attaining argument") {
  Setup s = make_setup(5);
  const GramOperator& m = s.cx.gram(1);
  const double ng = m.norm(s.dec.e_prev);
  const double nk = m.norm(s.dec.e_kernel);
  const double nf = m.norm(s.dec.e_adj);
  REQUIRE(ng > 1e-3);
  REQUIRE(nk > 1e-4);
  REQUIRE(nf > 1e-3);

  // Upper bounds at zeta = e_prev + x_tilde and xi = e_adj + x_tilde.
  Vec zeta_hat = add(s.x_tilde, s.dec.e_prev);
  const double ug = upper_bound_g_part(s.cx, 1, s.x_tilde, s.sc.g, zeta_hat, s.consts.c_prev);
  CHECK(ug == doctest::Approx(ng).epsilon(1e-8));

  Vec xi_hat = add(s.x_tilde, s.dec.e_adj);
  const double uf = upper_bound_f_part(s.cx, 1, s.x_tilde, s.sc.f, xi_hat, s.consts.c_cur);
  CHECK(uf == doctest::Approx(nf).epsilon(1e-8));

  // Kernel part at the projections of x_tilde pulled back through the ops.
  LinOp a0 = s.cx.op_action(0), a0s = s.cx.adjoint_action(0);
  auto [phi_hat, st1] = cg_solve(compose(a0s, a0), s.cx.gram(0), a0s.apply(s.x_tilde), {1e-13, 0});
  LinOp a1 = s.cx.op_action(1), a1s = s.cx.adjoint_action(1);
  auto [phip_hat, st2] = cg_solve(compose(a1, a1s), s.cx.gram(2), a1.apply(s.x_tilde), {1e-13, 0});
  const double uk = upper_bound_kernel_part(s.cx, 1, s.x_tilde, s.sc.k, phi_hat, phip_hat);
  CHECK(uk == doctest::Approx(nk).epsilon(1e-7));

  // Lower bounds at the attaining arguments.
  auto [phi_low, st3] = cg_solve(compose(a0s, a0), s.cx.gram(0), a0s.apply(s.dec.e), {1e-13, 0});
  const double lg = lower_bound_g_part(s.cx, 1, s.x_tilde, s.sc.g, phi_low);
  CHECK(lg == doctest::Approx(ng * ng).epsilon(1e-8));

  auto [phip_low, st4] = cg_solve(compose(a1, a1s), s.cx.gram(2), a1.apply(s.dec.e), {1e-13, 0});
  const double lf = lower_bound_f_part(s.cx, 1, s.x_tilde, s.sc.f, phip_low);
  CHECK(lf == doctest::Approx(nf * nf).epsilon(1e-8));

  const double lk = lower_bound_kernel_part(s.cx, 1, s.x_tilde, s.sc.k, s.dec.e_kernel);
  CHECK(lk == doctest::Approx(nk * nk).epsilon(1e-8));

  // Quadratic structure: doubling the optimal theta collapses the value to 0.
  Vec theta2 = s.dec.e_kernel;
  kernels::scale(2.0, theta2.data(), theta2.size());
  CHECK(lower_bound_kernel_part(s.cx, 1, s.x_tilde, s.sc.k, theta2) ==
        doctest::Approx(0.0).scale(nk * nk).epsilon(1e-10));
}

TEST_CASE("trivial bound values: exact approximation and zero trial fields") {
  Setup s = make_setup(7, 0.0);  // x_tilde == exact_x
  CHECK(upper_bound_g_part(s.cx, 1, s.x_tilde, s.sc.g, s.x_tilde, s.consts.c_prev) <
        1e-10);
  CHECK(upper_bound_f_part(s.cx, 1, s.x_tilde, s.sc.f, s.x_tilde, s.consts.c_cur) < 1e-10);
  CHECK(lower_bound_g_part(s.cx, 1, s.x_tilde, s.sc.g, Vec(s.cx.dim(0), 0.0)) == 0.0);
  CHECK(lower_bound_f_part(s.cx, 1, s.x_tilde, s.sc.f, Vec(s.cx.dim(2), 0.0)) == 0.0);
  CHECK(lower_bound_kernel_part(s.cx, 1, s.x_tilde, s.sc.k, Vec(s.cx.dim(1), 0.0)) == 0.0);

  // phi = phi' = 0 reduces the kernel upper bound to ||k - x_tilde||.
  Setup t = make_setup(9);
  const double uk = upper_bound_kernel_part(t.cx, 1, t.x_tilde, t.sc.k, {}, {});
  Vec d = add(t.sc.k, t.x_tilde, -1.0);
  CHECK(uk == doctest::Approx(t.cx.gram(1).norm(d)).epsilon(1e-12));
  CHECK(uk >= t.cx.gram(1).norm(t.dec.e_kernel) - 1e-10);
}

TEST_CASE("sandwich property over random trial fields") {
  Setup s = make_setup(13);
  std::mt19937 rng(99);
  const GramOperator& m = s.cx.gram(1);
  const double ng = m.norm(s.dec.e_prev);
  const double nk = m.norm(s.dec.e_kernel);
  const double nf = m.norm(s.dec.e_adj);

  for (int trial = 0; trial < 200; ++trial) {
    TrialFields t;
    t.zeta = random_vec(rng, s.cx.dim(1));
    t.xi = random_vec(rng, s.cx.dim(1));
    t.phi = random_vec(rng, s.cx.dim(0));
    t.phi_prime = random_vec(rng, s.cx.dim(2));
    t.theta = cohomology_project(s.cx, 1, random_vec(rng, s.cx.dim(1)));
    BoundValues v = evaluate_bounds(s.cx, 1, s.x_tilde, s.sc.f, s.sc.g, s.sc.k, t, s.consts);
    CHECK(v.upper_g >= ng - 1e-10);
    CHECK(v.upper_f >= nf - 1e-10);
    CHECK(v.upper_k >= nk - 1e-10);
    CHECK(v.lower_g <= ng * ng + 1e-10);
    CHECK(v.lower_f <= nf * nf + 1e-10);
    CHECK(v.lower_k <= nk * nk + 1e-10);
  }

  TrialFields bad;
  bad.zeta = Vec(3, 1.0);
  CHECK_THROWS_AS(bad.validate(s.cx, 1), std::invalid_argument);
}

TEST_CASE("minimization: t-formula, monotone log, optimal t against perturbation") {
  Setup s = make_setup(17);

  // Single outer step from a supplied start reproduces the t update rule.
  std::mt19937 rng(4);
  Vec xi0 = random_vec(rng, s.cx.dim(1));
  MinimizeResult one = minimize_upper_f(s.cx, 1, s.x_tilde, s.sc.f, s.consts.c_cur,
                                        {1e-6, 1, 1e-12}, &xi0);
  REQUIRE(!one.log.empty());
  Vec r = s.cx.op(1).apply(xi0);
  kernels::axpy(-1.0, s.sc.f.data(), r.data(), r.size());
  Vec d = add(xi0, s.x_tilde, -1.0);
  const double t1_expected = s.consts.c_cur * s.cx.gram(2).norm(r) / s.cx.gram(1).norm(d);
  CHECK(one.log[0].first == doctest::Approx(t1_expected).epsilon(1e-12));

  MinimizeResult mr = minimize_upper_f(s.cx, 1, s.x_tilde, s.sc.f, s.consts.c_cur,
                                       {1e-8, 25, 1e-13});
  const double nf = s.cx.gram(1).norm(s.dec.e_adj);
  CHECK(std::sqrt(mr.bound_sq) >= nf - 1e-10);
  CHECK(std::sqrt(mr.bound_sq) <= nf * 1.01);
  for (std::size_t i = 1; i < mr.log.size(); ++i)
    CHECK(mr.log[i].second <= mr.log[i - 1].second * (1.0 + 1e-12));

  // For the final xi, the used t minimizes F(xi, .): +/-10% never helps.
  auto f_of_t = [&](double t) {
    Vec rr = s.cx.op(1).apply(mr.arg);
    kernels::axpy(-1.0, s.sc.f.data(), rr.data(), rr.size());
    const double res = s.cx.gram(2).norm(rr);
    Vec dd = add(mr.arg, s.x_tilde, -1.0);
    const double dist = s.cx.gram(1).norm(dd);
    const double c = s.consts.c_cur;
    return (1.0 + 1.0 / t) * c * c * res * res + (1.0 + t) * dist * dist;
  };
  Vec rr = s.cx.op(1).apply(mr.arg);
  kernels::axpy(-1.0, s.sc.f.data(), rr.data(), rr.size());
  Vec dd = add(mr.arg, s.x_tilde, -1.0);
  const double t_opt = s.consts.c_cur * s.cx.gram(2).norm(rr) / s.cx.gram(1).norm(dd);
  CHECK(f_of_t(t_opt * 1.1) >= f_of_t(t_opt) * (1.0 - 1e-12));
  CHECK(f_of_t(t_opt * 0.9) >= f_of_t(t_opt) * (1.0 - 1e-12));

  // Mirror algorithm on the g side.
  MinimizeResult mg = minimize_upper_g(s.cx, 1, s.x_tilde, s.sc.g, s.consts.c_prev,
                                       {1e-8, 25, 1e-13});
  const double ngn = s.cx.gram(1).norm(s.dec.e_prev);
  CHECK(std::sqrt(mg.bound_sq) >= ngn - 1e-10);
  CHECK(std::sqrt(mg.bound_sq) <= ngn * 1.01);
  for (std::size_t i = 1; i < mg.log.size(); ++i)
    CHECK(mg.log[i].second <= mg.log[i - 1].second * (1.0 + 1e-12));
}

TEST_CASE("exact approximation short-circuits the minimization") {
  Setup s = make_setup(19, 0.0);
  MinimizeResult mr = minimize_upper_f(s.cx, 1, s.x_tilde, s.sc.f, s.consts.c_cur);
  CHECK(mr.converged);
  CHECK(std::sqrt(mr.bound_sq) < 1e-9);
}

TEST_CASE("conforming functional: zero at exact, two-sided equivalence, corollary form") {
  Setup s = make_setup(23);
  const double f_exact =
      conforming_functional(s.cx, 1, s.sc.exact_x, s.sc.f, s.sc.g, s.sc.k, s.consts);
  CHECK(f_exact < 1e-18);

  std::mt19937 rng(8);
  const GramOperator& m = s.cx.gram(1);
  for (int trial = 0; trial < 50; ++trial) {
    Vec xt = add(s.sc.exact_x, random_vec(rng, s.cx.dim(1)), 0.1);
    const double fv = conforming_functional(s.cx, 1, xt, s.sc.f, s.sc.g, s.sc.k, s.consts);
    Vec e = add(s.sc.exact_x, xt, -1.0);
    Vec ae = s.cx.op(1).apply(e);
    Vec ase = s.cx.adjoint_action(0).apply(e);
    const double graph2 = m.dot(e, e) + s.cx.gram(2).dot(ae, ae) + s.cx.gram(0).dot(ase, ase);
    const double cmax = std::max(s.consts.c_prev, s.consts.c_cur);
    CHECK(graph2 <= fv + 1e-10);
    CHECK(fv <= (1.0 + cmax * cmax) * graph2 + 1e-10);

    // Conforming corollary: zeta := x_tilde.
    ErrorDecomposition dec = decompose_error(s.cx, 1, xt, s.sc.exact_x, 1e-11);
    Vec rg = s.cx.adjoint_action(0).apply(xt);
    kernels::axpy(-1.0, s.sc.g.data(), rg.data(), rg.size());
    CHECK(m.norm(dec.e_prev) <= s.consts.c_prev * s.cx.gram(0).norm(rg) + 1e-10);
  }
}

TEST_CASE("two_sided_estimate: tight interval, exact-zero kernel detection") {
  Setup s = make_setup(29);
  const GramOperator& m = s.cx.gram(1);
  BoundReport rep = two_sided_estimate(s.cx, 1, s.x_tilde, s.sc.f, s.sc.g, s.sc.k, 25);
  const double ne = m.norm(s.dec.e);
  CHECK(rep.all_ok);
  CHECK(rep.lower_total <= ne + 1e-9);
  CHECK(rep.upper_total >= ne - 1e-9);
  CHECK(rep.lower_total >= 0.99 * ne);
  CHECK(rep.upper_total <= 1.01 * ne);
  attach_efficiency(rep, ne);
  CHECK(rep.efficiency_index >= 1.0 - 1e-9);

  // Approximation of the form k + (something orthogonal to the kernel):
  // the kernel component is reported as an exact zero and skipped.
  Vec xt_perp = add(s.x_tilde, cohomology_project(s.cx, 1, s.x_tilde), -1.0);
  Vec xt = add(xt_perp, s.sc.k);
  BoundReport rep2 = two_sided_estimate(s.cx, 1, xt, s.sc.f, s.sc.g, s.sc.k, 25);
  bool found = false;
  for (const auto& c : rep2.components)
    if (c.name == "kernel-part") {
      CHECK(c.exact_zero);
      CHECK(c.upper == 0.0);
      found = true;
    }
  CHECK(found);

  // Exact approximation: the interval collapses to [0, ~0].
  BoundReport rep3 = two_sided_estimate(s.cx, 1, s.sc.exact_x, s.sc.f, s.sc.g, s.sc.k, 25);
  CHECK(rep3.upper_total < 1e-8);
}

TEST_CASE("two_sided_estimate on the 3d field problem stays within one percent") {
  GridSpec spec;
  spec.dimension = 3;
  spec.cells = {3, 3, 3};
  spec.spacing = 1.0 / 3.0;
  spec.gamma_t = {"x-min", "x-max", "y-min", "y-max", "z-min", "z-max"};
  HilbertComplex cx = build_grid3d(spec);
  ManufacturedScenario sc = manufacture(cx, 1, Recipe::SmoothPotential, 55);
  std::mt19937 rng(56);
  Vec noise = random_vec(rng, cx.dim(1));
  const GramOperator& m = cx.gram(1);
  Vec xt = add(sc.exact_x, noise, -0.15 * m.norm(sc.exact_x) / m.norm(noise));
  BoundReport rep = two_sided_estimate(cx, 1, xt, sc.f, sc.g, sc.k, 20);
  const double ne = m.norm(add(sc.exact_x, xt, -1.0));
  CHECK(rep.lower_total >= 0.99 * ne);
  CHECK(rep.lower_total <= ne + 1e-10);
  CHECK(rep.upper_total >= ne - 1e-10);
  CHECK(rep.upper_total <= 1.01 * ne);
}

TEST_CASE("second order estimate: laplacian sandwich and exact-zero h parts") {
  // 2d Laplacian at node level, second-order data.
  GridSpec spec;
  spec.dimension = 2;
  spec.cells = {8, 8, 1};
  spec.gamma_t = {"x-min", "x-max", "y-min", "y-max"};
  HilbertComplex cx = build_grid2d(spec);
  std::mt19937 rng(71);

  Vec u_exact = random_vec(rng, cx.dim(0));
  Vec y_exact = cx.op(0).apply(u_exact);
  Vec f = cx.adjoint_action(0).apply(y_exact);  // f = A^*A u

  // Perturb u conformingly and take y_tilde in R(A).
  Vec du = random_vec(rng, cx.dim(0));
  const double scale = 0.1 * cx.gram(0).norm(u_exact) / cx.gram(0).norm(du);
  Vec u_tilde = add(u_exact, du, -scale);
  Vec y_tilde = cx.op(0).apply(u_tilde);

  SecondOrderBoundReport rep = second_order_estimate(cx, 0, u_tilde, y_tilde, f, {}, {}, 25);

  const double ne = cx.gram(0).norm(add(u_exact, u_tilde, -1.0));
  const double nh = cx.gram(1).norm(add(y_exact, y_tilde, -1.0));
  CHECK(rep.e_report.upper_total >= ne - 1e-10);
  CHECK(rep.e_report.lower_total <= ne + 1e-10);
  CHECK(rep.e_adj_composite_upper >= ne - 1e-10);
  CHECK(rep.h_report.upper_total >= nh - 1e-10);
  CHECK(rep.h_report.lower_total <= nh + 1e-10);

  // y_tilde lies in R(A): the two upper h components are exact zeros.
  for (const auto& c : rep.h_report.components)
    if (c.name != "g-part") CHECK((c.exact_zero || !c.active));

  // With y_tilde := A x_tilde and x_tilde := exact, everything collapses.
  SecondOrderBoundReport zero = second_order_estimate(cx, 0, u_exact, y_exact, f, {}, {}, 25);
  CHECK(zero.e_report.upper_total < 1e-8);
  CHECK(zero.h_report.upper_total < 1e-8);
}

TEST_CASE("second order estimate on the rot-rot shape") {
  GridSpec spec;
  spec.dimension = 3;
  spec.cells = {2, 2, 2};
  spec.spacing = 0.5;
  spec.gamma_t = {"x-min", "x-max", "y-min", "y-max", "z-min", "z-max"};
  HilbertComplex rev = build_grid3d(spec).reversed();
  ManufacturedScenario sc = manufacture(rev, 1, Recipe::SmoothPotential, 83);
  Vec f2 = rev.adjoint_action(1).apply(sc.f);

  std::mt19937 rng(84);
  Vec db = random_vec(rng, rev.dim(1));
  const double scale = 0.1 * rev.gram(1).norm(sc.exact_x) / rev.gram(1).norm(db);
  Vec b_tilde = add(sc.exact_x, db, -scale);
  Vec y_tilde = rev.op(1).apply(b_tilde);

  SecondOrderBoundReport rep =
      second_order_estimate(rev, 1, b_tilde, y_tilde, f2, sc.g, sc.k, 25);
  const double ne = rev.gram(1).norm(add(sc.exact_x, b_tilde, -1.0));
  CHECK(rep.e_report.upper_total >= ne - 1e-10);
  CHECK(rep.e_report.lower_total <= ne + 1e-10);
  CHECK(rep.e_report.all_ok);
  CHECK(rep.h_report.all_ok);
}

TEST_CASE("totals combine componentwise in quadrature") {
  Setup s = make_setup(31);
  BoundReport rep = two_sided_estimate(s.cx, 1, s.x_tilde, s.sc.f, s.sc.g, s.sc.k, 15);
  double lo2 = 0.0, up2 = 0.0;
  for (const auto& c : rep.components) {
    if (!c.active || c.exact_zero) continue;
    lo2 += c.lower * c.lower;
    up2 += c.upper * c.upper;
  }
  CHECK(rep.lower_total * rep.lower_total == doctest::Approx(lo2).epsilon(1e-15));
  CHECK(rep.upper_total * rep.upper_total == doctest::Approx(up2).epsilon(1e-15));
}
