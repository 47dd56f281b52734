#include "hilcert/iterative.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hilcert {

Vec LinOp::apply(const Vec& x) const {
  if (x.size() != cols) throw std::invalid_argument("LinOp: dimension mismatch");
  Vec y(rows);
  apply_fn(x.data(), y.data());
  return y;
}

LinOp as_linop(const SparseOperator& a) {
  return LinOp{a.rows(), a.cols(),
               [&a](const double* x, double* y) { a.apply(x, y); }};
}

LinOp zero_linop(std::size_t rows, std::size_t cols) {
  return LinOp{rows, cols, [rows](const double*, double* y) {
                 std::fill(y, y + rows, 0.0);
               }};
}

LinOp compose(const LinOp& outer, const LinOp& inner) {
  if (outer.cols != inner.rows) throw std::invalid_argument("compose: dimension mismatch");
  auto out = outer.apply_fn;
  auto in = inner.apply_fn;
  const std::size_t mid = inner.rows;
  return LinOp{outer.rows, inner.cols, [out, in, mid](const double* x, double* y) {
                 Vec tmp(mid);
                 in(x, tmp.data());
                 out(tmp.data(), y);
               }};
}

LinOp shifted(const LinOp& a, double sigma) {
  if (a.rows != a.cols) throw std::invalid_argument("shifted: not square");
  auto fn = a.apply_fn;
  const std::size_t n = a.rows;
  return LinOp{n, n, [fn, sigma, n](const double* x, double* y) {
                 fn(x, y);
                 for (std::size_t i = 0; i < n; ++i) y[i] += sigma * x[i];
               }};
}

LinOp scaled_linop(const LinOp& a, double alpha) {
  auto fn = a.apply_fn;
  const std::size_t r = a.rows;
  return LinOp{a.rows, a.cols, [fn, alpha, r](const double* x, double* y) {
                 fn(x, y);
                 for (std::size_t i = 0; i < r; ++i) y[i] *= alpha;
               }};
}

std::pair<Vec, IterStats> cg_solve(const LinOp& a, const GramOperator& m,
                                   const Vec& b, CgOptions opt, const Vec* x0) {
  if (a.rows != a.cols) throw std::invalid_argument("cg_solve: operator not square");
  if (b.size() != a.cols || m.dim() != b.size())
    throw std::invalid_argument("cg_solve: dimension mismatch");
  const std::size_t n = b.size();
  const std::size_t maxit = opt.maxit ? opt.maxit : 10 * std::max<std::size_t>(n, 1);

  IterStats stats;
  Vec x = x0 ? *x0 : Vec(n, 0.0);
  const double bnorm = m.norm(b);
  if (bnorm == 0.0) {
    stats.converged = true;
    return {Vec(n, 0.0), stats};
  }

  Vec r(n), q(n);
  a.apply_fn(x.data(), r.data());
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
  Vec p = r;
  double rho = m.dot(r, r);
  double max_curvature = 0.0;
  Vec best_x = x;
  double best_rel = std::sqrt(rho) / bnorm;

  for (std::size_t k = 0; k < maxit; ++k) {
    const double rel = std::sqrt(rho) / bnorm;
    if (rel < best_rel) {
      best_rel = rel;
      best_x = x;
    }
    if (rel <= opt.tol) {
      stats.converged = true;
      stats.final_residual = rel;
      return {x, stats};
    }
    a.apply_fn(p.data(), q.data());
    const double pq = m.dot(p, q);
    const double pp = m.dot(p, p);
    const double curvature = pp > 0.0 ? pq / pp : 0.0;
    max_curvature = std::max(max_curvature, curvature);
    if (pq <= 0.0 || curvature < 1e-14 * max_curvature) {
      stats.final_residual = best_rel;
      stats.breakdown_reason =
          pq <= 0.0 ? "nonpositive curvature"
                    : "residual stagnation with zero curvature (inconsistent data?)";
      return {best_x, stats};
    }
    const double alpha = rho / pq;
    kernels::axpy(alpha, p.data(), x.data(), n);
    kernels::axpy(-alpha, q.data(), r.data(), n);
    const double rho_new = m.dot(r, r);
    const double beta = rho_new / rho;
    rho = rho_new;
    kernels::combine(1.0, r.data(), beta, p.data(), p.data(), n);
    stats.iterations = k + 1;
  }
  const double rel = std::sqrt(rho) / bnorm;
  if (rel < best_rel) {
    best_rel = rel;
    best_x = x;
  }
  stats.final_residual = best_rel;
  stats.converged = best_rel <= opt.tol;
  if (!stats.converged) stats.breakdown_reason = "maxit reached";
  return {best_x, stats};
}

std::pair<Vec, IterStats> minres_solve(const LinOp& a, const GramOperator& m,
                                       const Vec& b, CgOptions opt) {
  if (a.rows != a.cols) throw std::invalid_argument("minres_solve: operator not square");
  if (b.size() != a.cols || m.dim() != b.size())
    throw std::invalid_argument("minres_solve: dimension mismatch");
  const std::size_t n = b.size();
  const std::size_t maxit = opt.maxit ? opt.maxit : 10 * std::max<std::size_t>(n, 1);

  IterStats stats;
  Vec x(n, 0.0);
  const double beta1 = m.norm(b);
  if (beta1 == 0.0) {
    stats.converged = true;
    return {x, stats};
  }

  // Givens rotation (c, s) maps (u, v) to (c*u + s*v, -s*u + c*v).
  Vec v_old(n, 0.0), v = b, u(n);
  kernels::scale(1.0 / beta1, v.data(), n);
  double beta = 0.0;  // subdiagonal entry coupling v_old and v
  double c2 = 1.0, s2 = 0.0, c1 = 1.0, s1 = 0.0;
  double phibar = beta1;
  Vec w(n, 0.0), w_old(n, 0.0), w_oldold(n, 0.0);

  for (std::size_t k = 1; k <= maxit; ++k) {
    a.apply_fn(v.data(), u.data());
    const double alpha = m.dot(u, v);
    for (std::size_t i = 0; i < n; ++i) u[i] -= alpha * v[i] + beta * v_old[i];
    const double beta_new = m.norm(u);

    const double eps = s2 * beta;
    const double delta = c2 * beta;
    const double delta_hat = c1 * delta + s1 * alpha;
    const double gamma_bar = -s1 * delta + c1 * alpha;
    const double gamma = std::hypot(gamma_bar, beta_new);
    if (gamma < 1e-300) {
      stats.final_residual = std::abs(phibar) / beta1;
      stats.converged = stats.final_residual <= opt.tol;
      if (!stats.converged) stats.breakdown_reason = "Krylov breakdown";
      return {x, stats};
    }
    const double c0 = gamma_bar / gamma;
    const double s0 = beta_new / gamma;
    const double phi = c0 * phibar;
    phibar = -s0 * phibar;

    for (std::size_t i = 0; i < n; ++i) {
      const double wi = (v[i] - delta_hat * w_old[i] - eps * w_oldold[i]) / gamma;
      w_oldold[i] = w_old[i];
      w_old[i] = wi;
      x[i] += phi * wi;
    }
    std::swap(v_old, v);
    if (beta_new > 0.0) {
      for (std::size_t i = 0; i < n; ++i) v[i] = u[i] / beta_new;
    } else {
      std::fill(v.begin(), v.end(), 0.0);
    }
    beta = beta_new;
    c2 = c1;
    s2 = s1;
    c1 = c0;
    s1 = s0;
    stats.iterations = k;

    stats.final_residual = std::abs(phibar) / beta1;
    if (stats.final_residual <= opt.tol) {
      stats.converged = true;
      return {x, stats};
    }
  }
  stats.converged = false;
  stats.breakdown_reason = "maxit reached";
  return {x, stats};
}

namespace {

// Number of eigenvalues of the symmetric tridiagonal (diag, offdiag) that are
// strictly below x, by Sturm sequence sign counting.
std::size_t sturm_count(const std::vector<double>& diag,
                        const std::vector<double>& off, double x) {
  std::size_t count = 0;
  double d = 1.0;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const double off2 = i == 0 ? 0.0 : off[i - 1] * off[i - 1];
    d = diag[i] - x - off2 / d;
    if (d == 0.0) d = -1e-300;
    if (d < 0.0) ++count;
  }
  return count;
}

double tridiag_extremal_eig(const std::vector<double>& diag,
                            const std::vector<double>& off, bool largest) {
  double lo = diag[0], hi = diag[0];
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const double r = (i > 0 ? std::abs(off[i - 1]) : 0.0) +
                     (i + 1 < diag.size() ? std::abs(off[i]) : 0.0);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  const std::size_t n = diag.size();
  const std::size_t want = largest ? n : 1;  // #eigenvalues strictly below the target
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (sturm_count(diag, off, mid) >= want)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

EigenEstimate lanczos_extremal(const LinOp& a, const GramOperator& m,
                               Extremal which, const std::vector<Vec>& kernel_basis,
                               LanczosOptions opt) {
  if (a.rows != a.cols) throw std::invalid_argument("lanczos_extremal: operator not square");
  const std::size_t n = a.rows;
  if (m.dim() != n) throw std::invalid_argument("lanczos_extremal: dimension mismatch");

  for (std::size_t i = 0; i < kernel_basis.size(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double g = m.dot(kernel_basis[i], kernel_basis[j]);
      const double expect = i == j ? 1.0 : 0.0;
      if (std::abs(g - expect) > 1e-8)
        throw std::invalid_argument("lanczos_extremal: kernel_basis not orthonormal");
    }
  }

  auto deflate = [&](Vec& v) {
    for (const Vec& q : kernel_basis) {
      const double g = m.dot(v, q);
      kernels::axpy(-g, q.data(), v.data(), n);
    }
  };

  EigenEstimate est;

  // Deterministic start; for the pseudoinverse route it is pushed into the
  // range of the operator first.
  Vec start(n);
  for (std::size_t i = 0; i < n; ++i)
    start[i] = 1.0 + 0.5 * std::sin(1.7 * static_cast<double>(i) + 0.3);
  if (which == Extremal::SmallestNonzero) start = a.apply(start);
  deflate(start);
  const double snorm = m.norm(start);
  if (snorm <= 1e-300) {
    // Nothing outside the supplied kernel: no nonzero spectrum visible.
    est.stats.breakdown_reason = "no nonzero singular value";
    return est;
  }
  kernels::scale(1.0 / snorm, start.data(), n);

  auto apply_op = [&](const Vec& v, IterStats* inner) -> Vec {
    if (which == Extremal::Largest) return a.apply(v);
    auto [y, st] = cg_solve(a, m, v, {opt.inner_tol, 0});
    // A stagnation floor slightly above the requested tolerance comes from
    // round-off kernel components of the Krylov vectors and is harmless here.
    if (!st.converged && st.final_residual <= 1e-9) st.converged = true;
    if (inner) *inner = st;
    return y;
  };

  std::vector<Vec> basis{start};
  std::vector<double> alphas, betas;
  double theta_prev = 0.0;
  std::size_t stable = 0;
  const std::size_t max_steps = std::min<std::size_t>(opt.max_steps, n + 2);

  for (std::size_t j = 0; j < max_steps; ++j) {
    IterStats inner;
    Vec u = apply_op(basis[j], &inner);
    if (which == Extremal::SmallestNonzero && !inner.converged && !inner.breakdown_reason.empty()) {
      est.stats.breakdown_reason = "inner solve failed: " + inner.breakdown_reason;
      break;
    }
    const double alpha = m.dot(u, basis[j]);
    alphas.push_back(alpha);
    kernels::axpy(-alpha, basis[j].data(), u.data(), n);
    if (j > 0) kernels::axpy(-betas[j - 1], basis[j - 1].data(), u.data(), n);
    deflate(u);
    for (int sweep = 0; sweep < 2; ++sweep)
      for (const Vec& v : basis) {
        const double g = m.dot(u, v);
        kernels::axpy(-g, v.data(), u.data(), n);
      }
    const double beta = m.norm(u);

    const double theta =
        tridiag_extremal_eig(alphas, betas, /*largest=*/true);
    est.stats.iterations = j + 1;
    const double change = std::abs(theta - theta_prev);
    const double scale = std::max(std::abs(theta), 1e-300);
    est.stats.final_residual = change / scale;
    theta_prev = theta;
    const bool invariant = beta <= 1e-14 * scale;
    if (invariant) {
      est.stats.converged = true;
      break;
    }
    if (j > 0 && change <= opt.tol * scale) {
      if (++stable >= 2) {
        est.stats.converged = true;
        break;
      }
    } else {
      stable = 0;
    }
    betas.push_back(beta);
    Vec next = u;
    kernels::scale(1.0 / beta, next.data(), n);
    basis.push_back(std::move(next));
  }

  if (alphas.empty()) return est;
  const double theta = tridiag_extremal_eig(alphas, betas, true);
  if (!est.stats.converged && est.stats.breakdown_reason.empty())
    est.stats.breakdown_reason = "max Lanczos steps reached";
  est.value = which == Extremal::Largest ? theta : (theta > 0.0 ? 1.0 / theta : 0.0);
  return est;
}

}  // namespace hilcert
