#include "hilcert/complex.hpp"

#include <cmath>
#include <limits>

#include "hilcert/dense_oracle.hpp"

namespace hilcert {

namespace {
constexpr double basis_tol = 1e-12;    // cohomology construction tolerance
constexpr double const_tol = 1e-12;    // eigenvalue tolerance for constants
}  // namespace

HilbertComplex::HilbertComplex(std::vector<WeightedSpace> spaces,
                               std::vector<SparseOperator> ops,
                               std::vector<std::string> names)
    : spaces_(std::move(spaces)), ops_(std::move(ops)), names_(std::move(names)),
      cache_(std::make_unique<Cache>()) {
  if (spaces_.empty()) throw std::invalid_argument("HilbertComplex: no spaces");
  if (ops_.size() + 1 != spaces_.size() && !(ops_.empty() && spaces_.size() == 1))
    throw std::invalid_argument("HilbertComplex: need one operator per consecutive pair");
  for (std::size_t l = 0; l < spaces_.size(); ++l) {
    if (spaces_[l].gram.dim() != spaces_[l].dim)
      throw std::invalid_argument("HilbertComplex: Gram dimension mismatch");
  }
  for (std::size_t l = 0; l < ops_.size(); ++l) {
    if (!ops_[l].assembled())
      throw std::invalid_argument("HilbertComplex: operator not assembled");
    if (ops_[l].cols() != spaces_[l].dim || ops_[l].rows() != spaces_[l + 1].dim)
      throw std::invalid_argument("HilbertComplex: operator dimension mismatch");
  }
  if (names_.empty()) {
    for (std::size_t l = 0; l < ops_.size(); ++l)
      names_.push_back("A" + std::to_string(l));
  }
  cache_->adjoints.resize(ops_.size());
}

bool HilbertComplex::adjoint_explicit(std::size_t l) const {
  return gram(l).is_diagonal() && gram(l + 1).is_diagonal();
}

const SparseOperator& HilbertComplex::adjoint(std::size_t l) const {
  if (!has_op(l)) throw std::out_of_range("HilbertComplex: no such operator");
  if (!adjoint_explicit(l))
    throw std::logic_error("HilbertComplex: explicit adjoint needs diagonal Grams");
  std::lock_guard<std::mutex> lock(cache_->mu);
  if (!cache_->adjoints[l]) {
    Vec inv_left(dim(l));
    for (std::size_t i = 0; i < dim(l); ++i) inv_left[i] = 1.0 / gram(l).diag()[i];
    cache_->adjoints[l] = ops_[l].transposed().scaled(inv_left, gram(l + 1).diag());
  }
  return *cache_->adjoints[l];
}

LinOp HilbertComplex::op_action(std::size_t l) const { return as_linop(op(l)); }

LinOp HilbertComplex::adjoint_action(std::size_t l) const {
  if (adjoint_explicit(l)) return as_linop(adjoint(l));
  const SparseOperator& a = op(l);
  const GramOperator& ml = gram(l);
  const GramOperator& mr = gram(l + 1);
  SparseOperator at = a.transposed();
  return LinOp{a.cols(), a.rows(),
               [at = std::move(at), &ml, &mr](const double* x, double* y) {
                 Vec t1(mr.dim());
                 mr.apply(x, t1.data());
                 Vec t2(at.rows());
                 at.apply(t1.data(), t2.data());
                 ml.solve(t2.data(), y);
               }};
}

HilbertComplex HilbertComplex::reversed() const {
  std::vector<WeightedSpace> rs(spaces_.rbegin(), spaces_.rend());
  std::vector<SparseOperator> rops;
  std::vector<std::string> rnames;
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const std::size_t l = ops_.size() - 1 - i;
    rops.push_back(adjoint(l));
    rnames.push_back("adj(" + names_[l] + ")");
  }
  return HilbertComplex(std::move(rs), std::move(rops), std::move(rnames));
}

VerifyReport verify_complex(const HilbertComplex& cx) {
  VerifyReport rep;
  for (std::size_t l = 0; l + 1 < cx.num_ops(); ++l) {
    LevelVerify v;
    v.first_op = l;
    v.scale = cx.op(l + 1).max_abs() * cx.op(l).max_abs();
    v.product_max_abs = cx.op(l + 1).multiply(cx.op(l)).max_abs();
    v.pass = v.product_max_abs <= 1e-14 * v.scale;
    rep.pass = rep.pass && v.pass;
    rep.primal.push_back(v);

    if (cx.adjoint_explicit(l) && cx.adjoint_explicit(l + 1)) {
      LevelVerify va;
      va.first_op = l;
      va.scale = cx.adjoint(l).max_abs() * cx.adjoint(l + 1).max_abs();
      va.product_max_abs = cx.adjoint(l).multiply(cx.adjoint(l + 1)).max_abs();
      va.pass = va.product_max_abs <= 1e-14 * va.scale;
      rep.pass = rep.pass && va.pass;
      rep.adjoint.push_back(va);
    }
  }
  return rep;
}

double HilbertComplex::op_norm_estimate(std::size_t l) const {
  {
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto it = cache_->op_norms.find(l);
    if (it != cache_->op_norms.end()) return it->second;
  }
  double sigma = 0.0;
  if (op(l).max_abs() > 0.0) {
    LinOp normal = compose(op_action(l), adjoint_action(l));
    EigenEstimate est =
        lanczos_extremal(normal, gram(l + 1), Extremal::Largest, {}, {1e-6, 60, 1e-10});
    sigma = std::sqrt(std::max(est.value, 0.0));
  }
  std::lock_guard<std::mutex> lock(cache_->mu);
  cache_->op_norms.emplace(l, sigma);
  return sigma;
}

std::optional<Vec> projection_potential(const HilbertComplex& cx, RangeSide side,
                                        std::size_t level, const Vec& x, double tol) {
  if (x.size() != cx.dim(level))
    throw std::invalid_argument("project_range: dimension mismatch");
  const std::size_t l = side == RangeSide::PrevRange ? level - 1 : level;
  if (side == RangeSide::PrevRange && (level == 0 || !cx.has_op(level - 1)))
    return std::nullopt;
  if (side == RangeSide::AdjRange && !cx.has_op(level)) return std::nullopt;

  LinOp a = cx.op_action(l);
  LinOp as = cx.adjoint_action(l);
  const bool prev = side == RangeSide::PrevRange;
  LinOp normal = prev ? compose(as, a) : compose(a, as);
  const GramOperator& m_pot = prev ? cx.gram(l) : cx.gram(l + 1);
  Vec rhs = prev ? as.apply(x) : a.apply(x);

  // Everything below the kernel-detection band of the operator projects to
  // zero; residual floors are judged on the same sigma_max * ||x|| scale.
  const double scale = cx.op_norm_estimate(l) * cx.gram(level).norm(x);
  const double rhs_norm = m_pot.norm(rhs);
  if (rhs_norm <= kernel_rtol * 1e-2 * scale) return std::nullopt;

  auto [w, st] = cg_solve(normal, m_pot, rhs, {tol, 0});
  if (!st.converged && st.final_residual * rhs_norm > 1e-10 * std::max(scale, 1e-300))
    throw IterationFailure("project_range: CG failed (" + st.breakdown_reason + ")", st);
  return w;
}

Vec project_range(const HilbertComplex& cx, RangeSide side, std::size_t level,
                  const Vec& x, double tol) {
  std::optional<Vec> w = projection_potential(cx, side, level, x, tol);
  if (!w) return Vec(x.size(), 0.0);
  if (side == RangeSide::PrevRange) return cx.op(level - 1).apply(*w);
  return cx.adjoint_action(level).apply(*w);
}

HelmholtzParts helmholtz_decompose(const HilbertComplex& cx, std::size_t level,
                                   const Vec& x, double tol) {
  HelmholtzParts parts;
  parts.prev = project_range(cx, RangeSide::PrevRange, level, x, tol);
  parts.adj = project_range(cx, RangeSide::AdjRange, level, x, tol);
  parts.kernel.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    parts.kernel[i] = x[i] - parts.prev[i] - parts.adj[i];

  const GramOperator& m = cx.gram(level);
  const double nx2 = m.dot(x, x);
  if (nx2 > 0.0) {
    const double g01 = std::abs(m.dot(parts.prev, parts.kernel));
    const double g02 = std::abs(m.dot(parts.prev, parts.adj));
    const double g12 = std::abs(m.dot(parts.kernel, parts.adj));
    parts.ortho_gap = std::max({g01, g02, g12}) / nx2;
    const double sum2 = m.dot(parts.prev, parts.prev) +
                        m.dot(parts.kernel, parts.kernel) + m.dot(parts.adj, parts.adj);
    parts.pythagoras_gap = std::abs(nx2 - sum2) / nx2;
  }
  return parts;
}

Vec cohomology_project(const HilbertComplex& cx, std::size_t level, const Vec& x) {
  const CohomologyBasis& basis = cx.cohomology(level);
  Vec p(x.size(), 0.0);
  const GramOperator& m = cx.gram(level);
  for (const Vec& q : basis.vectors) {
    const double g = m.dot(x, q);
    kernels::axpy(g, q.data(), p.data(), x.size());
  }
  return p;
}

namespace {

// Modified Gram-Schmidt in input order; drops vectors whose remainder falls
// below drop_tol times the original norm.
std::vector<Vec> mgs_orthonormalize(const GramOperator& m, std::vector<Vec> in,
                                    double drop_tol) {
  std::vector<Vec> out;
  for (Vec& v : in) {
    const double n0 = m.norm(v);
    if (n0 == 0.0) continue;
    for (int sweep = 0; sweep < 2; ++sweep)
      for (const Vec& q : out) {
        const double g = m.dot(v, q);
        kernels::axpy(-g, q.data(), v.data(), v.size());
      }
    const double n1 = m.norm(v);
    if (n1 <= drop_tol * n0) continue;
    kernels::scale(1.0 / n1, v.data(), v.size());
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

const CohomologyBasis& HilbertComplex::cohomology(std::size_t level,
                                                  std::size_t dense_cap) const {
  {
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto it = cache_->cohomology.find(level);
    if (it != cache_->cohomology.end()) return it->second;
  }

  CohomologyBasis basis;
  basis.level = level;

  const bool has_cur = has_op(level);
  const bool has_prev = level > 0 && has_op(level - 1);
  const std::size_t n = dim(level);
  const GramOperator& m = gram(level);

  std::vector<Vec> vecs;
  if (n <= dense_cap) {
    // Dense route: kernel of the Hodge operator A_l^* A_l + A_{l-1} A_{l-1}^*.
    basis.method = "dense-hodge";
    std::vector<LinOp> terms;
    if (has_cur) terms.push_back(compose(adjoint_action(level), op_action(level)));
    if (has_prev) terms.push_back(compose(op_action(level - 1), adjoint_action(level - 1)));
    SparseOperator dense_h(n, n);
    Vec unit(n, 0.0), col(n), acc(n);
    for (std::size_t j = 0; j < n; ++j) {
      unit[j] = 1.0;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (const LinOp& t : terms) {
        t.apply_fn(unit.data(), col.data());
        for (std::size_t i = 0; i < n; ++i) acc[i] += col[i];
      }
      for (std::size_t i = 0; i < n; ++i)
        if (acc[i] != 0.0) dense_h.add(i, j, acc[i]);
      unit[j] = 0.0;
    }
    dense_h.assemble();
    DenseSvd svd = dense_svd(dense_h, m, m, 2 * n + 2);
    vecs = svd.null_basis();
  } else {
    // Above the cap: harmonic part of deterministic probe vectors through the
    // projector identity pi_K = 1 - pi_prev - pi_adj, then rank detection.
    basis.method = "projector";
    std::size_t block = 8;
    std::size_t last_rank = 0;
    for (int round = 0; round < 6; ++round) {
      std::vector<Vec> probes;
      for (std::size_t p = 0; p < block; ++p) {
        Vec v(n);
        for (std::size_t i = 0; i < n; ++i)
          v[i] = std::sin(0.7 * static_cast<double>(i + 1) * static_cast<double>(p + 1) + 0.2);
        probes.push_back(std::move(v));
      }
      std::vector<Vec> harmonic;
      for (const Vec& v : probes) {
        HelmholtzParts parts = helmholtz_decompose(*this, level, v, basis_tol);
        harmonic.push_back(parts.kernel);
      }
      vecs = mgs_orthonormalize(m, std::move(harmonic), 1e-6);
      if (vecs.size() == last_rank && round > 0) break;
      last_rank = vecs.size();
      if (vecs.size() < block / 2) break;  // kernel clearly exhausted
      block *= 2;
    }
  }

  vecs = mgs_orthonormalize(m, std::move(vecs), 1e-6);
  double max_res = 0.0;
  for (const Vec& v : vecs) {
    if (has_cur) max_res = std::max(max_res, gram(level + 1).norm(op(level).apply(v)));
    if (has_prev)
      max_res = std::max(max_res, gram(level - 1).norm(adjoint_action(level - 1).apply(v)));
  }
  basis.max_operator_residual = max_res;
  basis.vectors = std::move(vecs);

  std::lock_guard<std::mutex> lock(cache_->mu);
  auto [it, inserted] = cache_->cohomology.emplace(level, std::move(basis));
  return it->second;
}

const ConstantsReport& HilbertComplex::constants(std::size_t op_index,
                                                 std::size_t dense_cap) const {
  {
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto it = cache_->constants.find(op_index);
    if (it != cache_->constants.end()) return it->second;
  }

  ConstantsReport rep;
  rep.op_index = op_index;
  rep.tolerance = const_tol;

  const SparseOperator& a = op(op_index);
  const GramOperator& ml = gram(op_index);
  const GramOperator& mr = gram(op_index + 1);

  if (a.max_abs() == 0.0) {
    rep.no_nonzero_singular_value = true;
    rep.c = rep.c_star = std::numeric_limits<double>::infinity();
    rep.method = "trivial";
  } else {
    LinOp afn = op_action(op_index);
    LinOp asfn = adjoint_action(op_index);

    // Largest eigenvalue of bwd (fwd bwd)^{-2} fwd equals 1/lambda_min-nonzero
    // of bwd fwd. The trailing bwd application annihilates the nullspace
    // exactly, so round-off kernel components cannot compound across steps.
    auto inverse_square = [](const LinOp& fwd, const LinOp& bwd,
                             const GramOperator& m_mid) {
      LinOp mid = compose(fwd, bwd);
      const std::size_t n = fwd.cols;
      return LinOp{n, n, [fwd, bwd, mid, &m_mid](const double* x, double* y) {
                     Vec t(fwd.rows);
                     fwd.apply_fn(x, t.data());
                     auto [z1, st1] = cg_solve(mid, m_mid, t, {1e-13, 0});
                     if (!st1.converged && st1.final_residual > 1e-9)
                       throw IterationFailure("constants: inner CG failed", st1);
                     auto [z2, st2] = cg_solve(mid, m_mid, z1, {1e-13, 0});
                     if (!st2.converged && st2.final_residual > 1e-9)
                       throw IterationFailure("constants: inner CG failed", st2);
                     bwd.apply_fn(z2.data(), y);
                   }};
    };

    EigenEstimate lam, lam_star;
    try {
      LinOp inv_sq = inverse_square(afn, asfn, mr);
      LinOp inv_sq_star = inverse_square(asfn, afn, ml);
      EigenEstimate th = lanczos_extremal(inv_sq, ml, Extremal::Largest, {},
                                          {const_tol, 400, 1e-13});
      EigenEstimate th_star = lanczos_extremal(inv_sq_star, mr, Extremal::Largest, {},
                                               {const_tol, 400, 1e-13});
      lam.stats = th.stats;
      lam.value = th.value > 0.0 ? 1.0 / th.value : 0.0;
      lam_star.stats = th_star.stats;
      lam_star.value = th_star.value > 0.0 ? 1.0 / th_star.value : 0.0;
    } catch (const IterationFailure&) {
      lam.stats.converged = false;
      lam_star.stats.converged = false;
    }
    rep.method = "lanczos";
    if ((!lam.stats.converged || !lam_star.stats.converged) &&
        a.rows() + a.cols() <= dense_cap) {
      DenseSvd svd = dense_svd(a, ml, mr, dense_cap);
      const double s = svd.smallest_nonzero();
      if (s == 0.0) {
        rep.no_nonzero_singular_value = true;
        rep.c = rep.c_star = std::numeric_limits<double>::infinity();
      } else {
        rep.c = rep.c_star = 1.0 / s;
      }
      rep.method = "dense";
      rep.deflated_dim = svd.cols() - svd.rank();
      rep.rank_stable = svd.rank_stable();
    } else {
      if (!lam.stats.converged || !lam_star.stats.converged)
        throw IterationFailure("constants: Lanczos did not converge above dense cap");
      rep.c = lam.value > 0.0 ? 1.0 / std::sqrt(lam.value)
                              : std::numeric_limits<double>::infinity();
      rep.c_star = lam_star.value > 0.0 ? 1.0 / std::sqrt(lam_star.value)
                                        : std::numeric_limits<double>::infinity();
      const double sigma_max = op_norm_estimate(op_index);
      rep.rank_stable =
          1.0 / rep.c > rank_stability_factor * kernel_rtol * sigma_max;
    }
  }

  std::lock_guard<std::mutex> lock(cache_->mu);
  auto [it, inserted] = cache_->constants.emplace(op_index, std::move(rep));
  return it->second;
}

}  // namespace hilcert
