#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "hilcert/iterative.hpp"

namespace hilcert {

struct WeightedSpace {
  std::size_t dim = 0;
  GramOperator gram;
};

// Coefficient vector tagged with the index of the space it lives in.
struct Field {
  std::size_t level = 0;
  Vec data;
};

struct CohomologyBasis {
  std::size_t level = 0;
  std::vector<Vec> vectors;          // M-orthonormal
  double max_operator_residual = 0;  // max over basis of ||A_l v||, ||A_{l-1}* v||
  std::string method;                // "dense-hodge" | "projector"
  std::size_t dim() const { return vectors.size(); }
};

struct ConstantsReport {
  std::size_t op_index = 0;
  double c = 0.0;       // 1 / smallest nonzero singular value of A_l
  double c_star = 0.0;  // same, computed from the adjoint side
  bool no_nonzero_singular_value = false;  // zero operator: constant is infinite
  // The smallest nonzero singular value clears the kernel-detection band by
  // the stability factor; otherwise the kernel split is numerically
  // meaningless and the operator is flagged ill-posed.
  bool rank_stable = true;
  std::string method;  // "lanczos" | "dense"
  double tolerance = 0.0;
  std::size_t deflated_dim = 0;  // explicitly deflated directions (nullity for dense)
};

struct LevelVerify {
  std::size_t first_op = 0;  // checks ops[first_op+1] * ops[first_op]
  double product_max_abs = 0.0;
  double scale = 0.0;  // max_abs(A_{l+1}) * max_abs(A_l)
  bool pass = false;
};

struct VerifyReport {
  std::vector<LevelVerify> primal;
  std::vector<LevelVerify> adjoint;
  bool pass = true;
};

// A finite cochain of weighted spaces H_0 ... H_L connected by sparse
// operators A_l : H_l -> H_{l+1}. Construction checks dimensions only; the
// complex property itself is reported by verify_complex. Immutable after
// construction; derived artifacts (adjoints, cohomology bases, constants) are
// cached once under a mutex.
class HilbertComplex {
 public:
  HilbertComplex(std::vector<WeightedSpace> spaces,
                 std::vector<SparseOperator> ops,
                 std::vector<std::string> names = {});

  std::size_t num_spaces() const { return spaces_.size(); }
  std::size_t num_ops() const { return ops_.size(); }
  std::size_t top_level() const { return spaces_.size() - 1; }

  const WeightedSpace& space(std::size_t l) const { return spaces_.at(l); }
  const GramOperator& gram(std::size_t l) const { return spaces_.at(l).gram; }
  std::size_t dim(std::size_t l) const { return spaces_.at(l).dim; }

  bool has_op(std::size_t l) const { return l < ops_.size(); }
  const SparseOperator& op(std::size_t l) const { return ops_.at(l); }
  const std::string& name(std::size_t l) const { return names_.at(l); }

  // Discrete adjoint A_l^* = M_l^{-1} A_l^T M_{l+1}, explicit when both Grams
  // are diagonal (throws otherwise; use adjoint_action then).
  const SparseOperator& adjoint(std::size_t l) const;
  bool adjoint_explicit(std::size_t l) const;

  LinOp op_action(std::size_t l) const;
  LinOp adjoint_action(std::size_t l) const;

  // The adjoint complex read backwards: spaces reversed, operator i becomes
  // adjoint(num_ops-1-i). Requires explicit adjoints.
  HilbertComplex reversed() const;

  // Cached derived artifacts; computed at fixed tight internal tolerances.
  const CohomologyBasis& cohomology(std::size_t level, std::size_t dense_cap = 2000) const;
  const ConstantsReport& constants(std::size_t op_index, std::size_t dense_cap = 2000) const;

  // Largest weighted singular value of op(l), a few digits only; used to put
  // residual floors on the natural scale of the operator.
  double op_norm_estimate(std::size_t l) const;

  HilbertComplex(HilbertComplex&&) = default;
  HilbertComplex& operator=(HilbertComplex&&) = default;
  HilbertComplex(const HilbertComplex&) = delete;
  HilbertComplex& operator=(const HilbertComplex&) = delete;

 private:
  std::vector<WeightedSpace> spaces_;
  std::vector<SparseOperator> ops_;
  std::vector<std::string> names_;

  struct Cache {
    std::mutex mu;
    std::vector<std::optional<SparseOperator>> adjoints;
    std::map<std::size_t, CohomologyBasis> cohomology;
    std::map<std::size_t, ConstantsReport> constants;
    std::map<std::size_t, double> op_norms;
  };
  mutable std::unique_ptr<Cache> cache_;
};

VerifyReport verify_complex(const HilbertComplex& cx);

enum class RangeSide { PrevRange, AdjRange };

// M-orthogonal projection of x in H_level onto R(A_{level-1}) or R(A_level^*),
// via CG on the normal equations of the reduced operator.
Vec project_range(const HilbertComplex& cx, RangeSide side, std::size_t level,
                  const Vec& x, double tol = 1e-10);

// The potential behind the projection: w with A_{level-1} w = pi_prev(x)
// resp. A_level^* w = pi_adj(x). nullopt when the projection is numerically
// zero (input below the kernel-detection band) or no operator exists.
std::optional<Vec> projection_potential(const HilbertComplex& cx, RangeSide side,
                                        std::size_t level, const Vec& x,
                                        double tol = 1e-10);

struct HelmholtzParts {
  Vec prev, kernel, adj;
  double ortho_gap = 0.0;       // max pairwise |<.,.>| / ||x||^2
  double pythagoras_gap = 0.0;  // | ||x||^2 - sum of squares | / ||x||^2
};

HelmholtzParts helmholtz_decompose(const HilbertComplex& cx, std::size_t level,
                                   const Vec& x, double tol = 1e-10);

// Projection onto the cohomology space K_level using the cached basis.
Vec cohomology_project(const HilbertComplex& cx, std::size_t level, const Vec& x);

inline const CohomologyBasis& cohomology_basis(const HilbertComplex& cx,
                                               std::size_t level) {
  return cx.cohomology(level);
}
inline const ConstantsReport& poincare_constant(const HilbertComplex& cx,
                                                std::size_t op_index) {
  return cx.constants(op_index);
}

struct IterationFailure : std::runtime_error {
  explicit IterationFailure(const std::string& what, IterStats s = {})
      : std::runtime_error(what), stats(std::move(s)) {}
  IterStats stats;
};

}  // namespace hilcert
