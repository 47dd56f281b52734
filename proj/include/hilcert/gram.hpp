#pragma once

#include <memory>

#include "hilcert/sparse.hpp"

namespace hilcert {

// Weight matrix of an inner product. Diagonal (lumped) Grams are the common
// case and keep discrete adjoints explicit sparse matrices; a general SPD
// sparse Gram is held together with a Cholesky factorization and applied
// implicitly.
class GramOperator {
 public:
  GramOperator() = default;

  static GramOperator identity(std::size_t n);
  static GramOperator diagonal(Vec d);
  static GramOperator spd(const SparseOperator& m);  // factorizes; throws if not SPD

  std::size_t dim() const { return dim_; }
  bool is_diagonal() const { return general_ == nullptr; }
  const Vec& diag() const;

  void apply(const double* x, double* y) const;  // y = M x
  void solve(const double* x, double* y) const;  // y = M^{-1} x
  Vec apply(const Vec& x) const;
  Vec solve(const Vec& x) const;

  double dot(const Vec& u, const Vec& v) const;  // <u, v>_M
  double norm(const Vec& u) const;

 private:
  struct General;
  std::size_t dim_ = 0;
  Vec diag_;  // empty when general
  std::shared_ptr<const General> general_;
};

// <u, v>_M with dimension checks; symmetric positive definite bilinear form.
double weighted_dot(const GramOperator& m, const Vec& u, const Vec& v);

}  // namespace hilcert
