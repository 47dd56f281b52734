#include "hilcert/gram.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <cmath>
#include <stdexcept>

namespace hilcert {

struct GramOperator::General {
  Eigen::SparseMatrix<double> m;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
};

GramOperator GramOperator::identity(std::size_t n) {
  return diagonal(Vec(n, 1.0));
}

GramOperator GramOperator::diagonal(Vec d) {
  for (double v : d)
    if (!(v > 0.0)) throw std::invalid_argument("GramOperator: nonpositive diagonal entry");
  GramOperator g;
  g.dim_ = d.size();
  g.diag_ = std::move(d);
  return g;
}

GramOperator GramOperator::spd(const SparseOperator& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("GramOperator: not square");
  auto gen = std::make_shared<General>();
  gen->m.resize(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(m.nnz());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t k = m.row_ptr()[r]; k < m.row_ptr()[r + 1]; ++k)
      trip.emplace_back(static_cast<int>(r), static_cast<int>(m.col_idx()[k]), m.values()[k]);
  gen->m.setFromTriplets(trip.begin(), trip.end());
  gen->llt.compute(gen->m);
  if (gen->llt.info() != Eigen::Success)
    throw std::invalid_argument("GramOperator: factorization failed, matrix not SPD");
  GramOperator g;
  g.dim_ = m.rows();
  g.general_ = std::move(gen);
  return g;
}

const Vec& GramOperator::diag() const {
  if (!is_diagonal()) throw std::logic_error("GramOperator: not diagonal");
  return diag_;
}

void GramOperator::apply(const double* x, double* y) const {
  if (is_diagonal()) {
    for (std::size_t i = 0; i < dim_; ++i) y[i] = diag_[i] * x[i];
  } else {
    Eigen::Map<const Eigen::VectorXd> xv(x, static_cast<Eigen::Index>(dim_));
    Eigen::Map<Eigen::VectorXd> yv(y, static_cast<Eigen::Index>(dim_));
    yv = general_->m * xv;
  }
}

void GramOperator::solve(const double* x, double* y) const {
  if (is_diagonal()) {
    for (std::size_t i = 0; i < dim_; ++i) y[i] = x[i] / diag_[i];
  } else {
    Eigen::Map<const Eigen::VectorXd> xv(x, static_cast<Eigen::Index>(dim_));
    Eigen::Map<Eigen::VectorXd> yv(y, static_cast<Eigen::Index>(dim_));
    yv = general_->llt.solve(xv);
  }
}

Vec GramOperator::apply(const Vec& x) const {
  if (x.size() != dim_) throw std::invalid_argument("GramOperator: dimension mismatch");
  Vec y(dim_);
  apply(x.data(), y.data());
  return y;
}

Vec GramOperator::solve(const Vec& x) const {
  if (x.size() != dim_) throw std::invalid_argument("GramOperator: dimension mismatch");
  Vec y(dim_);
  solve(x.data(), y.data());
  return y;
}

double GramOperator::dot(const Vec& u, const Vec& v) const {
  if (u.size() != dim_ || v.size() != dim_)
    throw std::invalid_argument("GramOperator: dimension mismatch");
  if (is_diagonal()) {
    // (u*v)*d keeps the bilinear form exactly symmetric in u and v.
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += (u[i] * v[i]) * diag_[i];
    return s;
  }
  Vec mv = apply(v);
  return hilcert::dot(u, mv);
}

double GramOperator::norm(const Vec& u) const { return std::sqrt(dot(u, u)); }

double weighted_dot(const GramOperator& m, const Vec& u, const Vec& v) {
  return m.dot(u, v);
}

}  // namespace hilcert
