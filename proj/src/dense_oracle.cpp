#include "hilcert/dense_oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SVD>

namespace hilcert {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Square root factor W of a Gram matrix: W^T W = M. Diagonal Grams use the
// elementwise root, general ones a dense Cholesky M = L L^T with W = L^T.
struct WeightFactor {
  bool diagonal = true;
  VectorXd sqrt_d;
  Eigen::LLT<MatrixXd> llt;
  std::size_t n = 0;

  explicit WeightFactor(const GramOperator& m) : n(m.dim()) {
    if (m.is_diagonal()) {
      sqrt_d.resize(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) sqrt_d[static_cast<Eigen::Index>(i)] = std::sqrt(m.diag()[i]);
    } else {
      diagonal = false;
      MatrixXd dense = MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      Vec unit(n, 0.0), col(n);
      for (std::size_t j = 0; j < n; ++j) {
        unit[j] = 1.0;
        m.apply(unit.data(), col.data());
        for (std::size_t i = 0; i < n; ++i) dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
        unit[j] = 0.0;
      }
      llt.compute(dense);
      if (llt.info() != Eigen::Success)
        throw std::invalid_argument("dense oracle: Gram not SPD");
    }
  }

  VectorXd to_weighted(const VectorXd& v) const {
    if (diagonal) return sqrt_d.cwiseProduct(v);
    return llt.matrixL().transpose() * v;
  }
  VectorXd from_weighted(const VectorXd& v) const {
    if (diagonal) return v.cwiseQuotient(sqrt_d);
    return llt.matrixL().transpose().solve(v);
  }
  MatrixXd scale_rows(MatrixXd a) const {  // W * A
    if (diagonal) return sqrt_d.asDiagonal() * a;
    return llt.matrixL().transpose() * a;
  }
  MatrixXd unscale_cols(MatrixXd a) const {  // A * W^{-1}
    if (diagonal) return a * sqrt_d.cwiseInverse().asDiagonal();
    // A * (L^T)^{-1} = (L^{-1} A^T)^T
    return llt.matrixL().solve(a.transpose()).transpose();
  }
};

MatrixXd to_dense(const SparseOperator& a) {
  MatrixXd d = MatrixXd::Zero(static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t k = a.row_ptr()[r]; k < a.row_ptr()[r + 1]; ++k)
      d(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a.col_idx()[k])) += a.values()[k];
  return d;
}

VectorXd to_eigen(const Vec& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vec from_eigen(const VectorXd& v) {
  return Vec(v.data(), v.data() + v.size());
}

// Jacobi is the most accurate choice and cheap for the small blocks; the
// divide-and-conquer SVD takes over near the cap.
struct FullSvd {
  MatrixXd u, v;
  VectorXd s;
  explicit FullSvd(const MatrixXd& b, bool need_u = true) {
    const unsigned flags =
        (need_u ? Eigen::ComputeFullU : 0u) | Eigen::ComputeFullV;
    if (std::min(b.rows(), b.cols()) > 400) {
      Eigen::BDCSVD<MatrixXd> svd(b, flags);
      if (need_u) u = svd.matrixU();
      v = svd.matrixV();
      s = svd.singularValues();
    } else {
      Eigen::JacobiSVD<MatrixXd> svd(b, flags);
      if (need_u) u = svd.matrixU();
      v = svd.matrixV();
      s = svd.singularValues();
    }
  }
};

}  // namespace

struct DenseSvd::Impl {
  std::size_t rows = 0, cols = 0, rank = 0;
  std::vector<double> sv;
  MatrixXd u, v;  // full, in weighted coordinates
  WeightFactor w_row, w_col;

  Impl(const GramOperator& m_row, const GramOperator& m_col)
      : w_row(m_row), w_col(m_col) {}
};

std::size_t DenseSvd::rows() const { return impl->rows; }
std::size_t DenseSvd::cols() const { return impl->cols; }
const std::vector<double>& DenseSvd::singular_values() const { return impl->sv; }
std::size_t DenseSvd::rank() const { return impl->rank; }

double DenseSvd::smallest_nonzero() const {
  if (impl->rank == 0) return 0.0;
  return impl->sv[impl->rank - 1];
}

bool DenseSvd::rank_stable() const {
  if (impl->rank == 0) return true;
  const double sigma_max = impl->sv.front();
  return smallest_nonzero() > rank_stability_factor * kernel_rtol * sigma_max;
}

Vec DenseSvd::pseudo_apply(const Vec& y) const {
  const auto& im = *impl;
  VectorXd yw = im.w_row.to_weighted(to_eigen(y));
  VectorXd coeff = im.u.transpose() * yw;
  VectorXd xw = VectorXd::Zero(static_cast<Eigen::Index>(im.cols));
  for (std::size_t i = 0; i < im.rank; ++i)
    xw += (coeff[static_cast<Eigen::Index>(i)] / im.sv[i]) * im.v.col(static_cast<Eigen::Index>(i));
  return from_eigen(im.w_col.from_weighted(xw));
}

Vec DenseSvd::pseudo_apply_adjoint(const Vec& g) const {
  const auto& im = *impl;
  VectorXd gw = im.w_col.to_weighted(to_eigen(g));
  VectorXd coeff = im.v.transpose() * gw;
  VectorXd xw = VectorXd::Zero(static_cast<Eigen::Index>(im.rows));
  for (std::size_t i = 0; i < im.rank; ++i)
    xw += (coeff[static_cast<Eigen::Index>(i)] / im.sv[i]) * im.u.col(static_cast<Eigen::Index>(i));
  return from_eigen(im.w_row.from_weighted(xw));
}

Vec DenseSvd::project_range(const Vec& y) const {
  const auto& im = *impl;
  VectorXd yw = im.w_row.to_weighted(to_eigen(y));
  VectorXd pw = VectorXd::Zero(yw.size());
  for (std::size_t i = 0; i < im.rank; ++i) {
    const auto col = im.u.col(static_cast<Eigen::Index>(i));
    pw += col.dot(yw) * col;
  }
  return from_eigen(im.w_row.from_weighted(pw));
}

Vec DenseSvd::project_corange(const Vec& x) const {
  const auto& im = *impl;
  VectorXd xw = im.w_col.to_weighted(to_eigen(x));
  VectorXd pw = VectorXd::Zero(xw.size());
  for (std::size_t i = 0; i < im.rank; ++i) {
    const auto col = im.v.col(static_cast<Eigen::Index>(i));
    pw += col.dot(xw) * col;
  }
  return from_eigen(im.w_col.from_weighted(pw));
}

std::vector<Vec> DenseSvd::null_basis() const {
  const auto& im = *impl;
  std::vector<Vec> basis;
  for (Eigen::Index i = static_cast<Eigen::Index>(im.rank); i < im.v.cols(); ++i)
    basis.push_back(from_eigen(im.w_col.from_weighted(im.v.col(i))));
  return basis;
}

std::vector<Vec> DenseSvd::left_null_basis() const {
  const auto& im = *impl;
  std::vector<Vec> basis;
  for (Eigen::Index i = static_cast<Eigen::Index>(im.rank); i < im.u.cols(); ++i)
    basis.push_back(from_eigen(im.w_row.from_weighted(im.u.col(i))));
  return basis;
}

DenseSvd dense_svd(const SparseOperator& a, const GramOperator& m_col,
                   const GramOperator& m_row, std::size_t cap) {
  if (a.rows() + a.cols() > cap)
    throw OracleCapExceeded("dense oracle: dimension cap exceeded");
  if (m_col.dim() != a.cols() || m_row.dim() != a.rows())
    throw std::invalid_argument("dense oracle: Gram dimensions mismatch");

  auto impl = std::make_shared<DenseSvd::Impl>(m_row, m_col);
  impl->rows = a.rows();
  impl->cols = a.cols();

  MatrixXd b = impl->w_row.scale_rows(to_dense(a));
  b = impl->w_col.unscale_cols(std::move(b));
  FullSvd svd(b);
  impl->u = std::move(svd.u);
  impl->v = std::move(svd.v);
  impl->sv.assign(svd.s.data(), svd.s.data() + svd.s.size());
  const double smax = impl->sv.empty() ? 0.0 : impl->sv.front();
  impl->rank = 0;
  for (double sv : impl->sv)
    if (sv > kernel_rtol * smax && sv > 0.0) ++impl->rank;

  DenseSvd out;
  out.impl = std::move(impl);
  return out;
}

std::vector<Vec> dense_cohomology(const SparseOperator* a_prev,
                                  const SparseOperator* a_cur,
                                  const GramOperator& m_prev,
                                  const GramOperator& m_level,
                                  const GramOperator& m_next,
                                  std::size_t cap) {
  const std::size_t dim = m_level.dim();
  const std::size_t rows_cur = a_cur ? a_cur->rows() : 0;
  const std::size_t rows_prev = a_prev ? a_prev->cols() : 0;
  if (dim + rows_cur + rows_prev > cap)
    throw OracleCapExceeded("dense oracle: dimension cap exceeded");

  WeightFactor w_level(m_level);
  MatrixXd stacked = MatrixXd::Zero(static_cast<Eigen::Index>(rows_cur + rows_prev),
                                    static_cast<Eigen::Index>(dim));
  if (a_cur) {
    WeightFactor w_next(m_next);
    MatrixXd b = w_next.scale_rows(to_dense(*a_cur));
    b = w_level.unscale_cols(std::move(b));
    stacked.topRows(static_cast<Eigen::Index>(rows_cur)) = b;
  }
  if (a_prev) {
    WeightFactor w_prev(m_prev);
    MatrixXd b = w_level.scale_rows(to_dense(*a_prev));
    b = w_prev.unscale_cols(std::move(b));
    stacked.bottomRows(static_cast<Eigen::Index>(rows_prev)) = b.transpose();
  }

  std::vector<Vec> basis;
  if (stacked.rows() == 0) {
    // No constraints: the whole space is cohomology.
    for (std::size_t j = 0; j < dim; ++j) {
      VectorXd e = VectorXd::Zero(static_cast<Eigen::Index>(dim));
      e[static_cast<Eigen::Index>(j)] = 1.0;
      basis.push_back(from_eigen(w_level.from_weighted(e)));
    }
    return basis;
  }

  FullSvd svd(stacked, /*need_u=*/false);
  const double smax = svd.s.size() ? svd.s[0] : 0.0;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < svd.s.size(); ++i)
    if (svd.s[i] > kernel_rtol * smax && svd.s[i] > 0.0) ++rank;
  for (Eigen::Index i = static_cast<Eigen::Index>(rank);
       i < static_cast<Eigen::Index>(dim); ++i)
    basis.push_back(from_eigen(w_level.from_weighted(svd.v.col(i))));
  return basis;
}

}  // namespace hilcert
