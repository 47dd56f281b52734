#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "hilcert/kernels.hpp"

namespace hilcert {

// Sparse matrix assembled from coordinate triplets into CSR. Duplicate
// (row, col) entries are summed during assemble(); afterwards entries are
// unique and sorted within each row. Immutable once assembled.
class SparseOperator {
 public:
  SparseOperator() = default;
  SparseOperator(std::size_t rows, std::size_t cols);

  void add(std::size_t row, std::size_t col, double value);
  void assemble();
  bool assembled() const { return assembled_; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  // y = A x
  void apply(const double* x, double* y) const;
  Vec apply(const Vec& x) const;

  SparseOperator transposed() const;
  SparseOperator multiply(const SparseOperator& rhs) const;  // this * rhs

  // diag scaling: diag(left) * A * diag(right); empty vector = identity
  SparseOperator scaled(const Vec& left, const Vec& right) const;

  double max_abs() const;

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::size_t>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }

  static SparseOperator identity(std::size_t n);
  static SparseOperator zero(std::size_t rows, std::size_t cols);

 private:
  std::size_t rows_ = 0, cols_ = 0;
  bool assembled_ = false;
  std::vector<std::size_t> coo_rows_, coo_cols_;
  std::vector<double> coo_vals_;
  std::vector<std::size_t> row_ptr_, col_idx_;
  std::vector<double> values_;
};

// Matrix Market exchange format, coordinate real general, 1-based indices.
SparseOperator read_matrix_market(std::istream& in);
SparseOperator read_matrix_market_file(const std::string& path);
void write_matrix_market(std::ostream& out, const SparseOperator& a);
void write_matrix_market_file(const std::string& path, const SparseOperator& a);

// Column vectors as plain CSV, one value per line.
Vec read_vector_csv(std::istream& in);
Vec read_vector_csv_file(const std::string& path);
void write_vector_csv(std::ostream& out, const Vec& v);
void write_vector_csv_file(const std::string& path, const Vec& v);

}  // namespace hilcert
