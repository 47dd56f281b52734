#include "hilcert/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace hilcert {

SparseOperator::SparseOperator(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols) {}

void SparseOperator::add(std::size_t row, std::size_t col, double value) {
  if (assembled_) throw std::logic_error("SparseOperator: add after assemble");
  if (row >= rows_ || col >= cols_)
    throw std::out_of_range("SparseOperator: index out of range");
  if (value == 0.0) return;
  coo_rows_.push_back(row);
  coo_cols_.push_back(col);
  coo_vals_.push_back(value);
}

void SparseOperator::assemble() {
  if (assembled_) return;
  const std::size_t n = coo_vals_.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (coo_rows_[a] != coo_rows_[b]) return coo_rows_[a] < coo_rows_[b];
    return coo_cols_[a] < coo_cols_[b];
  });

  row_ptr_.assign(rows_ + 1, 0);
  col_idx_.clear();
  values_.clear();
  col_idx_.reserve(n);
  values_.reserve(n);
  std::size_t last_r = rows_, last_c = cols_;  // sentinel: no previous entry
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = order[i];
    const std::size_t r = coo_rows_[k], c = coo_cols_[k];
    if (!values_.empty() && r == last_r && c == last_c) {
      values_.back() += coo_vals_[k];
    } else {
      col_idx_.push_back(c);
      values_.push_back(coo_vals_[k]);
      row_ptr_[r + 1]++;
      last_r = r;
      last_c = c;
    }
  }
  for (std::size_t r = 0; r < rows_; ++r) row_ptr_[r + 1] += row_ptr_[r];
  coo_rows_.clear();
  coo_cols_.clear();
  coo_vals_.clear();
  coo_rows_.shrink_to_fit();
  coo_cols_.shrink_to_fit();
  coo_vals_.shrink_to_fit();
  assembled_ = true;
}

void SparseOperator::apply(const double* x, double* y) const {
  if (!assembled_) throw std::logic_error("SparseOperator: apply before assemble");
  kernels::csr_apply(row_ptr_.data(), col_idx_.data(), values_.data(), rows_, x, y);
}

Vec SparseOperator::apply(const Vec& x) const {
  if (x.size() != cols_) throw std::invalid_argument("SparseOperator: dimension mismatch");
  Vec y(rows_);
  apply(x.data(), y.data());
  return y;
}

SparseOperator SparseOperator::transposed() const {
  if (!assembled_) throw std::logic_error("SparseOperator: transpose before assemble");
  SparseOperator t(cols_, rows_);
  t.row_ptr_.assign(cols_ + 1, 0);
  for (std::size_t k = 0; k < col_idx_.size(); ++k) t.row_ptr_[col_idx_[k] + 1]++;
  for (std::size_t c = 0; c < cols_; ++c) t.row_ptr_[c + 1] += t.row_ptr_[c];
  t.col_idx_.resize(nnz());
  t.values_.resize(nnz());
  std::vector<std::size_t> next(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const std::size_t pos = next[col_idx_[k]]++;
      t.col_idx_[pos] = r;
      t.values_[pos] = values_[k];
    }
  }
  t.assembled_ = true;
  return t;
}

SparseOperator SparseOperator::multiply(const SparseOperator& rhs) const {
  if (!assembled_ || !rhs.assembled_)
    throw std::logic_error("SparseOperator: multiply before assemble");
  if (cols_ != rhs.rows_)
    throw std::invalid_argument("SparseOperator: multiply dimension mismatch");
  SparseOperator out(rows_, rhs.cols_);
  std::vector<double> acc(rhs.cols_, 0.0);
  std::vector<std::size_t> marked;
  for (std::size_t r = 0; r < rows_; ++r) {
    marked.clear();
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const std::size_t mid = col_idx_[k];
      const double v = values_[k];
      for (std::size_t k2 = rhs.row_ptr_[mid]; k2 < rhs.row_ptr_[mid + 1]; ++k2) {
        const std::size_t c = rhs.col_idx_[k2];
        if (acc[c] == 0.0) marked.push_back(c);
        acc[c] += v * rhs.values_[k2];
      }
    }
    std::sort(marked.begin(), marked.end());
    for (std::size_t c : marked) {
      if (acc[c] != 0.0) out.add(r, c, acc[c]);
      acc[c] = 0.0;
    }
  }
  out.assemble();
  return out;
}

SparseOperator SparseOperator::scaled(const Vec& left, const Vec& right) const {
  if (!assembled_) throw std::logic_error("SparseOperator: scaled before assemble");
  if (!left.empty() && left.size() != rows_)
    throw std::invalid_argument("SparseOperator: left scale dimension");
  if (!right.empty() && right.size() != cols_)
    throw std::invalid_argument("SparseOperator: right scale dimension");
  SparseOperator out = *this;
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = out.row_ptr_[r]; k < out.row_ptr_[r + 1]; ++k) {
      double v = out.values_[k];
      if (!left.empty()) v *= left[r];
      if (!right.empty()) v *= right[out.col_idx_[k]];
      out.values_[k] = v;
    }
  }
  return out;
}

double SparseOperator::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

SparseOperator SparseOperator::identity(std::size_t n) {
  SparseOperator a(n, n);
  for (std::size_t i = 0; i < n; ++i) a.add(i, i, 1.0);
  a.assemble();
  return a;
}

SparseOperator SparseOperator::zero(std::size_t rows, std::size_t cols) {
  SparseOperator a(rows, cols);
  a.assemble();
  return a;
}

SparseOperator read_matrix_market(std::istream& in) {
  std::string line;
  bool header_seen = false;
  std::size_t rows = 0, cols = 0, nnz = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '%') {
      if (!header_seen && line.rfind("%%MatrixMarket", 0) == 0) {
        std::istringstream hs(line);
        std::string tag, object, format, field, symmetry;
        hs >> tag >> object >> format >> field >> symmetry;
        if (object != "matrix" || format != "coordinate" || field != "real" ||
            symmetry != "general")
          throw std::runtime_error("matrix market: unsupported header: " + line);
        header_seen = true;
      }
      continue;
    }
    std::istringstream ss(line);
    if (!(ss >> rows >> cols >> nnz))
      throw std::runtime_error("matrix market: bad size line: " + line);
    break;
  }
  SparseOperator a(rows, cols);
  std::size_t seen = 0;
  while (seen < nnz && std::getline(in, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    std::size_t r, c;
    double v;
    if (!(ss >> r >> c >> v))
      throw std::runtime_error("matrix market: bad entry line: " + line);
    if (r < 1 || c < 1 || r > rows || c > cols)
      throw std::runtime_error("matrix market: index out of range: " + line);
    a.add(r - 1, c - 1, v);
    ++seen;
  }
  if (seen != nnz) throw std::runtime_error("matrix market: truncated file");
  a.assemble();
  return a;
}

SparseOperator read_matrix_market_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_matrix_market(in);
}

void write_matrix_market(std::ostream& out, const SparseOperator& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << " " << a.cols() << " " << a.nnz() << "\n";
  out << std::setprecision(17);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t k = a.row_ptr()[r]; k < a.row_ptr()[r + 1]; ++k)
      out << r + 1 << " " << a.col_idx()[k] + 1 << " " << a.values()[k] << "\n";
}

void write_matrix_market_file(const std::string& path, const SparseOperator& a) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  write_matrix_market(out, a);
}

Vec read_vector_csv(std::istream& in) {
  Vec v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    v.push_back(std::stod(line));
  }
  return v;
}

Vec read_vector_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_vector_csv(in);
}

void write_vector_csv(std::ostream& out, const Vec& v) {
  out << std::setprecision(17);
  for (double x : v) out << x << "\n";
}

void write_vector_csv_file(const std::string& path, const Vec& v) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  write_vector_csv(out, v);
}

}  // namespace hilcert
