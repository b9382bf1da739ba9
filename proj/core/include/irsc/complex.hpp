#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace irsc::cx {

// Dense complex matrix stored as separate real/imaginary row-major arrays.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), re_(rows * cols, 0.0),
        im_(rows * cols, 0.0) {}

  static ComplexMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& re(std::size_t i, std::size_t j) { return re_[i * cols_ + j]; }
  double& im(std::size_t i, std::size_t j) { return im_[i * cols_ + j]; }
  double re(std::size_t i, std::size_t j) const { return re_[i * cols_ + j]; }
  double im(std::size_t i, std::size_t j) const { return im_[i * cols_ + j]; }

  std::span<const double> real_data() const { return re_; }
  std::span<const double> imag_data() const { return im_; }
  std::span<double> real_data() { return re_; }
  std::span<double> imag_data() { return im_; }

  ComplexMatrix operator*(const ComplexMatrix& rhs) const;
  ComplexMatrix operator+(const ComplexMatrix& rhs) const;
  ComplexMatrix operator-(const ComplexMatrix& rhs) const;
  ComplexMatrix hermitian() const;
  ComplexMatrix scaled(double s) const;

  double frobenius_sq() const;
  double frobenius_norm() const;

  // Unit L2 norm per column; zero columns are left untouched.
  void normalize_columns();
  ComplexMatrix column(std::size_t j) const;
  void set_column(std::size_t j, const ComplexMatrix& col);

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> re_, im_;
};

struct HermitianEigen {
  std::vector<double> values;  // descending
  ComplexMatrix vectors;       // unit-norm columns, vectors.col(i) <-> values[i]
};

// Eigendecomposition of a Hermitian matrix via cyclic Jacobi sweeps on the
// 2n x 2n real-symmetric embedding [[Re, -Im], [Im, Re]]. The embedding
// doubles each eigenvalue; the J-paired duplicates are removed by complex
// Gram-Schmidt, leaving n orthonormal complex eigenvectors.
HermitianEigen hermitian_eigen(const ComplexMatrix& a);

// Top `count` generalized eigenvectors of (s, q): directions maximizing
// x^H s x / x^H q x, for Hermitian s and Hermitian positive-definite q.
// Columns are returned with unit L2 norm.
ComplexMatrix dominant_generalized_eigenvectors(const ComplexMatrix& s,
                                                const ComplexMatrix& q,
                                                std::size_t count);

}  // namespace irsc::cx
