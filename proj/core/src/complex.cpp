#include "irsc/complex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace irsc::cx {

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.re(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::operator*(const ComplexMatrix& rhs) const {
  if (cols_ != rhs.rows_) {
    throw std::invalid_argument("complex matmul: " + std::to_string(cols_) +
                                " cols vs " + std::to_string(rhs.rows_) +
                                " rows");
  }
  ComplexMatrix out(rows_, rhs.cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t l = 0; l < cols_; ++l) {
      const double ar = re(i, l), ai = im(i, l);
      for (std::size_t j = 0; j < rhs.cols_; ++j) {
        const double br = rhs.re(l, j), bi = rhs.im(l, j);
        out.re(i, j) += ar * br - ai * bi;
        out.im(i, j) += ar * bi + ai * br;
      }
    }
  }
  return out;
}

ComplexMatrix ComplexMatrix::operator+(const ComplexMatrix& rhs) const {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) {
    throw std::invalid_argument("complex add: shape mismatch");
  }
  ComplexMatrix out(rows_, cols_);
  for (std::size_t i = 0; i < re_.size(); ++i) {
    out.re_[i] = re_[i] + rhs.re_[i];
    out.im_[i] = im_[i] + rhs.im_[i];
  }
  return out;
}

ComplexMatrix ComplexMatrix::operator-(const ComplexMatrix& rhs) const {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) {
    throw std::invalid_argument("complex sub: shape mismatch");
  }
  ComplexMatrix out(rows_, cols_);
  for (std::size_t i = 0; i < re_.size(); ++i) {
    out.re_[i] = re_[i] - rhs.re_[i];
    out.im_[i] = im_[i] - rhs.im_[i];
  }
  return out;
}

ComplexMatrix ComplexMatrix::hermitian() const {
  ComplexMatrix out(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) {
      out.re(j, i) = re(i, j);
      out.im(j, i) = -im(i, j);
    }
  }
  return out;
}

ComplexMatrix ComplexMatrix::scaled(double s) const {
  ComplexMatrix out(rows_, cols_);
  for (std::size_t i = 0; i < re_.size(); ++i) {
    out.re_[i] = s * re_[i];
    out.im_[i] = s * im_[i];
  }
  return out;
}

double ComplexMatrix::frobenius_sq() const {
  double acc = 0.0;
  for (double x : re_) acc += x * x;
  for (double x : im_) acc += x * x;
  return acc;
}

double ComplexMatrix::frobenius_norm() const {
  return std::sqrt(frobenius_sq());
}

void ComplexMatrix::normalize_columns() {
  for (std::size_t j = 0; j < cols_; ++j) {
    double sq = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      sq += re(i, j) * re(i, j) + im(i, j) * im(i, j);
    }
    if (sq == 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t i = 0; i < rows_; ++i) {
      re(i, j) *= inv;
      im(i, j) *= inv;
    }
  }
}

ComplexMatrix ComplexMatrix::column(std::size_t j) const {
  ComplexMatrix out(rows_, 1);
  for (std::size_t i = 0; i < rows_; ++i) {
    out.re(i, 0) = re(i, j);
    out.im(i, 0) = im(i, j);
  }
  return out;
}

void ComplexMatrix::set_column(std::size_t j, const ComplexMatrix& col) {
  for (std::size_t i = 0; i < rows_; ++i) {
    re(i, j) = col.re(i, 0);
    im(i, j) = col.im(i, 0);
  }
}

namespace {

// Cyclic Jacobi on a dense symmetric matrix (tiny dimensions only).
// a is destroyed; eigenvectors land in the columns of v.
void jacobi_symmetric(std::vector<double>& a, std::size_t n,
                      std::vector<double>& w, std::vector<double>& v) {
  v.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  double scale = 0.0;
  for (std::size_t i = 0; i < n * n; ++i) scale = std::max(scale, std::abs(a[i]));
  if (scale == 0.0) scale = 1.0;
  const double tol = 1e-15 * scale;

  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += std::abs(a[p * n + q]);
    }
    if (off <= tol) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) <= tol * 1e-2) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a[i * n + p], aiq = a[i * n + q];
          a[i * n + p] = c * aip - s * aiq;
          a[i * n + q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a[p * n + i], aqi = a[q * n + i];
          a[p * n + i] = c * api - s * aqi;
          a[q * n + i] = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v[i * n + p], viq = v[i * n + q];
          v[i * n + p] = c * vip - s * viq;
          v[i * n + q] = s * vip + c * viq;
        }
      }
    }
  }
  w.resize(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = a[i * n + i];
}

// [[Re, -Im], [Im, Re]] embedding of a complex matrix.
std::vector<double> real_embedding(const ComplexMatrix& m) {
  const std::size_t n = m.rows();
  std::vector<double> out(4 * n * n);
  const std::size_t nn = 2 * n;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[i * nn + j] = m.re(i, j);
      out[i * nn + (j + n)] = -m.im(i, j);
      out[(i + n) * nn + j] = m.im(i, j);
      out[(i + n) * nn + (j + n)] = m.re(i, j);
    }
  }
  return out;
}

// In-place lower Cholesky of a symmetric positive-definite matrix.
void cholesky(std::vector<double>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t l = 0; l < j; ++l) d -= a[j * n + l] * a[j * n + l];
    if (d <= 0.0) {
      throw std::runtime_error("cholesky: matrix not positive definite");
    }
    a[j * n + j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t l = 0; l < j; ++l) s -= a[i * n + l] * a[j * n + l];
      a[i * n + j] = s / a[j * n + j];
    }
    for (std::size_t i = 0; i < j; ++i) a[i * n + j] = 0.0;
  }
}

void solve_lower(const std::vector<double>& l, std::size_t n,
                 std::vector<double>& x) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= l[i * n + j] * x[j];
    x[i] = s / l[i * n + i];
  }
}

void solve_lower_transposed(const std::vector<double>& l, std::size_t n,
                            std::vector<double>& x) {
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= l[j * n + i] * x[j];
    x[i] = s / l[i * n + i];
  }
}

// Selects `count` complex vectors from real-embedded candidates (given in
// descending eigenvalue order), dropping J-paired duplicates by complex
// Gram-Schmidt. Returns unit-norm columns plus the eigenvalue of each
// accepted candidate.
struct Selected {
  ComplexMatrix vectors;
  std::vector<double> values;
};

Selected select_complex_vectors(const std::vector<std::vector<double>>& cands,
                                const std::vector<double>& cand_values,
                                std::size_t n, std::size_t count) {
  // `kept` holds the vectors as found (generalized eigenvectors are not
  // mutually orthogonal); `basis` is their orthonormalized shadow used only
  // to detect J-pair duplicates by span membership.
  std::vector<ComplexMatrix> kept;
  std::vector<ComplexMatrix> basis;
  std::vector<double> kept_values;
  for (std::size_t ci = 0; ci < cands.size() && kept.size() < count; ++ci) {
    const auto& cand = cands[ci];
    ComplexMatrix u(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      u.re(i, 0) = cand[i];
      u.im(i, 0) = cand[i + n];
    }
    double norm = std::sqrt(u.frobenius_sq());
    if (norm == 0.0) continue;
    u = u.scaled(1.0 / norm);
    ComplexMatrix resid = u;
    for (const ComplexMatrix& k : basis) {
      double dr = 0.0, di = 0.0;  // <k, resid> = k^H resid
      for (std::size_t i = 0; i < n; ++i) {
        dr += k.re(i, 0) * resid.re(i, 0) + k.im(i, 0) * resid.im(i, 0);
        di += k.re(i, 0) * resid.im(i, 0) - k.im(i, 0) * resid.re(i, 0);
      }
      for (std::size_t i = 0; i < n; ++i) {
        resid.re(i, 0) -= dr * k.re(i, 0) - di * k.im(i, 0);
        resid.im(i, 0) -= dr * k.im(i, 0) + di * k.re(i, 0);
      }
    }
    norm = std::sqrt(resid.frobenius_sq());
    if (norm < 1e-6) continue;  // J-pair duplicate of an accepted vector
    kept.push_back(u);
    basis.push_back(resid.scaled(1.0 / norm));
    kept_values.push_back(cand_values[ci]);
  }
  if (kept.size() < count) {
    throw std::runtime_error("eigenvector selection: expected " +
                             std::to_string(count) + " got " +
                             std::to_string(kept.size()));
  }
  Selected out;
  out.vectors = ComplexMatrix(n, count);
  for (std::size_t j = 0; j < count; ++j) out.vectors.set_column(j, kept[j]);
  out.values = std::move(kept_values);
  return out;
}

std::vector<std::size_t> descending_order(const std::vector<double>& w) {
  std::vector<std::size_t> idx(w.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
  return idx;
}

}  // namespace

HermitianEigen hermitian_eigen(const ComplexMatrix& a) {
  const std::size_t n = a.rows();
  if (n != a.cols()) {
    throw std::invalid_argument("hermitian_eigen: matrix must be square");
  }
  std::vector<double> ar = real_embedding(a);
  std::vector<double> w, v;
  jacobi_symmetric(ar, 2 * n, w, v);
  std::vector<std::size_t> order = descending_order(w);
  std::vector<std::vector<double>> cands;
  std::vector<double> cand_values;
  cands.reserve(2 * n);
  for (std::size_t oi : order) {
    std::vector<double> col(2 * n);
    for (std::size_t i = 0; i < 2 * n; ++i) col[i] = v[i * 2 * n + oi];
    cands.push_back(std::move(col));
    cand_values.push_back(w[oi]);
  }
  Selected sel = select_complex_vectors(cands, cand_values, n, n);
  return HermitianEigen{std::move(sel.values), std::move(sel.vectors)};
}

ComplexMatrix dominant_generalized_eigenvectors(const ComplexMatrix& s,
                                                const ComplexMatrix& q,
                                                std::size_t count) {
  const std::size_t n = s.rows();
  if (s.cols() != n || q.rows() != n || q.cols() != n) {
    throw std::invalid_argument("generalized eigen: shape mismatch");
  }
  const std::size_t nn = 2 * n;
  std::vector<double> qr = real_embedding(q);
  cholesky(qr, nn);
  // m = L^-1 S_R L^-T, assembled column by column.
  std::vector<double> sr = real_embedding(s);
  std::vector<double> m(nn * nn);
  std::vector<double> col(nn);
  for (std::size_t j = 0; j < nn; ++j) {
    for (std::size_t i = 0; i < nn; ++i) col[i] = sr[i * nn + j];
    solve_lower(qr, nn, col);
    for (std::size_t i = 0; i < nn; ++i) m[i * nn + j] = col[i];
  }
  for (std::size_t i = 0; i < nn; ++i) {
    for (std::size_t j = 0; j < nn; ++j) col[j] = m[i * nn + j];
    solve_lower(qr, nn, col);
    for (std::size_t j = 0; j < nn; ++j) m[i * nn + j] = col[j];
  }
  // Symmetrize against roundoff before Jacobi.
  for (std::size_t i = 0; i < nn; ++i) {
    for (std::size_t j = i + 1; j < nn; ++j) {
      const double avg = 0.5 * (m[i * nn + j] + m[j * nn + i]);
      m[i * nn + j] = avg;
      m[j * nn + i] = avg;
    }
  }
  std::vector<double> w, v;
  jacobi_symmetric(m, nn, w, v);
  std::vector<std::size_t> order = descending_order(w);
  std::vector<std::vector<double>> cands;
  std::vector<double> cand_values;
  cands.reserve(nn);
  for (std::size_t oi : order) {
    std::vector<double> u(nn);
    for (std::size_t i = 0; i < nn; ++i) u[i] = v[i * nn + oi];
    solve_lower_transposed(qr, nn, u);  // back to the unwhitened space
    cands.push_back(std::move(u));
    cand_values.push_back(w[oi]);
  }
  return select_complex_vectors(cands, cand_values, n, count).vectors;
}

}  // namespace irsc::cx
