#include <cmath>
#include <stdexcept>
#include <string>

#include "irsc/channel.hpp"

namespace irsc::channel {

namespace {

// Orthonormal columns from the leading identity block, cycled when the
// column count exceeds the row count.
cx::ComplexMatrix identity_columns(std::size_t rows, std::size_t cols) {
  cx::ComplexMatrix m(rows, cols);
  for (std::size_t j = 0; j < cols; ++j) m.re(j % rows, j) = 1.0;
  return m;
}

cx::ComplexMatrix covariance_of(const cx::ComplexMatrix& a) {
  return a * a.hermitian();
}

cx::ComplexMatrix ridge(const cx::ComplexMatrix& q, double sigma2) {
  // Keeps the interference-plus-noise covariance positive definite even in
  // the noiseless or interference-free corner cases.
  double tr = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) tr += q.re(i, i);
  const double eps = std::max(sigma2, 1e-12 * std::max(1.0, tr));
  cx::ComplexMatrix out = q;
  for (std::size_t i = 0; i < out.rows(); ++i) out.re(i, i) += eps;
  return out;
}

}  // namespace

double interference_leakage(const ChannelRealization& r,
                            const PrecoderSet& p) {
  double total = 0.0;
  for (std::size_t k = 0; k < r.users; ++k) {
    const cx::ComplexMatrix uh = p.u[k].hermitian();
    for (std::size_t j = 0; j < r.users; ++j) {
      if (j == k) continue;
      total += (uh * r.at(k, j) * p.v[j]).frobenius_sq();
    }
  }
  return total;
}

PrecoderDesign design_precoders_filters(const ChannelRealization& r,
                                        std::size_t iterations) {
  if (r.tx_antennas < r.rx_antennas) {
    throw std::invalid_argument(
        "design_precoders_filters: requires Nt >= Nr, got Nt=" +
        std::to_string(r.tx_antennas) + " Nr=" + std::to_string(r.rx_antennas));
  }
  const std::size_t users = r.users;
  const std::size_t nt = r.tx_antennas;
  const std::size_t nr = r.rx_antennas;

  PrecoderSet current;
  current.v.assign(users, identity_columns(nt, nr));
  current.u.assign(users, identity_columns(nr, nt));

  PrecoderDesign design;
  design.leakage_history.push_back(interference_leakage(r, current));

  for (std::size_t it = 0; it < iterations; ++it) {
    PrecoderSet next = current;
    try {
      // Receive side: U_k from the forward network.
      for (std::size_t k = 0; k < users; ++k) {
        const cx::ComplexMatrix desired = covariance_of(r.at(k, k) * current.v[k]);
        cx::ComplexMatrix interf(nr, nr);
        for (std::size_t j = 0; j < users; ++j) {
          if (j == k) continue;
          interf = interf + covariance_of(r.at(k, j) * current.v[j]);
        }
        next.u[k] = cx::dominant_generalized_eigenvectors(
            desired, ridge(interf, r.noise_variance), nt);
      }
      // Transmit side: V_k from the reciprocal network (channels H_jk^H).
      for (std::size_t k = 0; k < users; ++k) {
        const cx::ComplexMatrix desired =
            covariance_of(r.at(k, k).hermitian() * next.u[k]);
        cx::ComplexMatrix interf(nt, nt);
        for (std::size_t j = 0; j < users; ++j) {
          if (j == k) continue;
          interf = interf + covariance_of(r.at(j, k).hermitian() * next.u[j]);
        }
        next.v[k] = cx::dominant_generalized_eigenvectors(
            desired, ridge(interf, r.noise_variance), nr);
      }
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("design_precoders_filters: iteration " +
                               std::to_string(it) + ": " + e.what());
    }
    for (std::size_t k = 0; k < users; ++k) {
      next.u[k].normalize_columns();
      next.v[k].normalize_columns();
    }
    const double leakage = interference_leakage(r, next);
    const double slack = 1e-12 * std::max(1.0, design.leakage_history.front());
    if (leakage <= design.leakage_history.back() + slack) {
      current = std::move(next);
      design.leakage_history.push_back(leakage);
    } else {
      // Rejected: the proposal would raise leakage; hold the design.
      design.leakage_history.push_back(design.leakage_history.back());
    }
  }
  design.precoders = std::move(current);
  return design;
}

}  // namespace irsc::channel
