#include "irsc/channel.hpp"

#include "binio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

namespace irsc::channel {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

void check_realization(const ChannelRealization& r) {
  if (r.users == 0 || r.h.size() != r.users * r.users) {
    throw std::invalid_argument("channel: realization holds " +
                                std::to_string(r.h.size()) +
                                " matrices for K=" + std::to_string(r.users));
  }
}

}  // namespace

ChannelRealization sample_channel(std::size_t users, std::size_t tx_antennas,
                                  std::size_t rx_antennas, rng::Stream& rng) {
  if (users < 1 || tx_antennas < 1 || rx_antennas < 1) {
    throw std::invalid_argument("sample_channel: K, Nt, Nr must be >= 1");
  }
  ChannelRealization r;
  r.users = users;
  r.tx_antennas = tx_antennas;
  r.rx_antennas = rx_antennas;
  r.h.reserve(users * users);
  for (std::size_t k = 0; k < users; ++k) {
    for (std::size_t j = 0; j < users; ++j) {
      cx::ComplexMatrix m(rx_antennas, tx_antennas);
      for (std::size_t i = 0; i < rx_antennas; ++i) {
        for (std::size_t l = 0; l < tx_antennas; ++l) {
          m.re(i, l) = rng.normal() * kInvSqrt2;
          m.im(i, l) = rng.normal() * kInvSqrt2;
        }
      }
      r.h.push_back(std::move(m));
    }
  }
  return r;
}

double noise_variance_from_snr(double snr_db, double power) {
  if (power <= 0.0) {
    throw std::invalid_argument("noise_variance_from_snr: power must be > 0");
  }
  return power * std::pow(10.0, -snr_db / 10.0);
}

std::vector<double> flatten_csi(const ChannelRealization& r) {
  check_realization(r);
  std::vector<double> flat;
  flat.reserve(r.csi_length());
  for (std::size_t k = 0; k < r.users; ++k) {
    for (std::size_t j = 0; j < r.users; ++j) {
      const cx::ComplexMatrix& m = r.at(k, j);
      flat.insert(flat.end(), m.real_data().begin(), m.real_data().end());
      flat.insert(flat.end(), m.imag_data().begin(), m.imag_data().end());
    }
  }
  return flat;
}

ChannelRealization unflatten_csi(std::span<const double> flat,
                                 std::size_t users, std::size_t tx_antennas,
                                 std::size_t rx_antennas) {
  const std::size_t per_matrix = tx_antennas * rx_antennas;
  const std::size_t expected = 2 * users * users * per_matrix;
  if (flat.size() != expected) {
    throw std::invalid_argument("unflatten_csi: got " +
                                std::to_string(flat.size()) +
                                " values, expected " + std::to_string(expected));
  }
  ChannelRealization r;
  r.users = users;
  r.tx_antennas = tx_antennas;
  r.rx_antennas = rx_antennas;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < users; ++k) {
    for (std::size_t j = 0; j < users; ++j) {
      cx::ComplexMatrix m(rx_antennas, tx_antennas);
      std::copy(flat.begin() + pos, flat.begin() + pos + per_matrix,
                m.real_data().begin());
      pos += per_matrix;
      std::copy(flat.begin() + pos, flat.begin() + pos + per_matrix,
                m.imag_data().begin());
      pos += per_matrix;
      r.h.push_back(std::move(m));
    }
  }
  return r;
}

void save_realization(const ChannelRealization& r, std::ostream& os) {
  check_realization(r);
  binio::write_u32(os, static_cast<std::uint32_t>(r.users));
  binio::write_u32(os, static_cast<std::uint32_t>(r.tx_antennas));
  binio::write_u32(os, static_cast<std::uint32_t>(r.rx_antennas));
  for (double v : flatten_csi(r)) binio::write_f64(os, v);
}

ChannelRealization load_realization(std::istream& is, double noise_variance) {
  const std::uint32_t users = binio::read_u32(is, "channel record");
  const std::uint32_t tx = binio::read_u32(is, "channel record");
  const std::uint32_t rx = binio::read_u32(is, "channel record");
  if (users == 0 || tx == 0 || rx == 0) {
    throw std::runtime_error("channel record: zero dimension in header");
  }
  std::vector<double> flat(2ull * users * users * tx * rx);
  for (double& v : flat) v = binio::read_f64(is, "channel record");
  ChannelRealization r = unflatten_csi(flat, users, tx, rx);
  r.noise_variance = noise_variance;
  return r;
}

void save_realization(const ChannelRealization& r,
                      const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  save_realization(r, os);
}

ChannelRealization load_realization(const std::filesystem::path& path,
                                    double noise_variance) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return load_realization(is, noise_variance);
}

cx::ComplexMatrix unpack_complex(std::span<const double> reals,
                                 std::size_t rows, std::size_t cols) {
  const std::size_t n = rows * cols;
  if (reals.size() != 2 * n) {
    throw std::invalid_argument("unpack_complex: got " +
                                std::to_string(reals.size()) +
                                " reals for shape " + std::to_string(rows) +
                                "x" + std::to_string(cols));
  }
  cx::ComplexMatrix m(rows, cols);
  std::copy(reals.begin(), reals.begin() + n, m.real_data().begin());
  std::copy(reals.begin() + n, reals.end(), m.imag_data().begin());
  return m;
}

void pack_complex(const cx::ComplexMatrix& m, std::span<double> out) {
  const std::size_t n = m.rows() * m.cols();
  if (out.size() != 2 * n) {
    throw std::invalid_argument("pack_complex: destination size mismatch");
  }
  std::copy(m.real_data().begin(), m.real_data().end(), out.begin());
  std::copy(m.imag_data().begin(), m.imag_data().end(), out.begin() + n);
}

namespace {

// Complex product y += A x in the packed-real representation:
// y_re += A_re x_re - A_im x_im ; y_im += A_re x_im + A_im x_re.
// x is 2*(a_cols*cols) packed reals, y is 2*(a_rows*cols).
void packed_complex_accumulate(const cx::ComplexMatrix& a,
                               std::span<const double> x, std::size_t cols,
                               std::span<double> y) {
  const std::size_t ar = a.rows(), ac = a.cols();
  const double* xre = x.data();
  const double* xim = x.data() + ac * cols;
  double* yre = y.data();
  double* yim = y.data() + ar * cols;
  for (std::size_t i = 0; i < ar; ++i) {
    for (std::size_t l = 0; l < ac; ++l) {
      const double are = a.re(i, l), aim = a.im(i, l);
      const double* xr = xre + l * cols;
      const double* xi = xim + l * cols;
      double* yr = yre + i * cols;
      double* yi = yim + i * cols;
      for (std::size_t j = 0; j < cols; ++j) {
        yr[j] += are * xr[j] - aim * xi[j];
        yi[j] += are * xi[j] + aim * xr[j];
      }
    }
  }
}

struct LinearChannelTerm {
  // Effective complex matrix per (k, j) pair; index into `gains` is
  // sample * K * K + k * K + j (or k * K + j when shared).
  std::vector<cx::ComplexMatrix> gains;
  std::size_t users = 0;
  bool shared = false;
};

// Shared machinery behind the plain and filtered channel layers: applies a
// batch of complex linear maps plus a fixed noise constant, recording a
// backward that routes the adjoint map (Hermitian transpose) to every input.
std::vector<diff::Tensor> apply_linear_channel(
    std::span<const diff::Tensor> x, LinearChannelTerm term,
    std::vector<std::vector<double>> noise, std::size_t in_rows,
    std::size_t out_rows, std::size_t symbols) {
  const std::size_t users = term.users;
  if (x.size() != users) {
    throw std::invalid_argument("channel: " + std::to_string(x.size()) +
                                " symbol tensors for K=" +
                                std::to_string(users));
  }
  const std::size_t batch = x[0].rows();
  const std::size_t in_width = 2 * in_rows * symbols;
  const std::size_t out_width = 2 * out_rows * symbols;
  for (const diff::Tensor& t : x) {
    if (t.rows() != batch || t.cols() != in_width) {
      throw std::invalid_argument(
          "channel: symbol tensor shape " + diff::shape_str(t.shape()) +
          " does not match [" + std::to_string(batch) + "x" +
          std::to_string(in_width) + "]");
    }
  }
  diff::Tape& tape = *x[0].tape();
  auto shared_term = std::make_shared<LinearChannelTerm>(std::move(term));
  std::vector<std::size_t> input_ids(users);
  for (std::size_t j = 0; j < users; ++j) input_ids[j] = x[j].id();

  std::vector<diff::Tensor> outputs;
  outputs.reserve(users);
  for (std::size_t k = 0; k < users; ++k) {
    std::vector<double> out = std::move(noise[k]);
    for (std::size_t i = 0; i < batch; ++i) {
      const std::size_t base = shared_term->shared ? 0 : i * users * users;
      for (std::size_t j = 0; j < users; ++j) {
        packed_complex_accumulate(
            shared_term->gains[base + k * users + j],
            x[j].value().subspan(i * in_width, in_width), symbols,
            std::span<double>(out).subspan(i * out_width, out_width));
      }
    }
    outputs.push_back(tape.record(
        {batch, out_width}, std::move(out),
        [shared_term, input_ids, k, batch, in_width, out_width,
         symbols](diff::Tape& t, std::size_t self) {
          const std::size_t users = shared_term->users;
          std::span<const double> g = t.grad_of(self);
          for (std::size_t j = 0; j < users; ++j) {
            std::span<double> gx = t.grad_of(input_ids[j]);
            for (std::size_t i = 0; i < batch; ++i) {
              const std::size_t base =
                  shared_term->shared ? 0 : i * users * users;
              // Adjoint of Y = G X is dX = G^H dY.
              packed_complex_accumulate(
                  shared_term->gains[base + k * users + j].hermitian(),
                  g.subspan(i * out_width, out_width), symbols,
                  gx.subspan(i * in_width, in_width));
            }
          }
        }));
  }
  return outputs;
}

std::vector<std::vector<double>> draw_noise(
    std::span<const ChannelRealization> realizations, std::size_t users,
    std::size_t batch, std::size_t out_rows, std::size_t symbols,
    rng::Stream& rng) {
  const std::size_t out_width = 2 * out_rows * symbols;
  std::vector<std::vector<double>> noise(users);
  for (std::size_t k = 0; k < users; ++k) {
    noise[k].assign(batch * out_width, 0.0);
  }
  // Per complex entry CN(0, sigma^2): re and im each N(0, sigma^2 / 2).
  // Draw order (user, sample, entry) is part of the determinism contract.
  for (std::size_t k = 0; k < users; ++k) {
    for (std::size_t i = 0; i < batch; ++i) {
      const double sigma2 =
          realizations[realizations.size() == 1 ? 0 : i].noise_variance;
      const double s = std::sqrt(sigma2 / 2.0);
      double* row = noise[k].data() + i * out_width;
      for (std::size_t e = 0; e < out_width; ++e) row[e] = s * rng.normal();
    }
  }
  return noise;
}

void check_batch_realizations(std::span<const ChannelRealization> realizations,
                              std::size_t batch) {
  if (realizations.empty() ||
      (realizations.size() != 1 && realizations.size() != batch)) {
    throw std::invalid_argument(
        "channel: need 1 or batch realizations, got " +
        std::to_string(realizations.size()) + " for batch " +
        std::to_string(batch));
  }
}

}  // namespace

std::vector<diff::Tensor> apply_interference_channel(
    std::span<const diff::Tensor> x,
    std::span<const ChannelRealization> realizations, std::size_t symbols,
    rng::Stream& noise_rng) {
  if (x.empty()) throw std::invalid_argument("channel: no symbol tensors");
  const std::size_t batch = x[0].rows();
  check_batch_realizations(realizations, batch);
  const ChannelRealization& first = realizations[0];
  check_realization(first);
  if (x.size() != first.users) {
    throw std::invalid_argument("channel: K mismatch between X and H");
  }
  const std::size_t in_width = 2 * first.tx_antennas * symbols;
  if (x[0].cols() != in_width) {
    throw std::invalid_argument("channel: X width " +
                                std::to_string(x[0].cols()) + " != 2*Nt*NB = " +
                                std::to_string(in_width));
  }

  LinearChannelTerm term;
  term.users = first.users;
  term.shared = realizations.size() == 1;
  term.gains.reserve(realizations.size() * first.users * first.users);
  for (const ChannelRealization& r : realizations) {
    check_realization(r);
    for (const cx::ComplexMatrix& m : r.h) term.gains.push_back(m);
  }

  std::vector<std::vector<double>> noise =
      draw_noise(realizations, first.users, batch, first.rx_antennas, symbols,
                 noise_rng);
  return apply_linear_channel(x, std::move(term), std::move(noise),
                              first.tx_antennas, first.rx_antennas, symbols);
}

std::vector<diff::Tensor> apply_filtered_channel(
    std::span<const diff::Tensor> x,
    std::span<const ChannelRealization> realizations,
    std::span<const PrecoderSet> precoders, std::size_t symbols,
    rng::Stream& noise_rng) {
  if (x.empty()) throw std::invalid_argument("channel: no symbol tensors");
  const std::size_t batch = x[0].rows();
  check_batch_realizations(realizations, batch);
  if (precoders.size() != realizations.size()) {
    throw std::invalid_argument(
        "channel: precoder sets must align with realizations");
  }
  const ChannelRealization& first = realizations[0];
  check_realization(first);
  const std::size_t users = first.users;

  // Effective per-pair gains U_k^H H_kj V_j.
  LinearChannelTerm term;
  term.users = users;
  term.shared = realizations.size() == 1;
  term.gains.reserve(realizations.size() * users * users);
  for (std::size_t i = 0; i < realizations.size(); ++i) {
    const ChannelRealization& r = realizations[i];
    const PrecoderSet& p = precoders[i];
    if (p.u.size() != users || p.v.size() != users) {
      throw std::invalid_argument("channel: precoder set has wrong user count");
    }
    for (std::size_t k = 0; k < users; ++k) {
      const cx::ComplexMatrix uh = p.u[k].hermitian();
      for (std::size_t j = 0; j < users; ++j) {
        term.gains.push_back(uh * r.at(k, j) * p.v[j]);
      }
    }
  }

  // Raw noise at the antennas, then filtered: U_k^H N_k.
  std::vector<std::vector<double>> raw =
      draw_noise(realizations, users, batch, first.rx_antennas, symbols,
                 noise_rng);
  const std::size_t out_width = 2 * first.tx_antennas * symbols;
  const std::size_t raw_width = 2 * first.rx_antennas * symbols;
  std::vector<std::vector<double>> filtered(users);
  for (std::size_t k = 0; k < users; ++k) {
    filtered[k].assign(batch * out_width, 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
      const PrecoderSet& p = precoders[precoders.size() == 1 ? 0 : i];
      packed_complex_accumulate(
          p.u[k].hermitian(),
          std::span<const double>(raw[k]).subspan(i * raw_width, raw_width),
          symbols, std::span<double>(filtered[k]).subspan(i * out_width,
                                                          out_width));
    }
  }
  return apply_linear_channel(x, std::move(term), std::move(filtered),
                              first.rx_antennas, first.tx_antennas, symbols);
}

}  // namespace irsc::channel
