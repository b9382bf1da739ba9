#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "irsc/complex.hpp"
#include "irsc/rng.hpp"
#include "irsc/tensor.hpp"

namespace irsc::channel {

// One draw of the K-user flat Rayleigh MIMO interference channel:
// K*K matrices H_kj (receiver k, transmitter j), each rx x tx, plus the
// per-complex-entry noise variance sigma^2.
struct ChannelRealization {
  std::size_t users = 0;
  std::size_t tx_antennas = 0;
  std::size_t rx_antennas = 0;
  std::vector<cx::ComplexMatrix> h;  // row-major over (k, j)
  double noise_variance = 0.0;

  const cx::ComplexMatrix& at(std::size_t k, std::size_t j) const {
    return h[k * users + j];
  }
  cx::ComplexMatrix& at(std::size_t k, std::size_t j) {
    return h[k * users + j];
  }
  std::size_t csi_length() const {
    return 2 * users * users * tx_antennas * rx_antennas;
  }
};

// Entries i.i.d. CN(0,1): real and imaginary parts each N(0, 1/2).
ChannelRealization sample_channel(std::size_t users, std::size_t tx_antennas,
                                  std::size_t rx_antennas, rng::Stream& rng);

// sigma^2 = power * 10^(-snr_db / 10).
double noise_variance_from_snr(double snr_db, double power);

// Deterministic CSI vectorization: for k then j, row-major real parts of
// H_kj followed by its imaginary parts. Length 2 K^2 Nt Nr.
std::vector<double> flatten_csi(const ChannelRealization& realization);
ChannelRealization unflatten_csi(std::span<const double> flat,
                                 std::size_t users, std::size_t tx_antennas,
                                 std::size_t rx_antennas);

// Little-endian binary record: u32 K, u32 Nt, u32 Nr, then the flatten_csi
// doubles. Noise variance is not part of the record.
void save_realization(const ChannelRealization& realization, std::ostream& os);
ChannelRealization load_realization(std::istream& is,
                                    double noise_variance = 0.0);
void save_realization(const ChannelRealization& realization,
                      const std::filesystem::path& path);
ChannelRealization load_realization(const std::filesystem::path& path,
                                    double noise_variance = 0.0);

// Complex packing convention for symbol rows: a rows x cols complex matrix
// travels as 2*rows*cols reals, row-major real parts first, then row-major
// imaginary parts.
cx::ComplexMatrix unpack_complex(std::span<const double> reals,
                                 std::size_t rows, std::size_t cols);
void pack_complex(const cx::ComplexMatrix& m, std::span<double> out);

// Y_k = H_kk X_k + sum_{j != k} H_kj X_j + N_k as a fixed differentiable
// layer: H and the freshly drawn noise are constants on the tape, gradients
// flow to every X_j. x[j] is [batch x 2*Nt*NB]; `realizations` holds either
// one entry shared by the whole batch or one entry per sample. Outputs are
// [batch x 2*Nr*NB].
std::vector<diff::Tensor> apply_interference_channel(
    std::span<const diff::Tensor> x,
    std::span<const ChannelRealization> realizations, std::size_t symbols,
    rng::Stream& noise_rng);

struct PrecoderSet {
  std::vector<cx::ComplexMatrix> v;  // per user, tx x rx, unit-norm columns
  std::vector<cx::ComplexMatrix> u;  // per user, rx x tx, unit-norm columns
};

// Y_k = U_k^H H_kk V_k X_k + sum_{j != k} U_k^H H_kj V_j X_j + U_k^H N_k.
// x[j] is [batch x 2*Nr*NB] (pre-precoding); outputs are [batch x 2*Nt*NB].
// `precoders` aligns with `realizations` (size 1 or batch).
std::vector<diff::Tensor> apply_filtered_channel(
    std::span<const diff::Tensor> x,
    std::span<const ChannelRealization> realizations,
    std::span<const PrecoderSet> precoders, std::size_t symbols,
    rng::Stream& noise_rng);

struct PrecoderDesign {
  PrecoderSet precoders;
  // Total leakage after each iteration, entry 0 = initial precoders.
  // Non-increasing by construction.
  std::vector<double> leakage_history;
};

// Alternating per-user filter design: each half-step replaces U_k (then V_k
// through the reciprocal network) with the dominant generalized eigenvectors
// of the desired-signal covariance against the interference-plus-noise
// covariance. An update that would increase the total leakage
// sum_k sum_{j!=k} |U_k^H H_kj V_j|_F^2 is rejected and the design holds,
// so the recorded leakage sequence never increases.
PrecoderDesign design_precoders_filters(const ChannelRealization& realization,
                                        std::size_t iterations);

double interference_leakage(const ChannelRealization& realization,
                            const PrecoderSet& precoders);

}  // namespace irsc::channel
