#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace relayopt {

using Cx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Vec = Eigen::VectorXd;

/// Deterministic random stream. All randomized operations take one of these
/// explicitly; substreams for parallel work are derived with substream().
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  std::mt19937_64& engine() { return engine_; }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  /// Circularly symmetric complex Gaussian, unit variance.
  Cx cgauss() {
    constexpr double half = 0.7071067811865476;  // 1/sqrt(2)
    return Cx(normal() * half, normal() * half);
  }

  std::uint32_t bit() { return static_cast<std::uint32_t>(engine_()) & 1u; }

  /// Independent stream indexed by (a, b); stable across runs and thread
  /// schedules.
  static Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = mix(seed + 0x9e3779b97f4a7c15ull * (a + 1));
    s = mix(s ^ (0xbf58476d1ce4e5b9ull * (b + 1)));
    return Rng(s);
  }

 private:
  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// SVD H = left * diag(singular_values) * right^H with values sorted
/// non-increasing and a fixed sign convention (see svd_sorted).
struct ChannelSvd {
  CMat left;
  Vec singular_values;
  CMat right;

  /// Squared singular values (per-eigenchannel power gains).
  Vec gains() const { return singular_values.array().square(); }
};

/// Physical two-hop problem instance. h_sr is N_R x N_S, h_rd is N_S x N_R;
/// rho_1/rho_2 are the noise variances on the two links.
struct TwoHopChannel {
  CMat h_sr;
  CMat h_rd;
  double rho_1 = 1.0;
  double rho_2 = 1.0;
  int num_streams = 1;

  int n_s() const { return static_cast<int>(h_sr.cols()); }
  int n_r() const { return static_cast<int>(h_sr.rows()); }
};

/// Separable estimation-error covariances: error = sigma_row^{1/2} * W *
/// psi_col^{1/2} with W i.i.d. unit-variance complex Gaussian.
struct KroneckerErrorModel {
  CMat sigma_row;
  CMat psi_col;
};

/// Source precoder u (N_S x K), relay matrix f (N_R x N_R), receiver g
/// (K x N_S). s_rotation carries the unitary applied at the source for
/// rotation-based designs; backward is the strictly upper triangular DFE
/// feedback matrix.
struct TransceiverDesign {
  CMat u;
  CMat f;
  CMat g;
  std::optional<CMat> s_rotation;
  std::optional<CMat> backward;
};

/// Per-stream source powers a and relay powers b against budgets p_s, p_r.
struct PowerAllocation {
  Vec a;
  Vec b;
  double p_s = 0.0;
  double p_r = 0.0;
};

struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateChannelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace relayopt
