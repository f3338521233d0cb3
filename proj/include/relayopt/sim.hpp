#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relayopt/design_dfe.hpp"
#include "relayopt/design_extended.hpp"
#include "relayopt/design_linear.hpp"

namespace relayopt {

/// Simulation configuration. JSON fields use exactly these names; unknown
/// fields are rejected.
struct SimConfig {
  std::string scenario;  // two_hop_p1 | two_hop_p2 | dfe | robust | multihop
                         // | multirelay | naf
  int n_s = 3;
  int n_r = 3;
  int k = 2;
  int l = 0;  // hops (multihop)
  int q = 0;  // parallel relays (multirelay)
  std::vector<std::string> designs;  // parsed from "objective"
  Vec eta;                           // per-stream QoS targets
  std::vector<double> eta_sweep;     // equal-target sweep for power runs
  int qam_order = 4;
  std::vector<double> snr_sr_db;
  std::vector<double> snr_rd_db = {20.0};
  long trials = 1000;
  std::uint64_t seed = 1;
  std::string output;
  double rho_db = 0.0;  // noise level for power runs
  double eps = 0.1;     // estimation error level for the robust scenario
  int resolution = 200; // grid resolution for the oracle subcommand
};

// ---- QAM ----------------------------------------------------------------

int qam_bits_per_symbol(int m);

/// Gray-mapped square QAM with unit average symbol energy. Bit order per
/// symbol: first half of the bits select the I level, second half the Q
/// level; bit pattern 0...0 maps to the most positive level on each axis
/// (4-QAM: bits 00 -> (1+1j)/sqrt(2)).
CVec qam_mod(const std::vector<int>& bits, int m);
std::vector<int> qam_demod(const CVec& symbols, int m);
Cx qam_slice(Cx v, int m);

// ---- Detection ----------------------------------------------------------

/// Hard decisions on an already equalized vector (G y).
std::vector<int> detect_linear(const CVec& gy, int m);

/// Successive detection, last stream first, feeding sliced decisions through
/// the strictly upper triangular backward matrix.
std::vector<int> detect_dfe(const CVec& gy, const CMat& backward, int m);

// ---- Monte Carlo --------------------------------------------------------

struct BerPoint {
  double snr_db = 0.0;
  double ber = 0.0;
  double ci95 = 0.0;
  long long trials = 0;
  long long bit_errors = 0;
};

struct BerCurve {
  std::string design;
  std::vector<BerPoint> points;
  std::string config_hash;
  std::uint64_t seed = 0;
};

/// Link-level BER sweep. One curve per configured design; all designs share
/// the same channel/noise/symbol draws per trial. Deterministic for a fixed
/// (config, seed); trial t at point p uses the substream (seed, p, t).
std::vector<BerCurve> simulate_ber(const SimConfig& config);

struct PowerRow {
  double eta = 0.0;
  std::string design;
  double avg_power_db = 0.0;
  long draws = 0;
  long infeasible = 0;
};

/// QoS power sweep: averages total power of the RC, SA, and RC-DFE designs
/// over channel draws at each equal-target level.
std::vector<PowerRow> power_experiment(const SimConfig& config);

/// Empirical per-stream MSE of a fixed design on a fixed channel; uses the
/// backward matrix with true-symbol feedback when present. Returns the
/// sample means and their standard errors.
std::pair<Vec, Vec> empirical_mse(const TransceiverDesign& design,
                                  const TwoHopChannel& channel, long trials,
                                  Rng& rng);

/// Worker threads used by simulate_ber / power_experiment; reads the
/// RELAYOPT_THREADS environment variable, falling back to the hardware
/// concurrency.
int sim_thread_count();

}  // namespace relayopt
