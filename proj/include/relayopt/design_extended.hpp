#pragma once

#include "relayopt/design_linear.hpp"

namespace relayopt {

/// Estimated channels plus their error statistics.
struct RobustChannelState {
  CMat h_sr_hat;
  CMat h_rd_hat;
  KroneckerErrorModel err_sr;
  KroneckerErrorModel err_rd;
};

/// MSE matrix averaged over the channel estimation errors:
/// Ebar = G A G^H - G Hhat U - U^H Hhat^H G^H + I with
/// A = Hrd_hat F M F^H Hrd_hat^H + beta Sigma_rd + rho I,
/// M = Hsr_hat U U^H Hsr_hat^H + alpha Sigma_sr + rho I,
/// alpha = tr(U U^H Psi_sr), beta = tr(F M F^H Psi_rd).
CMat averaged_mse(const RobustChannelState& state, const CMat& u,
                  const CMat& f, const CMat& g, double rho);

/// G = U^H Hhat^H A^{-1}; minimizes every diagonal entry of averaged_mse.
CMat robust_wiener(const RobustChannelState& state, const CMat& u,
                   const CMat& f, double rho);

/// Robust P1 design for scaled-identity row covariances. The error power
/// enters the waterfilling as inflated per-link noise levels and the relay
/// constraint includes the alpha Sigma_sr term.
P1Solution robust_design_p1(const RobustChannelState& state, Objective obj,
                            double p_s, double p_r, double rho, int k,
                            const AllocOptions& opts = {});

struct MultiHopChannel {
  std::vector<CMat> hops;        // H_1 .. H_L, H_i maps node i-1 to node i
  std::vector<double> rhos;      // noise variance entering each hop
  std::vector<double> budgets;   // per-node transmit budgets P_0 .. P_{L-1}
  int num_streams = 1;
};

struct MultiHopSolution {
  std::vector<CMat> node_matrices;  // F_0 (N x K), F_1 .. F_{L-1} (N x N)
  CMat g;
  std::vector<Vec> node_powers;     // per-node per-stream powers
  Vec stream_mses;
  double objective_value = 0.0;
  bool converged = false;
  int iterations = 0;
};

MultiHopSolution multihop_design(const MultiHopChannel& channel, Objective obj,
                                 const AllocOptions& opts = {});

struct MultiRelayChannel {
  std::vector<CMat> h_sr_q;  // source to relay q, N_R x N_S
  std::vector<CMat> h_rq_d;  // relay q to destination, N_S x N_R
  double rho_1 = 1.0;
  double rho_2 = 1.0;
  int num_streams = 1;

  int q_relays() const { return static_cast<int>(h_sr_q.size()); }
  CMat stacked_h_sr() const;
  CMat stacked_h_rd() const;
};

struct MultiRelaySolution {
  TransceiverDesign design;  // f is block diagonal (per-relay blocks)
  PowerAllocation allocation;
  double fit_residual = 0.0;  // relative LS error of the block-diagonal fit
  double sum_mse = 0.0;       // recomputed from the actual matrices
};

/// Block-diagonal relay design against a total relay power budget. Q = 1
/// reduces to the single-relay SumMSE design.
MultiRelaySolution multirelay_design(const MultiRelayChannel& channel,
                                     double p_s, double p_r_total);

}  // namespace relayopt
