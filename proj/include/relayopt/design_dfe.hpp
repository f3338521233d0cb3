#pragma once

#include "relayopt/design_linear.hpp"

namespace relayopt {

struct DfeDesign {
  TransceiverDesign base;  // g is the DFE feedforward, backward is set
  CMat l_factor;           // lower triangular, L L^H = Gram + rho I
  Vec d_scale;             // positive diagonal, diag(D L^H) = 1 exactly
};

/// Backward matrix construction: L L^H = U^H H^H R_n^{-1} H U + rho I
/// (Cholesky), D = diag(1/conj(L_kk)), B = D L^H - I (strictly upper
/// triangular, exact zero diagonal).
struct BackwardFactors {
  CMat b;
  CMat l;
  Vec d;
};
BackwardFactors backward_matrix(const CMat& u, const CMat& h_equiv,
                                const CMat& r_n, double rho);
/// Same with a full noise covariance; rho_ref sets the scale convention
/// L L^H = rho_ref (U^H H^H C_n^{-1} H U + I).
BackwardFactors backward_matrix_cov(const CMat& u, const CMat& h_equiv,
                                    const CMat& c_n, double rho_ref);

struct DfeP1Solution {
  DfeDesign design;
  PowerAllocation allocation;
  double objective_value = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Problem P1 with a DFE receiver for multiplicatively Schur-convex
/// objectives: geometric-mean equalization of the per-stream MSEs.
DfeP1Solution design_dfe_p1(const TwoHopChannel& channel, Objective obj,
                            double p_s, double p_r,
                            const AllocOptions& opts = {});

struct DfeP2Solution {
  DfeDesign design;
  PowerAllocation allocation;
  double total_power = 0.0;
  Vec achieved_mses;
};

/// QoS power minimization with a DFE receiver (multiplicative majorization
/// feasibility, GTD-based rotation).
DfeP2Solution design_dfe_p2(const TwoHopChannel& channel,
                            const QoSTargets& targets);

}  // namespace relayopt
