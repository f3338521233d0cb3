#pragma once

#include "relayopt/channel.hpp"
#include "relayopt/mse.hpp"
#include "relayopt/objectives.hpp"

namespace relayopt {

struct QoSTargets {
  Vec eta;  // per-stream MSE ceilings, each in (0, 1)
};

struct P1Solution {
  TransceiverDesign design;
  PowerAllocation allocation;
  double objective_value = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct P2Solution {
  TransceiverDesign design;
  PowerAllocation allocation;
  double total_power = 0.0;
  Vec achieved_mses;
};

struct AllocOptions {
  double rel_tol = 1e-8;
  int max_iters = 500;
  int random_restarts = 0;       // uniform init only when 0
  std::uint64_t restart_seed = 1;
  bool use_convex_for_summse = false;  // SumMSE belongs to both classes
};

/// Power-allocation objective families with closed-form conditional updates.
/// Additively Schur-convex objectives all share the SumMse family (their
/// allocation problem does not depend on f); MutualInfo and ProdMSE share
/// LogMse.
enum class AllocFamily { SumMse, LogMse, SumSinr, ProdSinr };
AllocFamily alloc_family(Objective obj, DesignBranch branch);

/// Generic diagonalized AF chain: hop i has per-stream gains[i] (squared
/// singular values), noise rhos[i], and the transmitting node budget
/// budgets[i]. powers[i][k] is the power node i spends on stream k.
struct ChainAllocation {
  std::vector<Vec> powers;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;  // family surrogate value
};

ChainAllocation alternating_chain_allocation(
    const std::vector<Vec>& gains, const std::vector<double>& rhos,
    const std::vector<double>& budgets, AllocFamily family,
    const std::vector<Vec>& init, double rel_tol = 1e-8, int max_iters = 500);

/// One conditional update: optimal own-hop powers given the other hops'
/// contribution c_other[k] = prod_{j != i} s_j/(1+s_j) per stream.
Vec conditional_chain_waterfill(const Vec& c_other, const Vec& gains_own,
                                double rho_own, double budget,
                                AllocFamily family);

/// Two-hop conditional update: other side fixed at
/// fixed_other, solve for this side's powers.
Vec conditional_waterfill(const Vec& fixed_other, const Vec& lams_own,
                          const Vec& lams_other, double rho, double budget,
                          Objective obj);

/// Two-hop alternating power allocation for problem P1.
PowerAllocation alternating_power_allocation(const Vec& lams_sr,
                                             const Vec& lams_rd, double rho,
                                             double p_s, double p_r,
                                             Objective obj,
                                             const PowerAllocation& init,
                                             const AllocOptions& opts = {});

/// Exhaustive oracle over the product of two budget-scaled simplices.
/// Desk-scale only (K <= 3).
PowerAllocation grid_oracle_p1(const Vec& lams_sr, const Vec& lams_rd,
                               double rho, double p_s, double p_r,
                               Objective obj, int resolution);

/// Closed-form transceiver design for problem P1.
P1Solution design_p1(const TwoHopChannel& channel, Objective obj, double p_s,
                     double p_r, const AllocOptions& opts = {});

/// Naive AF baseline: scaled-identity source and relay matrices, Wiener
/// receiver. Relay power meets p_r exactly.
TransceiverDesign naf_design(const TwoHopChannel& channel, double p_s,
                             double p_r);

/// Minimum power pair (a, b) achieving stream MSE exactly t on one
/// eigenchannel.
std::pair<double, double> per_stream_min_power(double t, double lam_sr,
                                               double lam_rd, double rho);
std::pair<double, double> per_stream_min_power2(double t, double lam_sr,
                                                double lam_rd, double rho_1,
                                                double rho_2);

/// QoS power minimization (problem P2), reduced-complexity rotation-based
/// design.
P2Solution design_p2(const TwoHopChannel& channel, const QoSTargets& targets);

/// Baseline without the rotation: each eigenchannel meets its target
/// directly.
P2Solution sa_design_p2(const TwoHopChannel& channel,
                        const QoSTargets& targets);

/// Grid oracle for the P2 outer problem over feasible MSE eigenvalues
/// (K <= 3); returns the minimum total power found.
double grid_oracle_p2(const Vec& lams_sr, const Vec& lams_rd, double rho,
                      const Vec& eta, int resolution);

/// Outer P2 search over the MSE eigenvalue polytope, shared by the linear
/// design (additive majorization) and the DFE design (log_domain: prefix
/// constraints act on log lambda). eta_asc must be sorted ascending;
/// extra_start optionally seeds the descent with a known feasible point.
struct P2EigenSearch {
  Vec lambda;  // ascending, paired with gains sorted non-increasing
  Vec a;
  Vec b;
  double total_power = 0.0;
};
P2EigenSearch p2_eigen_search(const Vec& gains_sr, const Vec& gains_rd,
                              double rho_1, double rho_2, const Vec& eta_asc,
                              bool log_domain, const Vec* extra_start);

}  // namespace relayopt
