#pragma once

#include <string>
#include <vector>

#include "relayopt/types.hpp"

namespace relayopt {

enum class Objective {
  MutualInfo,
  ProdMSE,
  SumSINR,
  ProdSINR,
  SumMSE,
  MaxMSE,
  HarmonicSINR,
  MinSINR,
};

enum class SchurClass { SchurConcave, SchurConvex, Both, Unclassified };

enum class DesignBranch { LinearConcave, LinearConvex, Dfe };

/// Additive Schur classification over the MSE vector.
SchurClass additive_class(Objective obj);

/// Multiplicative Schur classification (drives the DFE dispatch). The
/// increasing additively Schur-convex objectives are multiplicatively
/// Schur-convex; MutualInfo and ProdMSE depend on the MSE product only and
/// are multiplicatively Schur-concave; the remaining ones are left
/// unclassified and rejected on the nonlinear path.
SchurClass multiplicative_class(Objective obj);

/// Objective value in minimization orientation (maximizations negated).
/// All evaluators are non-decreasing in each argument; in particular
/// MutualInfo evaluates to +sum(log m_k), i.e. minus the rate.
/// HarmonicSINR returns +infinity when any MSE equals one (zero SINR).
double evaluate(Objective obj, const std::vector<double>& mses);

/// Selects the design branch for a (objective, receiver architecture) pair.
/// use_convex_for_summse overrides the default concave dispatch of SumMSE,
/// which belongs to both additive classes.
DesignBranch dispatch_class(Objective obj, bool nonlinear,
                            bool use_convex_for_summse = false);

const char* objective_name(Objective obj);
Objective objective_from_name(const std::string& name);
std::vector<Objective> all_objectives();

}  // namespace relayopt
