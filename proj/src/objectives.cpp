#include "relayopt/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace relayopt {

SchurClass additive_class(Objective obj) {
  switch (obj) {
    case Objective::MutualInfo:
    case Objective::ProdMSE:
    case Objective::SumSINR:
    case Objective::ProdSINR:
      return SchurClass::SchurConcave;
    case Objective::SumMSE:
      return SchurClass::Both;
    case Objective::MaxMSE:
    case Objective::HarmonicSINR:
    case Objective::MinSINR:
      return SchurClass::SchurConvex;
  }
  throw InvalidInputError("additive_class: unknown objective");
}

SchurClass multiplicative_class(Objective obj) {
  switch (obj) {
    case Objective::MutualInfo:
    case Objective::ProdMSE:
      return SchurClass::SchurConcave;
    case Objective::SumSINR:
    case Objective::ProdSINR:
      return SchurClass::Unclassified;
    case Objective::SumMSE:
    case Objective::MaxMSE:
    case Objective::HarmonicSINR:
    case Objective::MinSINR:
      return SchurClass::SchurConvex;
  }
  throw InvalidInputError("multiplicative_class: unknown objective");
}

double evaluate(Objective obj, const std::vector<double>& mses) {
  if (mses.empty()) throw InvalidInputError("evaluate: empty MSE list");
  for (double m : mses) {
    if (!(m > 0.0) || m > 1.0) {
      throw InvalidInputError("evaluate: MSEs must lie in (0, 1]");
    }
  }
  switch (obj) {
    case Objective::MutualInfo: {
      double s = 0;
      for (double m : mses) s += std::log(m);
      return s;
    }
    case Objective::ProdMSE: {
      double p = 1;
      for (double m : mses) p *= m;
      return p;
    }
    case Objective::SumSINR: {
      double s = 0;
      for (double m : mses) s += 1.0 / m - 1.0;
      return -s;
    }
    case Objective::ProdSINR: {
      double p = 1;
      for (double m : mses) p *= 1.0 / m - 1.0;
      return -p;
    }
    case Objective::SumMSE: {
      double s = 0;
      for (double m : mses) s += m;
      return s;
    }
    case Objective::MaxMSE:
      return *std::max_element(mses.begin(), mses.end());
    case Objective::HarmonicSINR: {
      double s = 0;
      for (double m : mses) {
        if (m >= 1.0) return std::numeric_limits<double>::infinity();
        s += m / (1.0 - m);
      }
      return s;
    }
    case Objective::MinSINR: {
      double worst = std::numeric_limits<double>::infinity();
      for (double m : mses) worst = std::min(worst, (1.0 - m) / m);
      return -worst;
    }
  }
  throw InvalidInputError("evaluate: unknown objective");
}

DesignBranch dispatch_class(Objective obj, bool nonlinear,
                            bool use_convex_for_summse) {
  if (!nonlinear) {
    const SchurClass c = additive_class(obj);
    if (c == SchurClass::SchurConvex) return DesignBranch::LinearConvex;
    if (c == SchurClass::Both) {
      return use_convex_for_summse ? DesignBranch::LinearConvex
                                   : DesignBranch::LinearConcave;
    }
    return DesignBranch::LinearConcave;
  }
  switch (multiplicative_class(obj)) {
    case SchurClass::SchurConvex:
      return DesignBranch::Dfe;
    case SchurClass::SchurConcave:
      return DesignBranch::LinearConcave;  // DFE brings no gain here
    default:
      throw InvalidInputError(
          "dispatch_class: objective has no multiplicative classification; "
          "nonlinear design rejected");
  }
}

const char* objective_name(Objective obj) {
  switch (obj) {
    case Objective::MutualInfo: return "MutualInfo";
    case Objective::ProdMSE: return "ProdMSE";
    case Objective::SumSINR: return "SumSINR";
    case Objective::ProdSINR: return "ProdSINR";
    case Objective::SumMSE: return "SumMSE";
    case Objective::MaxMSE: return "MaxMSE";
    case Objective::HarmonicSINR: return "HarmonicSINR";
    case Objective::MinSINR: return "MinSINR";
  }
  return "unknown";
}

Objective objective_from_name(const std::string& name) {
  for (Objective o : all_objectives()) {
    if (name == objective_name(o)) return o;
  }
  throw InvalidInputError("unknown objective name: " + name);
}

std::vector<Objective> all_objectives() {
  return {Objective::MutualInfo,   Objective::ProdMSE, Objective::SumSINR,
          Objective::ProdSINR,     Objective::SumMSE,  Objective::MaxMSE,
          Objective::HarmonicSINR, Objective::MinSINR};
}

}  // namespace relayopt
