#include "relayopt/design_linear.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "relayopt/rotations.hpp"

namespace relayopt {

namespace {

constexpr double kDeadGain = 1e-300;
constexpr double kPrunePower = 1e-12;  // powers below this are zeroed exactly

double snr_to_t(double s) { return s / (1.0 + s); }

// Conditional stationary point s(mu) for one stream: gains g, other-hop
// factor c = prod_{j != i} t_j, price mu (all closed forms; the conditional
// subproblems are convex so KKT + multiplier bisection is exact).
double stationary_snr(AllocFamily family, double c, double g, double rho,
                      double mu) {
  const double gr = g / rho;
  switch (family) {
    case AllocFamily::SumMse: {
      const double v = std::sqrt(c * gr / mu) - 1.0;
      return std::max(0.0, v);
    }
    case AllocFamily::LogMse: {
      const double omc = std::max(1e-12, 1.0 - c);
      const double disc = c * c + 4.0 * omc * c * gr / mu;
      const double v = (-(2.0 - c) + std::sqrt(disc)) / (2.0 * omc);
      return std::max(0.0, v);
    }
    case AllocFamily::SumSinr: {
      const double omc = std::max(1e-12, 1.0 - c);
      const double v = (std::sqrt(c * gr / mu) - 1.0) / omc;
      return std::max(0.0, v);
    }
    case AllocFamily::ProdSinr: {
      const double omc = std::max(1e-12, 1.0 - c);
      const double v = (-1.0 + std::sqrt(1.0 + 4.0 * omc * gr / mu)) /
                       (2.0 * omc);
      return std::max(0.0, v);
    }
  }
  return 0.0;
}

double family_surrogate(AllocFamily family, const std::vector<double>& mses,
                        const std::vector<bool>& live) {
  double acc = 0.0;
  switch (family) {
    case AllocFamily::SumMse:
      for (size_t k = 0; k < mses.size(); ++k) acc += mses[k];
      return acc;
    case AllocFamily::LogMse:
      for (size_t k = 0; k < mses.size(); ++k) acc += std::log(mses[k]);
      return acc;
    case AllocFamily::SumSinr:
      for (size_t k = 0; k < mses.size(); ++k) acc -= 1.0 / mses[k] - 1.0;
      return acc;
    case AllocFamily::ProdSinr:
      // Gain-dead streams have zero SINR for any allocation; they are left
      // out so the surrogate stays finite.
      for (size_t k = 0; k < mses.size(); ++k) {
        if (!live[k]) continue;
        const double sinr = 1.0 / mses[k] - 1.0;
        acc -= std::log(std::max(sinr, 1e-300));
      }
      return acc;
  }
  return acc;
}

}  // namespace

AllocFamily alloc_family(Objective obj, DesignBranch branch) {
  if (branch == DesignBranch::LinearConvex) return AllocFamily::SumMse;
  if (branch == DesignBranch::Dfe) return AllocFamily::LogMse;
  switch (obj) {
    case Objective::SumMSE:
      return AllocFamily::SumMse;
    case Objective::MutualInfo:
    case Objective::ProdMSE:
      return AllocFamily::LogMse;
    case Objective::SumSINR:
      return AllocFamily::SumSinr;
    case Objective::ProdSINR:
      return AllocFamily::ProdSinr;
    default:
      // Additively Schur-convex objectives share the SumMse allocation.
      return AllocFamily::SumMse;
  }
}

Vec conditional_chain_waterfill(const Vec& c_other, const Vec& gains_own,
                                double rho_own, double budget,
                                AllocFamily family) {
  const int k = static_cast<int>(gains_own.size());
  if (c_other.size() != k) {
    throw DimensionError("conditional_chain_waterfill: size mismatch");
  }
  if (budget <= 0) {
    throw InvalidInputError("conditional_chain_waterfill: budget must be > 0");
  }
  Vec q = Vec::Zero(k);
  std::vector<int> live;
  for (int i = 0; i < k; ++i) {
    const double c = std::min(c_other(i), 1.0 - 1e-12);
    if (gains_own(i) > kDeadGain && c > 0) live.push_back(i);
  }
  if (live.empty()) return q;

  auto total_at = [&](double mu) {
    double tot = 0;
    for (int i : live) {
      const double c = std::min(c_other(i), 1.0 - 1e-12);
      const double s = stationary_snr(family, c, gains_own(i), rho_own, mu);
      tot += rho_own * s / gains_own(i);
    }
    return tot;
  };

  double lo = 1e-16, hi = 1e16;
  // This interval covers every sane instance; widen a few times before
  // giving up on pathological scales.
  for (int widen = 0; widen < 8 && total_at(lo) < budget; ++widen) lo *= 1e-4;
  for (int widen = 0; widen < 8 && total_at(hi) > budget; ++widen) hi *= 1e4;
  if (total_at(lo) < budget || total_at(hi) > budget) {
    throw NumericalError(
        "conditional_chain_waterfill: multiplier bisection could not bracket "
        "the budget (budget=" + std::to_string(budget) + ")");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);  // log-midpoint
    if (total_at(mid) > budget) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi / lo < 1.0 + 1e-14) break;
  }
  const double mu = std::sqrt(lo * hi);
  double tot = 0;
  for (int i : live) {
    const double c = std::min(c_other(i), 1.0 - 1e-12);
    const double s = stationary_snr(family, c, gains_own(i), rho_own, mu);
    q(i) = rho_own * s / gains_own(i);
    if (q(i) < kPrunePower) q(i) = 0.0;
    tot += q(i);
  }
  if (tot > 0) q *= budget / tot;  // land exactly on the budget
  return q;
}

ChainAllocation alternating_chain_allocation(
    const std::vector<Vec>& gains, const std::vector<double>& rhos,
    const std::vector<double>& budgets, AllocFamily family,
    const std::vector<Vec>& init, double rel_tol, int max_iters) {
  const size_t nhops = gains.size();
  if (nhops < 1 || rhos.size() != nhops || budgets.size() != nhops ||
      init.size() != nhops) {
    throw DimensionError("alternating_chain_allocation: inconsistent inputs");
  }
  const int k = static_cast<int>(gains[0].size());
  for (size_t i = 0; i < nhops; ++i) {
    if (gains[i].size() != k || init[i].size() != k) {
      throw DimensionError("alternating_chain_allocation: stream counts differ");
    }
    if (budgets[i] <= 0) {
      throw InvalidInputError("alternating_chain_allocation: budgets must be > 0");
    }
    if (init[i].minCoeff() < 0 || init[i].sum() > budgets[i] + 1e-9) {
      throw InfeasibleError("alternating_chain_allocation: infeasible init");
    }
  }

  std::vector<bool> live(k, true);
  for (int s = 0; s < k; ++s) {
    for (size_t i = 0; i < nhops; ++i) {
      if (gains[i](s) <= kDeadGain) live[s] = false;
    }
  }

  ChainAllocation out;
  out.powers = init;

  auto mses = [&]() {
    std::vector<double> m(k);
    std::vector<double> snrs(nhops);
    for (int s = 0; s < k; ++s) {
      for (size_t i = 0; i < nhops; ++i) {
        snrs[i] = out.powers[i](s) * gains[i](s) / rhos[i];
      }
      m[s] = chain_stream_mse(snrs);
    }
    return m;
  };

  double obj = family_surrogate(family, mses(), live);
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    const double prev = obj;
    for (size_t i = 0; i < nhops; ++i) {
      Vec c = Vec::Ones(k);
      for (size_t j = 0; j < nhops; ++j) {
        if (j == i) continue;
        for (int s = 0; s < k; ++s) {
          c(s) *= snr_to_t(out.powers[j](s) * gains[j](s) / rhos[j]);
        }
      }
      out.powers[i] =
          conditional_chain_waterfill(c, gains[i], rhos[i], budgets[i], family);
      const double next = family_surrogate(family, mses(), live);
      if (next > obj + 1e-10 * (1.0 + std::abs(obj))) {
        throw NumericalError(
            "alternating_chain_allocation: objective increased across a "
            "half-iteration");
      }
      obj = next;
    }
    if (std::abs(prev - obj) <= rel_tol * std::max(1e-300, std::abs(prev))) {
      out.converged = true;
      ++iter;
      break;
    }
  }
  out.iterations = iter;
  out.objective = obj;
  return out;
}

Vec conditional_waterfill(const Vec& fixed_other, const Vec& lams_own,
                          const Vec& lams_other, double rho, double budget,
                          Objective obj) {
  const int k = static_cast<int>(lams_own.size());
  if (fixed_other.size() != k || lams_other.size() != k) {
    throw DimensionError("conditional_waterfill: size mismatch");
  }
  Vec c(k);
  for (int i = 0; i < k; ++i) {
    c(i) = snr_to_t(fixed_other(i) * lams_other(i) / rho);
  }
  const AllocFamily family =
      alloc_family(obj, dispatch_class(obj, /*nonlinear=*/false));
  return conditional_chain_waterfill(c, lams_own, rho, budget, family);
}

PowerAllocation alternating_power_allocation(const Vec& lams_sr,
                                             const Vec& lams_rd, double rho,
                                             double p_s, double p_r,
                                             Objective obj,
                                             const PowerAllocation& init,
                                             const AllocOptions& opts) {
  const int k = static_cast<int>(lams_sr.size());
  if (lams_rd.size() != k || init.a.size() != k || init.b.size() != k) {
    throw DimensionError("alternating_power_allocation: size mismatch");
  }
  const DesignBranch branch =
      dispatch_class(obj, /*nonlinear=*/false, opts.use_convex_for_summse);
  const AllocFamily family = alloc_family(obj, branch);

  auto run = [&](const std::vector<Vec>& start) {
    return alternating_chain_allocation({lams_sr, lams_rd}, {rho, rho},
                                        {p_s, p_r}, family, start,
                                        opts.rel_tol, opts.max_iters);
  };

  ChainAllocation best = run({init.a, init.b});
  if (opts.random_restarts > 0) {
    Rng rng(opts.restart_seed);
    for (int r = 0; r < opts.random_restarts; ++r) {
      std::vector<Vec> start(2);
      for (int side = 0; side < 2; ++side) {
        Vec w(k);
        for (int i = 0; i < k; ++i) w(i) = -std::log(1e-12 + rng.uniform());
        w *= (side == 0 ? p_s : p_r) / w.sum();
        start[side] = w;
      }
      ChainAllocation cand = run(start);
      if (cand.objective < best.objective) best = cand;
    }
  }

  PowerAllocation out;
  out.a = best.powers[0];
  out.b = best.powers[1];
  out.p_s = p_s;
  out.p_r = p_r;
  return out;
}

PowerAllocation grid_oracle_p1(const Vec& lams_sr, const Vec& lams_rd,
                               double rho, double p_s, double p_r,
                               Objective obj, int resolution) {
  const int k = static_cast<int>(lams_sr.size());
  if (k > 3) throw InvalidInputError("grid_oracle_p1: K must be <= 3");
  if (resolution < 1) throw InvalidInputError("grid_oracle_p1: bad resolution");

  std::vector<Vec> weights;
  if (k == 1) {
    weights.push_back(Vec::Ones(1));
  } else if (k == 2) {
    for (int i = 0; i <= resolution; ++i) {
      Vec w(2);
      w << static_cast<double>(i) / resolution,
          static_cast<double>(resolution - i) / resolution;
      weights.push_back(w);
    }
  } else {
    for (int i = 0; i <= resolution; ++i) {
      for (int j = 0; j + i <= resolution; ++j) {
        Vec w(3);
        w << static_cast<double>(i) / resolution,
            static_cast<double>(j) / resolution,
            static_cast<double>(resolution - i - j) / resolution;
        weights.push_back(w);
      }
    }
  }

  double best = std::numeric_limits<double>::infinity();
  PowerAllocation out;
  out.p_s = p_s;
  out.p_r = p_r;
  std::vector<double> mses(k);
  for (const Vec& wa : weights) {
    for (const Vec& wb : weights) {
      for (int s = 0; s < k; ++s) {
        mses[s] = stream_mse(p_s * wa(s), p_r * wb(s), lams_sr(s), lams_rd(s),
                             rho);
      }
      const double val = evaluate(obj, mses);
      if (val < best) {
        best = val;
        out.a = p_s * wa;
        out.b = p_r * wb;
      }
    }
  }
  return out;
}

namespace {

struct StructuredDesign {
  TruncatedSvd sr;
  TruncatedSvd rd;
  Vec gains_sr;
  Vec gains_rd;
};

StructuredDesign decompose(const TwoHopChannel& ch) {
  const int k = ch.num_streams;
  if (k < 1 || k > std::min(ch.n_s(), ch.n_r())) {
    throw InvalidInputError("design: K must be in [1, min(N_S, N_R)]");
  }
  StructuredDesign sd;
  sd.sr = truncate_svd(svd_sorted(ch.h_sr), k);
  sd.rd = truncate_svd(svd_sorted(ch.h_rd), k);
  sd.gains_sr = sd.sr.gains();
  sd.gains_rd = sd.rd.gains();
  if (sd.gains_sr.maxCoeff() <= 0 || sd.gains_rd.maxCoeff() <= 0) {
    throw DegenerateChannelError("design: zero channel matrix");
  }
  return sd;
}

// U = V_sr Lambda_U^{1/2} S^H, F = V_rd Lambda_F^{1/2} Omega_sr^H with
// lambda_F,k = b_k / (a_k g_sr,k + rho_1).
TransceiverDesign assemble(const StructuredDesign& sd, const TwoHopChannel& ch,
                           const Vec& a, const Vec& b, const CMat* s_rot) {
  const int k = static_cast<int>(a.size());
  TransceiverDesign d;
  d.u = sd.sr.right * a.cwiseSqrt().asDiagonal();
  if (s_rot) {
    d.u = d.u * s_rot->adjoint();
    d.s_rotation = *s_rot;
  }
  Vec lam_f(k);
  for (int i = 0; i < k; ++i) {
    lam_f(i) = b(i) / (a(i) * sd.gains_sr(i) + ch.rho_1);
  }
  d.f = sd.rd.right * lam_f.cwiseSqrt().asDiagonal() * sd.sr.left.adjoint();
  const CMat h_equiv = ch.h_rd * d.f * ch.h_sr;
  d.g = wiener_receiver_cov(h_equiv, d.u,
                            noise_cov(ch.h_rd, d.f, ch.rho_1, ch.rho_2));
  return d;
}

std::vector<double> structured_mses(const StructuredDesign& sd,
                                    const TwoHopChannel& ch, const Vec& a,
                                    const Vec& b) {
  const int k = static_cast<int>(a.size());
  std::vector<double> m(k);
  for (int i = 0; i < k; ++i) {
    m[i] = stream_mse2(a(i), b(i), sd.gains_sr(i), sd.gains_rd(i), ch.rho_1,
                       ch.rho_2);
  }
  return m;
}

}  // namespace

P1Solution design_p1(const TwoHopChannel& channel, Objective obj, double p_s,
                     double p_r, const AllocOptions& opts) {
  if (p_s <= 0 || p_r <= 0) {
    throw InvalidInputError("design_p1: budgets must be positive");
  }
  const StructuredDesign sd = decompose(channel);
  const int k = channel.num_streams;
  const DesignBranch branch =
      dispatch_class(obj, /*nonlinear=*/false, opts.use_convex_for_summse);
  const AllocFamily family = alloc_family(obj, branch);

  auto run = [&](const std::vector<Vec>& start) {
    return alternating_chain_allocation(
        {sd.gains_sr, sd.gains_rd}, {channel.rho_1, channel.rho_2}, {p_s, p_r},
        family, start, opts.rel_tol, opts.max_iters);
  };
  ChainAllocation best = run({Vec::Constant(k, p_s / k), Vec::Constant(k, p_r / k)});
  if (opts.random_restarts > 0) {
    Rng rng(opts.restart_seed);
    for (int r = 0; r < opts.random_restarts; ++r) {
      std::vector<Vec> start(2);
      for (int side = 0; side < 2; ++side) {
        Vec w(k);
        for (int i = 0; i < k; ++i) w(i) = -std::log(1e-12 + rng.uniform());
        w *= (side == 0 ? p_s : p_r) / w.sum();
        start[side] = w;
      }
      ChainAllocation cand = run(start);
      if (cand.objective < best.objective) best = cand;
    }
  }

  const Vec& a = best.powers[0];
  const Vec& b = best.powers[1];

  P1Solution sol;
  if (branch == DesignBranch::LinearConvex) {
    const std::vector<double> lam = structured_mses(sd, channel, a, b);
    const Vec lam_vec = Eigen::Map<const Vec>(lam.data(), k);
    const RotationResult rot = mean_equalizing_rotation(lam_vec);
    sol.design = assemble(sd, channel, a, b, &rot.s);
  } else {
    sol.design = assemble(sd, channel, a, b, nullptr);
  }
  sol.allocation = PowerAllocation{a, b, p_s, p_r};
  sol.converged = best.converged;
  sol.iterations = best.iterations;

  const CMat h_equiv = channel.h_rd * sol.design.f * channel.h_sr;
  const CMat e = mmse_matrix_cov(
      h_equiv, sol.design.u,
      noise_cov(channel.h_rd, sol.design.f, channel.rho_1, channel.rho_2));
  std::vector<double> diag(k);
  for (int i = 0; i < k; ++i) diag[i] = std::min(1.0, e(i, i).real());
  sol.objective_value = evaluate(obj, diag);
  return sol;
}

TransceiverDesign naf_design(const TwoHopChannel& channel, double p_s,
                             double p_r) {
  if (p_s <= 0 || p_r <= 0) {
    throw InvalidInputError("naf_design: budgets must be positive");
  }
  const int k = channel.num_streams;
  const int n_s = channel.n_s();
  const int n_r = channel.n_r();
  TransceiverDesign d;
  d.u = std::sqrt(p_s / n_s) * CMat::Identity(n_s, k);
  const double denom =
      (channel.h_sr * d.u).squaredNorm() + channel.rho_1 * n_r;
  d.f = std::sqrt(p_r / denom) * CMat::Identity(n_r, n_r);
  const CMat h_equiv = channel.h_rd * d.f * channel.h_sr;
  d.g = wiener_receiver_cov(
      h_equiv, d.u, noise_cov(channel.h_rd, d.f, channel.rho_1, channel.rho_2));
  return d;
}

std::pair<double, double> per_stream_min_power(double t, double lam_sr,
                                               double lam_rd, double rho) {
  return per_stream_min_power2(t, lam_sr, lam_rd, rho, rho);
}

std::pair<double, double> per_stream_min_power2(double t, double lam_sr,
                                                double lam_rd, double rho_1,
                                                double rho_2) {
  if (!(t > 0.0) || t >= 1.0) {
    if (t >= 1.0) return {0.0, 0.0};  // no requirement
    throw InvalidInputError("per_stream_min_power: target must be in (0, 1)");
  }
  if (lam_sr <= 0 || lam_rd <= 0) {
    throw InvalidInputError("per_stream_min_power: gains must be positive");
  }
  const double c1 = rho_1 / lam_sr;
  const double c2 = rho_2 / lam_rd;
  // minimize c1 (x-1) + c2 (y-1) subject to (x+y-1)/(xy) = t.
  const double s = std::sqrt((c2 / c1) * (1.0 - t));
  const double x = (1.0 + s) / t;
  const double y = (x - 1.0) / (t * x - 1.0);
  return {c1 * (x - 1.0), c2 * (y - 1.0)};
}

namespace {

// Outer P2 search space: values v ascending with prefix sums bounded by the
// target prefix sums (identity domain for the additive problem, log domain
// for the multiplicative DFE variant). cost(k, v) must be decreasing in v.
struct P2Descent {
  Vec values;      // final point, ascending
  double power;    // sum of per-stream costs
};

P2Descent p2_coordinate_descent(
    const Vec& h, const std::vector<bool>& live, double vmax, double vfloor,
    const std::function<double(int, double)>& cost, const Vec& start) {
  const int k = static_cast<int>(h.size());
  Vec v = start;

  auto total = [&]() {
    double p = 0;
    for (int i = 0; i < k; ++i) p += cost(i, v(i));
    return p;
  };
  auto prefix_slack = [&](int j) {  // slack of constraint sum_{i<=j}
    double hv = 0, vv = 0;
    for (int i = 0; i <= j; ++i) {
      hv += h(i);
      vv += v(i);
    }
    return hv - vv;
  };
  // 1-D minimization by coarse scan plus golden-section refinement.
  auto minimize_1d = [](const std::function<double(double)>& f, double lo,
                        double hi) {
    const int n = 48;
    double best_x = lo, best_f = f(lo);
    for (int i = 1; i <= n; ++i) {
      const double x = lo + (hi - lo) * i / n;
      const double fx = f(x);
      if (fx < best_f) {
        best_f = fx;
        best_x = x;
      }
    }
    double a = std::max(lo, best_x - (hi - lo) / n);
    double b = std::min(hi, best_x + (hi - lo) / n);
    const double gr = 0.6180339887498949;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 80 && b - a > 1e-14 * (1.0 + std::abs(a)); ++it) {
      if (f1 < f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - gr * (b - a);
        f1 = f(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (b - a);
        f2 = f(x2);
      }
    }
    const double mid = 0.5 * (a + b);
    return std::pair<double, double>(mid, f(mid));
  };

  double power = total();
  for (int sweep = 0; sweep < 200; ++sweep) {
    bool improved = false;

    // Single-coordinate raises soak up any prefix slack (cost decreasing).
    for (int m = k - 1; m >= 0; --m) {
      if (!live[m]) continue;
      double room = (m + 1 < k) ? v(m + 1) - v(m) : vmax - v(m);
      for (int j = m; j < k; ++j) room = std::min(room, prefix_slack(j));
      room = std::min(room, vmax - v(m));
      if (room > 1e-13) {
        const double before = cost(m, v(m));
        v(m) += room;
        power += cost(m, v(m)) - before;
        improved = true;
      }
    }

    // Pairwise transfers between live coordinates.
    for (int i = 0; i < k; ++i) {
      if (!live[i]) continue;
      for (int j = i + 1; j < k; ++j) {
        if (!live[j]) continue;
        // Direction A: v_i down, v_j up (loosens prefixes in [i, j)).
        {
          double dmax = v(i) - vfloor;
          if (i > 0) dmax = std::min(dmax, v(i) - v(i - 1));
          double up = (j + 1 < k) ? v(j + 1) - v(j) : vmax - v(j);
          dmax = std::min(dmax, std::min(up, vmax - v(j)));
          if (dmax > 1e-13) {
            const double base = cost(i, v(i)) + cost(j, v(j));
            auto g = [&](double d) {
              return cost(i, v(i) - d) + cost(j, v(j) + d);
            };
            auto [d, gd] = minimize_1d(g, 0.0, dmax);
            if (gd < base - 1e-12 * (1.0 + std::abs(base))) {
              v(i) -= d;
              v(j) += d;
              power += gd - base;
              improved = true;
            }
          }
        }
        // Direction B: v_i up, v_j down (tightens prefixes in [i, j)).
        {
          double dmax = v(j) - vfloor;
          if (i + 1 < j) {
            dmax = std::min(dmax, v(i + 1) - v(i));
            dmax = std::min(dmax, v(j) - v(j - 1));
          } else {
            dmax = std::min(dmax, 0.5 * (v(j) - v(i)));
          }
          for (int m = i; m < j; ++m) dmax = std::min(dmax, prefix_slack(m));
          dmax = std::min(dmax, vmax - v(i));
          if (dmax > 1e-13) {
            const double base = cost(i, v(i)) + cost(j, v(j));
            auto g = [&](double d) {
              return cost(i, v(i) + d) + cost(j, v(j) - d);
            };
            auto [d, gd] = minimize_1d(g, 0.0, dmax);
            if (gd < base - 1e-12 * (1.0 + std::abs(base))) {
              v(i) += d;
              v(j) -= d;
              power += gd - base;
              improved = true;
            }
          }
        }
      }
    }
    if (!improved) break;
  }
  return P2Descent{v, total()};
}

}  // namespace

// Shared outer solve. When log_domain is set the prefix constraints act on
// log(lambda) (multiplicative majorization, DFE variant).
P2EigenSearch p2_eigen_search(const Vec& gains_sr, const Vec& gains_rd,
                              double rho_1, double rho_2, const Vec& eta_asc,
                              bool log_domain, const Vec* extra_start) {
  const int k = static_cast<int>(eta_asc.size());
  std::vector<bool> live(k, true);
  for (int i = 0; i < k; ++i) {
    if (gains_sr(i) <= kDeadGain || gains_rd(i) <= kDeadGain) live[i] = false;
  }

  auto to_domain = [&](double lam) {
    return log_domain ? std::log(lam) : lam;
  };
  auto from_domain = [&](double v) {
    return log_domain ? std::exp(v) : v;
  };

  Vec h(k);
  for (int i = 0; i < k; ++i) h(i) = to_domain(eta_asc(i));
  const double vmax = to_domain(1.0);
  const double vfloor = to_domain(1e-9);

  auto cost = [&](int i, double v) {
    if (!live[i]) return 0.0;
    const double lam = std::min(1.0, from_domain(v));
    if (lam >= 1.0) return 0.0;
    auto [pa, pb] =
        per_stream_min_power2(lam, gains_sr(i), gains_rd(i), rho_1, rho_2);
    return pa + pb;
  };

  // Feasible start: the targets themselves. Dead eigenchannels are pinned at
  // MSE one (domain value vmax); live starts are shifted down uniformly until
  // every prefix constraint holds. In both domains the constraint is linear,
  // so a uniform shift g <= 0 on live coordinates works:
  //   #live_j * g <= prefix_h_j - prefix_start0_j  for all j.
  Vec start(k);
  {
    for (int i = 0; i < k; ++i) start(i) = live[i] ? h(i) : vmax;
    double shift = 0.0;
    double hsum = 0, ssum = 0;
    int nlive = 0;
    for (int j = 0; j < k; ++j) {
      hsum += h(j);
      ssum += start(j);
      if (live[j]) ++nlive;
      if (ssum - hsum > 1e-15 && nlive == 0) {
        throw InfeasibleError("design_p2: dead eigenchannels exceed targets");
      }
      if (nlive > 0) shift = std::min(shift, (hsum - ssum) / nlive);
    }
    for (int i = 0; i < k; ++i) {
      if (live[i]) start(i) = std::max(vfloor, start(i) + shift);
    }
    // Keep ascending order (dead channels sit at MSE one, the maximum).
    for (int i = 1; i < k; ++i) start(i) = std::max(start(i), start(i - 1));
  }

  P2Descent best = p2_coordinate_descent(h, live, vmax, vfloor, cost, start);
  if (extra_start) {
    Vec s2(k);
    for (int i = 0; i < k; ++i) s2(i) = to_domain(std::min(1.0, (*extra_start)(i)));
    // Only usable if feasible in this domain.
    bool ok = true;
    double hs = 0, vs = 0;
    for (int i = 0; i < k; ++i) {
      hs += h(i);
      vs += s2(i);
      if (vs > hs + 1e-12) ok = false;
      if (i > 0 && s2(i) < s2(i - 1) - 1e-12) ok = false;
    }
    if (ok) {
      P2Descent cand = p2_coordinate_descent(h, live, vmax, vfloor, cost, s2);
      if (cand.power < best.power) best = cand;
    }
  }

  P2EigenSearch out;
  out.lambda = Vec(k);
  out.a = Vec::Zero(k);
  out.b = Vec::Zero(k);
  out.total_power = 0;
  for (int i = 0; i < k; ++i) {
    out.lambda(i) = std::min(1.0, from_domain(best.values(i)));
    if (live[i] && out.lambda(i) < 1.0) {
      auto [pa, pb] = per_stream_min_power2(out.lambda(i), gains_sr(i),
                                            gains_rd(i), rho_1, rho_2);
      out.a(i) = pa;
      out.b(i) = pb;
      out.total_power += pa + pb;
    } else {
      out.lambda(i) = 1.0;
    }
  }
  return out;
}

namespace {

void check_targets(const Vec& eta) {
  for (int i = 0; i < eta.size(); ++i) {
    if (!(eta(i) > 0.0) || eta(i) >= 1.0) {
      throw InfeasibleError("QoS targets must lie strictly inside (0, 1)");
    }
  }
}

Vec sort_ascending_perm(const Vec& v, std::vector<int>& perm) {
  const int k = static_cast<int>(v.size());
  perm.resize(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](int a, int b) { return v(a) < v(b); });
  Vec out(k);
  for (int i = 0; i < k; ++i) out(i) = v(perm[i]);
  return out;
}

}  // namespace

P2Solution design_p2(const TwoHopChannel& channel, const QoSTargets& targets) {
  check_targets(targets.eta);
  const StructuredDesign sd = decompose(channel);
  const int k = channel.num_streams;
  if (targets.eta.size() != k) {
    throw DimensionError("design_p2: targets size must equal K");
  }

  std::vector<int> perm;
  const Vec eta_asc = sort_ascending_perm(targets.eta, perm);
  const P2EigenSearch outer =
      p2_eigen_search(sd.gains_sr, sd.gains_rd, channel.rho_1, channel.rho_2,
                      eta_asc, /*log_domain=*/false, nullptr);

  // Rotation target: the caller's per-stream ceilings, reduced by any
  // leftover trace slack so the Schur-Horn trace condition holds exactly.
  const double slack = eta_asc.sum() - outer.lambda.sum();
  Vec d = targets.eta;
  if (slack > 1e-12 * k) {
    d.array() -= slack / k;
  }
  RotationResult rot = [&]() {
    try {
      return schur_horn_rotation(outer.lambda, d);
    } catch (const InfeasibleError&) {
      // Proportional fallback for awkward slack geometry.
      Vec d2 = targets.eta * (outer.lambda.sum() / eta_asc.sum());
      return schur_horn_rotation(outer.lambda, d2);
    }
  }();

  P2Solution sol;
  sol.design = assemble(sd, channel, outer.a, outer.b, &rot.s);
  sol.allocation = PowerAllocation{outer.a, outer.b, outer.a.sum(), outer.b.sum()};
  sol.total_power = outer.total_power;

  const CMat h_equiv = channel.h_rd * sol.design.f * channel.h_sr;
  const CMat e = mmse_matrix_cov(
      h_equiv, sol.design.u,
      noise_cov(channel.h_rd, sol.design.f, channel.rho_1, channel.rho_2));
  sol.achieved_mses = e.diagonal().real();
  return sol;
}

P2Solution sa_design_p2(const TwoHopChannel& channel,
                        const QoSTargets& targets) {
  check_targets(targets.eta);
  const StructuredDesign sd = decompose(channel);
  const int k = channel.num_streams;
  if (targets.eta.size() != k) {
    throw DimensionError("sa_design_p2: targets size must equal K");
  }

  std::vector<int> perm;
  const Vec eta_asc = sort_ascending_perm(targets.eta, perm);
  Vec a(k), b(k);
  double total = 0;
  for (int i = 0; i < k; ++i) {
    if (sd.gains_sr(i) <= kDeadGain || sd.gains_rd(i) <= kDeadGain) {
      throw InfeasibleError("sa_design_p2: dead eigenchannel cannot meet a "
                            "target below one");
    }
    auto [pa, pb] = per_stream_min_power2(eta_asc(i), sd.gains_sr(i),
                                          sd.gains_rd(i), channel.rho_1,
                                          channel.rho_2);
    a(i) = pa;
    b(i) = pb;
    total += pa + pb;
  }

  // No equalizing rotation; a permutation restores the caller's stream
  // order so stream i meets eta_i exactly.
  CMat p = CMat::Zero(k, k);
  for (int i = 0; i < k; ++i) p(perm[i], i) = 1.0;

  P2Solution sol;
  sol.design = assemble(sd, channel, a, b, &p);
  sol.allocation = PowerAllocation{a, b, a.sum(), b.sum()};
  sol.total_power = total;
  const CMat h_equiv = channel.h_rd * sol.design.f * channel.h_sr;
  const CMat e = mmse_matrix_cov(
      h_equiv, sol.design.u,
      noise_cov(channel.h_rd, sol.design.f, channel.rho_1, channel.rho_2));
  sol.achieved_mses = e.diagonal().real();
  return sol;
}

double grid_oracle_p2(const Vec& lams_sr, const Vec& lams_rd, double rho,
                      const Vec& eta, int resolution) {
  const int k = static_cast<int>(eta.size());
  if (k > 3) throw InvalidInputError("grid_oracle_p2: K must be <= 3");
  Vec eta_asc = eta;
  std::sort(eta_asc.data(), eta_asc.data() + k);

  auto power_of = [&](const Vec& lam) {
    double p = 0;
    for (int i = 0; i < k; ++i) {
      if (lam(i) >= 1.0) continue;
      auto [pa, pb] =
          per_stream_min_power2(lam(i), lams_sr(i), lams_rd(i), rho, rho);
      p += pa + pb;
    }
    return p;
  };

  double best = std::numeric_limits<double>::infinity();
  if (k == 1) return power_of(eta_asc);
  const double h1 = eta_asc(0);
  const double h12 = eta_asc(0) + eta_asc(1);
  if (k == 2) {
    for (int i = 1; i <= resolution; ++i) {
      Vec lam(2);
      lam(0) = h1 * i / resolution;
      const double top = std::min(1.0, h12 - lam(0));
      if (top < lam(0)) continue;
      for (int j = 0; j <= resolution; ++j) {
        lam(1) = lam(0) + (top - lam(0)) * j / resolution;
        best = std::min(best, power_of(lam));
      }
    }
    return best;
  }
  const double h123 = h12 + eta_asc(2);
  for (int i = 1; i <= resolution; ++i) {
    Vec lam(3);
    lam(0) = h1 * i / resolution;
    const double top1 = std::min(1.0, h12 - lam(0));
    if (top1 < lam(0)) continue;
    for (int j = 0; j <= resolution; ++j) {
      lam(1) = lam(0) + (top1 - lam(0)) * j / resolution;
      const double top2 = std::min(1.0, h123 - lam(0) - lam(1));
      if (top2 < lam(1)) continue;
      for (int l = 0; l <= resolution; ++l) {
        lam(2) = lam(1) + (top2 - lam(1)) * l / resolution;
        best = std::min(best, power_of(lam));
      }
    }
  }
  return best;
}

}  // namespace relayopt
