#include <cmath>

#include "doctest.h"
#include "relayopt/design_linear.hpp"
#include "relayopt/rotations.hpp"

using namespace relayopt;

namespace {

Vec diag_mse(const TwoHopChannel& ch, const TransceiverDesign& d) {
  const CMat h_equiv = ch.h_rd * d.f * ch.h_sr;
  return mmse_matrix_cov(h_equiv, d.u,
                         noise_cov(ch.h_rd, d.f, ch.rho_1, ch.rho_2))
      .diagonal()
      .real();
}

double offdiag_mass(const CMat& m) {
  double v = 0;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (i != j) v = std::max(v, std::abs(m(i, j)));
    }
  }
  return v;
}

std::vector<double> to_std(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

TEST_CASE("conditional_waterfill structure") {
  // All gains equal: uniform split.
  Vec ones = Vec::Ones(3);
  const Vec q = conditional_waterfill(0.7 * ones, ones, ones, 0.5, 3.0,
                                      Objective::SumMSE);
  for (int i = 0; i < 3; ++i) CHECK(q(i) == doctest::Approx(1.0).epsilon(1e-9));

  // A stream with zero own gain gets nothing.
  Vec own(3);
  own << 1.0, 0.0, 2.0;
  const Vec q2 = conditional_waterfill(0.7 * ones, own, ones, 0.5, 3.0,
                                       Objective::SumMSE);
  CHECK(q2(1) == 0.0);
  CHECK(q2.sum() == doctest::Approx(3.0).epsilon(1e-9));

  // KKT stationarity of the SumMSE conditional update.
  Vec lsr(3), lrd(3), bfix(3);
  lsr << 2.0, 1.1, 0.6;
  lrd << 1.4, 0.9, 1.8;
  bfix << 0.8, 0.5, 0.7;
  const double rho = 0.3, budget = 2.0;
  const Vec a = conditional_waterfill(bfix, lsr, lrd, rho, budget,
                                      Objective::SumMSE);
  CHECK(a.sum() == doctest::Approx(budget).epsilon(1e-9));
  double ref = -1;
  for (int i = 0; i < 3; ++i) {
    if (a(i) <= 0) continue;
    const double grad = rho * lsr(i) * (bfix(i) * lrd(i)) /
                        (std::pow(a(i) * lsr(i) + rho, 2) *
                         (bfix(i) * lrd(i) + rho));
    if (ref < 0) {
      ref = grad;
    } else {
      CHECK(std::abs(grad - ref) <= 1e-8 * ref);
    }
  }
}

TEST_CASE("alternating_power_allocation basics") {
  // K = 1: everything in one iteration.
  PowerAllocation init{Vec::Constant(1, 0.5), Vec::Constant(1, 0.5), 2.0, 3.0};
  const PowerAllocation out = alternating_power_allocation(
      Vec::Constant(1, 1.3), Vec::Constant(1, 0.8), 0.4, 2.0, 3.0,
      Objective::SumMSE, init);
  CHECK(out.a(0) == doctest::Approx(2.0));
  CHECK(out.b(0) == doctest::Approx(3.0));

  // Monotone: the converged objective never exceeds the uniform-init value.
  Vec lsr(2), lrd(2);
  lsr << 2.0, 1.0;
  lrd << 1.5, 0.5;
  PowerAllocation uniform{Vec::Constant(2, 0.5), Vec::Constant(2, 0.5), 1.0,
                          1.0};
  const PowerAllocation res = alternating_power_allocation(
      lsr, lrd, 0.1, 1.0, 1.0, Objective::SumMSE, uniform);
  std::vector<double> m0(2), m1(2);
  for (int i = 0; i < 2; ++i) {
    m0[i] = stream_mse(0.5, 0.5, lsr(i), lrd(i), 0.1);
    m1[i] = stream_mse(res.a(i), res.b(i), lsr(i), lrd(i), 0.1);
  }
  CHECK(evaluate(Objective::SumMSE, m1) <= evaluate(Objective::SumMSE, m0));

  CHECK_THROWS_AS(
      alternating_power_allocation(
          lsr, lrd, 0.1, 1.0, 1.0, Objective::SumMSE,
          PowerAllocation{Vec::Constant(2, 5.0), Vec::Constant(2, 0.5), 1.0,
                          1.0}),
      InfeasibleError);
}

TEST_CASE("alternating allocation matches the grid oracle") {
  // Reference instance: lam_sr=(2,1), lam_rd=(1.5,0.5), rho=0.1, P_S=P_R=1.
  Vec lsr(2), lrd(2);
  lsr << 2.0, 1.0;
  lrd << 1.5, 0.5;
  const double rho = 0.1;
  PowerAllocation init{Vec::Constant(2, 0.5), Vec::Constant(2, 0.5), 1.0, 1.0};
  const PowerAllocation alt = alternating_power_allocation(
      lsr, lrd, rho, 1.0, 1.0, Objective::SumMSE, init);
  const PowerAllocation oracle =
      grid_oracle_p1(lsr, lrd, rho, 1.0, 1.0, Objective::SumMSE, 200);

  auto value = [&](const PowerAllocation& p) {
    std::vector<double> m(2);
    for (int i = 0; i < 2; ++i) {
      m[i] = stream_mse(p.a(i), p.b(i), lsr(i), lrd(i), rho);
    }
    return evaluate(Objective::SumMSE, m);
  };
  CHECK(std::abs(value(alt) - value(oracle)) <= 0.05 * std::abs(value(oracle)));
}

TEST_CASE("grid_oracle_p1 structure") {
  const PowerAllocation one = grid_oracle_p1(
      Vec::Constant(1, 2.0), Vec::Constant(1, 1.0), 0.2, 3.0, 4.0,
      Objective::SumMSE, 50);
  CHECK(one.a(0) == doctest::Approx(3.0));
  CHECK(one.b(0) == doctest::Approx(4.0));

  // Doubling the resolution never worsens the value (nested grids).
  Vec lsr(2), lrd(2);
  lsr << 1.7, 0.4;
  lrd << 0.9, 1.2;
  auto value = [&](const PowerAllocation& p) {
    std::vector<double> m(2);
    for (int i = 0; i < 2; ++i) {
      m[i] = stream_mse(p.a(i), p.b(i), lsr(i), lrd(i), 0.2);
    }
    return evaluate(Objective::MutualInfo, m);
  };
  const double v50 = value(
      grid_oracle_p1(lsr, lrd, 0.2, 1.0, 2.0, Objective::MutualInfo, 50));
  const double v100 = value(
      grid_oracle_p1(lsr, lrd, 0.2, 1.0, 2.0, Objective::MutualInfo, 100));
  CHECK(v100 <= v50 + 1e-12);

  CHECK_THROWS_AS(grid_oracle_p1(Vec::Ones(4), Vec::Ones(4), 0.1, 1, 1,
                                 Objective::SumMSE, 10),
                  InvalidInputError);
}

TEST_CASE("design_p1 closed-form structure") {
  Rng rng(101);
  // K = 1: all power to the only stream.
  {
    TwoHopChannel ch = random_two_hop(2, 2, 1, 0.5, 0.5, rng);
    const P1Solution sol = design_p1(ch, Objective::SumMSE, 2.0, 3.0);
    CHECK(sol.allocation.a(0) == doctest::Approx(2.0));
    CHECK(sol.allocation.b(0) == doctest::Approx(3.0));
  }

  for (int t = 0; t < 10; ++t) {
    TwoHopChannel ch = random_two_hop(3, 3, 2, 1.0, 1.0, rng);
    const double p_s = 10, p_r = 10;

    // Schur-concave branch: diagonalization and closed-form stream MSEs.
    const P1Solution con = design_p1(ch, Objective::MutualInfo, p_s, p_r);
    const CMat overall = con.design.g * ch.h_rd * con.design.f * ch.h_sr *
                         con.design.u;
    CHECK(offdiag_mass(overall) <= 1e-9);
    CHECK(con.design.u.squaredNorm() <= p_s + 1e-9);
    CHECK(relay_tx_power(con.design.f, ch.h_sr, con.design.u, 1.0) <=
          p_r + 1e-9);
    const TruncatedSvd sr = truncate_svd(svd_sorted(ch.h_sr), 2);
    const TruncatedSvd rd = truncate_svd(svd_sorted(ch.h_rd), 2);
    const Vec d = diag_mse(ch, con.design);
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(d(i) - stream_mse(con.allocation.a(i),
                                       con.allocation.b(i), sr.gains()(i),
                                       rd.gains()(i), 1.0)) <= 1e-9);
    }

    // Schur-convex branch: equal diagonal at the arithmetic mean.
    const P1Solution cvx = design_p1(ch, Objective::MaxMSE, p_s, p_r);
    const Vec dc = diag_mse(ch, cvx.design);
    CHECK(std::abs(dc(0) - dc(1)) <= 1e-10);
    Vec lam(2);
    for (int i = 0; i < 2; ++i) {
      lam(i) = stream_mse(cvx.allocation.a(i), cvx.allocation.b(i),
                          sr.gains()(i), rd.gains()(i), 1.0);
    }
    CHECK(cvx.objective_value == doctest::Approx(lam.mean()).epsilon(1e-8));

    // Objective recomputation invariant.
    CHECK(con.objective_value ==
          doctest::Approx(evaluate(Objective::MutualInfo, to_std(d)))
              .epsilon(1e-8));
  }

  CHECK_THROWS_AS(
      design_p1(TwoHopChannel{CMat::Zero(3, 3), CMat::Zero(3, 3), 1.0, 1.0, 2},
                Objective::SumMSE, 1.0, 1.0),
      DegenerateChannelError);
}

TEST_CASE("design_p1 beats NAF") {
  Rng rng(211);
  for (int t = 0; t < 100; ++t) {
    TwoHopChannel ch = random_two_hop(3, 3, 2, 1.0, 1.0, rng);
    const P1Solution sol = design_p1(ch, Objective::SumMSE, 10, 10);
    const TransceiverDesign naf = naf_design(ch, 10, 10);
    CHECK(relay_tx_power(naf.f, ch.h_sr, naf.u, 1.0) ==
          doctest::Approx(10.0).epsilon(1e-10));
    const double v_opt = diag_mse(ch, sol.design).sum();
    const double v_naf = diag_mse(ch, naf).sum();
    CHECK(v_opt <= v_naf + 1e-9);
  }
}

TEST_CASE("budget scaling never hurts") {
  Rng rng(31);
  for (int t = 0; t < 50; ++t) {
    TwoHopChannel ch = random_two_hop(3, 3, 2, 1.0, 1.0, rng);
    const double c = 1.0 + 2.0 * rng.uniform();
    const P1Solution base = design_p1(ch, Objective::SumMSE, 5, 5);
    const P1Solution more = design_p1(ch, Objective::SumMSE, 5 * c, 5 * c);
    CHECK(more.objective_value <= base.objective_value + 1e-9);
  }
}

TEST_CASE("SumMSE through either branch") {
  Rng rng(41);
  for (int t = 0; t < 5; ++t) {
    TwoHopChannel ch = random_two_hop(3, 3, 2, 1.0, 1.0, rng);
    const P1Solution concave = design_p1(ch, Objective::SumMSE, 8, 8);
    AllocOptions opts;
    opts.use_convex_for_summse = true;
    const P1Solution convex = design_p1(ch, Objective::SumMSE, 8, 8, opts);
    CHECK(std::abs(concave.objective_value - convex.objective_value) <= 1e-8);
  }
}

TEST_CASE("per_stream_min_power") {
  // Symmetric gains: equal split.
  {
    auto [a, b] = per_stream_min_power(0.4, 1.3, 1.3, 0.7);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
    CHECK(stream_mse(a, b, 1.3, 1.3, 0.7) == doctest::Approx(0.4).epsilon(1e-10));
  }
  // Loose target costs nothing.
  {
    auto [a, b] = per_stream_min_power(0.999999, 2.0, 1.0, 0.1);
    CHECK(a <= 1e-3);
    CHECK(b <= 1e-3);
  }
  // Dense 1-D sweep oracle on a fixed instance.
  {
    const double lsr = 2, lrd = 1, rho = 0.1, t = 0.5;
    auto [a, b] = per_stream_min_power(t, lsr, lrd, rho);
    const double mine = a + b;
    double best = 1e300;
    for (int i = 1; i <= 2000000; ++i) {
      const double x = 1.0 / t + i * 1e-5;  // x must exceed 1/t
      const double y = (x - 1) / (t * x - 1);
      if (y < 1) continue;
      const double cost = rho / lsr * (x - 1) + rho / lrd * (y - 1);
      best = std::min(best, cost);
    }
    CHECK(mine <= best + 1e-6);
    CHECK(stream_mse(a, b, lsr, lrd, rho) == doctest::Approx(t).epsilon(1e-10));
  }
  CHECK_THROWS_AS(per_stream_min_power(-0.1, 1, 1, 1), InvalidInputError);
}

TEST_CASE("design_p2 meets targets at near-oracle power") {
  Rng rng(53);
  // K = 1 closed form.
  {
    TwoHopChannel ch;
    ch.h_sr = CMat::Identity(1, 1);
    ch.h_rd = CMat::Identity(1, 1);
    ch.rho_1 = ch.rho_2 = 0.1;
    ch.num_streams = 1;
    const P2Solution sol = design_p2(ch, QoSTargets{Vec::Constant(1, 0.5)});
    auto [a, b] = per_stream_min_power(0.5, 1.0, 1.0, 0.1);
    CHECK(sol.total_power == doctest::Approx(a + b).epsilon(1e-9));
    CHECK(sol.achieved_mses(0) <= 0.5 + 1e-9);
  }

  for (int t = 0; t < 10; ++t) {
    TwoHopChannel ch = random_two_hop(3, 3, 2, 1.0, 1.0, rng);
    Vec eta(2);
    eta << 0.2 + 0.2 * rng.uniform(), 0.5 + 0.2 * rng.uniform();
    const P2Solution sol = design_p2(ch, QoSTargets{eta});
    CHECK((sol.achieved_mses.array() <= eta.array() + 1e-9).all());

    // Total power equals the P2 objective recomputed from the matrices.
    const double from_matrices =
        sol.design.u.squaredNorm() +
        relay_tx_power(sol.design.f, ch.h_sr, sol.design.u, 1.0);
    CHECK(from_matrices == doctest::Approx(sol.total_power).epsilon(1e-8));

    // Within 5% of the K=2 grid oracle.
    const TruncatedSvd sr = truncate_svd(svd_sorted(ch.h_sr), 2);
    const TruncatedSvd rd = truncate_svd(svd_sorted(ch.h_rd), 2);
    const double oracle =
        grid_oracle_p2(sr.gains(), rd.gains(), 1.0, eta, 400);
    CHECK(sol.total_power <= oracle * 1.05 + 1e-9);
  }

  CHECK_THROWS_AS(design_p2(random_two_hop(2, 2, 2, 1.0, 1.0, rng),
                            QoSTargets{Vec::Constant(2, 1.5)}),
                  InfeasibleError);
}

TEST_CASE("sa_design_p2 baseline") {
  Rng rng(67);
  // K = 1: identical to the rotation design.
  {
    TwoHopChannel ch = random_two_hop(2, 2, 1, 0.5, 0.5, rng);
    const P2Solution rc = design_p2(ch, QoSTargets{Vec::Constant(1, 0.4)});
    const P2Solution sa = sa_design_p2(ch, QoSTargets{Vec::Constant(1, 0.4)});
    CHECK(rc.total_power == doctest::Approx(sa.total_power).epsilon(1e-9));
  }
  int strict = 0;
  for (int t = 0; t < 20; ++t) {
    TwoHopChannel ch = random_two_hop(3, 3, 3, 1.0, 1.0, rng);
    const Vec eta = Vec::Constant(3, 0.4);
    const P2Solution rc = design_p2(ch, QoSTargets{eta});
    const P2Solution sa = sa_design_p2(ch, QoSTargets{eta});
    CHECK((sa.achieved_mses.array() <= eta.array() + 1e-9).all());
    for (int i = 0; i < 3; ++i) {
      CHECK(sa.achieved_mses(i) == doctest::Approx(0.4).epsilon(1e-7));
    }
    CHECK(rc.total_power <= sa.total_power * (1 + 1e-9));
    if (rc.total_power < sa.total_power * (1 - 1e-6)) ++strict;
  }
  CHECK(strict >= 18);  // equal targets with distinct gains: RC wins
}

TEST_CASE("distinct per-link noise variances") {
  Rng rng(97);
  TwoHopChannel ch = random_two_hop(3, 3, 2, 0.5, 2.0, rng);
  const P1Solution sol = design_p1(ch, Objective::SumMSE, 10, 10);
  const TruncatedSvd sr = truncate_svd(svd_sorted(ch.h_sr), 2);
  const TruncatedSvd rd = truncate_svd(svd_sorted(ch.h_rd), 2);
  const Vec d = diag_mse(ch, sol.design);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(d(i) - stream_mse2(sol.allocation.a(i), sol.allocation.b(i),
                                      sr.gains()(i), rd.gains()(i), 0.5,
                                      2.0)) <= 1e-9);
  }
  CHECK(relay_tx_power(sol.design.f, ch.h_sr, sol.design.u, 0.5) <= 10 + 1e-9);
}
