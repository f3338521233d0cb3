#include <cmath>

#include "doctest.h"
#include "relayopt/design_extended.hpp"

using namespace relayopt;

namespace {

RobustChannelState random_state(int n_s, int n_r, double eps, Rng& rng) {
  RobustChannelState st;
  st.h_sr_hat = rayleigh_channel(n_r, n_s, rng);
  st.h_rd_hat = rayleigh_channel(n_s, n_r, rng);
  st.err_sr.sigma_row = eps * CMat::Identity(n_r, n_r);
  st.err_sr.psi_col = CMat::Identity(n_s, n_s);
  st.err_rd.sigma_row = eps * CMat::Identity(n_s, n_s);
  st.err_rd.psi_col = CMat::Identity(n_r, n_r);
  return st;
}

}  // namespace

TEST_CASE("averaged_mse reductions and Monte Carlo check") {
  Rng rng(3);
  const int n = 3, k = 2;
  RobustChannelState st = random_state(n, n, 0.0, rng);
  const CMat u = rayleigh_channel(n, k, rng);
  const CMat f = rayleigh_channel(n, n, rng);
  const double rho = 0.4;

  // Zero covariances: identical to the nominal MSE matrix.
  {
    const CMat h = st.h_rd_hat * f * st.h_sr_hat;
    const CMat r_n = effective_noise_cov(st.h_rd_hat, f);
    const CMat g = wiener_receiver(h, u, r_n, rho);
    const CMat nominal = mse_matrix(g, h, u, r_n, rho);
    const CMat avg = averaged_mse(st, u, f, g, rho);
    CHECK((avg - nominal).cwiseAbs().maxCoeff() <= 1e-12);
    // U = 0, F = 0 gives the identity.
    const CMat e0 = averaged_mse(st, CMat::Zero(n, k), CMat::Zero(n, n),
                                 CMat::Zero(k, n), rho);
    CHECK((e0 - CMat::Identity(k, k)).cwiseAbs().maxCoeff() <= 1e-12);
  }

  // Sampling oracle at eps = 0.1.
  {
    RobustChannelState st2 = random_state(n, n, 0.1, rng);
    const CMat g = robust_wiener(st2, u, f, rho);
    const CMat avg = averaged_mse(st2, u, f, g, rho);
    const int draws = 10000;
    Rng mc(71);
    Vec acc = Vec::Zero(k), acc2 = Vec::Zero(k);
    for (int t = 0; t < draws; ++t) {
      const CMat hsr = st2.h_sr_hat + kron_error_sample(st2.err_sr, n, n, mc);
      const CMat hrd = st2.h_rd_hat + kron_error_sample(st2.err_rd, n, n, mc);
      const CMat h = hrd * f * hsr;
      const CMat r_n = effective_noise_cov(hrd, f);
      const CMat e = mse_matrix(g, h, u, r_n, rho);
      for (int i = 0; i < k; ++i) {
        acc(i) += e(i, i).real();
        acc2(i) += e(i, i).real() * e(i, i).real();
      }
    }
    for (int i = 0; i < k; ++i) {
      const double mean = acc(i) / draws;
      const double se =
          std::sqrt(std::max(0.0, acc2(i) / draws - mean * mean) / draws);
      CHECK(std::abs(mean - avg(i, i).real()) <= 3 * se + 1e-12);
    }
  }
}

TEST_CASE("robust_wiener optimality") {
  Rng rng(11);
  const int n = 3, k = 2;
  // Scalar closed form with alpha and beta expanded by hand.
  {
    RobustChannelState st;
    st.h_sr_hat = CMat::Constant(1, 1, Cx(2.0, 0));
    st.h_rd_hat = CMat::Constant(1, 1, Cx(1.5, 0));
    st.err_sr.sigma_row = CMat::Constant(1, 1, Cx(0.2, 0));
    st.err_sr.psi_col = CMat::Constant(1, 1, Cx(0.7, 0));
    st.err_rd.sigma_row = CMat::Constant(1, 1, Cx(0.3, 0));
    st.err_rd.psi_col = CMat::Constant(1, 1, Cx(0.6, 0));
    const double p = 1.8, c = 0.9, rho = 0.25;
    const CMat u = CMat::Constant(1, 1, Cx(std::sqrt(p), 0));
    const CMat f = CMat::Constant(1, 1, Cx(c, 0));
    const double alpha = p * 0.7;
    const double m = 4.0 * p + alpha * 0.2 + rho;
    const double beta = c * c * m * 0.6;
    const double a = 1.5 * 1.5 * c * c * m + beta * 0.3 + rho;
    const double g_expect = std::sqrt(p) * 2.0 * 1.5 * c / a;
    const CMat g = robust_wiener(st, u, f, rho);
    CHECK(g(0, 0).real() == doctest::Approx(g_expect).epsilon(1e-12));
  }
  // Paired comparison: the robust receiver never loses to the naive Wiener
  // on the averaged MSE diagonal.
  for (int t = 0; t < 50; ++t) {
    RobustChannelState st = random_state(n, n, 0.05 + 0.1 * rng.uniform(), rng);
    const CMat u = rayleigh_channel(n, k, rng);
    const CMat f = rayleigh_channel(n, n, rng);
    const double rho = 0.3;
    const CMat g_rob = robust_wiener(st, u, f, rho);
    const CMat h = st.h_rd_hat * f * st.h_sr_hat;
    const CMat g_naive =
        wiener_receiver(h, u, effective_noise_cov(st.h_rd_hat, f), rho);
    const CMat e_rob = averaged_mse(st, u, f, g_rob, rho);
    const CMat e_nai = averaged_mse(st, u, f, g_naive, rho);
    for (int i = 0; i < k; ++i) {
      CHECK(e_rob(i, i).real() <= e_nai(i, i).real() + 1e-10);
    }
  }
}

TEST_CASE("robust_design_p1") {
  Rng rng(29);
  // eps -> 0 recovers the nominal design.
  {
    RobustChannelState st = random_state(3, 3, 1e-10, rng);
    TwoHopChannel ch{st.h_sr_hat, st.h_rd_hat, 0.5, 0.5, 2};
    const P1Solution rob =
        robust_design_p1(st, Objective::SumMSE, 8, 8, 0.5, 2);
    const P1Solution nom = design_p1(ch, Objective::SumMSE, 8, 8);
    CHECK((rob.design.u - nom.design.u).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((rob.design.f - nom.design.f).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((rob.design.g - nom.design.g).cwiseAbs().maxCoeff() <= 1e-6);
  }
  // eps = 0.1: robust beats estimate-as-truth on the averaged objective and
  // the robust relay constraint holds.
  int wins = 0;
  for (int t = 0; t < 20; ++t) {
    RobustChannelState st = random_state(3, 3, 0.1, rng);
    TwoHopChannel ch{st.h_sr_hat, st.h_rd_hat, 1.0, 1.0, 2};
    const P1Solution rob = robust_design_p1(st, Objective::SumMSE, 10, 10,
                                            1.0, 2);
    const P1Solution nai = design_p1(ch, Objective::SumMSE, 10, 10);

    const double alpha =
        (rob.design.u * rob.design.u.adjoint() * st.err_sr.psi_col)
            .diagonal()
            .real()
            .sum();
    const CMat hsu = st.h_sr_hat * rob.design.u;
    const CMat m = hsu * hsu.adjoint() + alpha * st.err_sr.sigma_row +
                   1.0 * CMat::Identity(3, 3);
    const double relay_power =
        (rob.design.f * m * rob.design.f.adjoint()).diagonal().real().sum();
    CHECK(relay_power <= 10 + 1e-9);

    const double v_rob =
        averaged_mse(st, rob.design.u, rob.design.f, rob.design.g, 1.0)
            .diagonal()
            .real()
            .sum();
    const double v_nai =
        averaged_mse(st, nai.design.u, nai.design.f, nai.design.g, 1.0)
            .diagonal()
            .real()
            .sum();
    if (v_rob <= v_nai + 1e-12) ++wins;
  }
  CHECK(wins >= 18);

  // Non-identity row covariance is rejected.
  {
    RobustChannelState st = random_state(3, 3, 0.1, rng);
    st.err_sr.sigma_row(0, 1) = Cx(0.05, 0.0);
    st.err_sr.sigma_row(1, 0) = Cx(0.05, 0.0);
    CHECK_THROWS_AS(robust_design_p1(st, Objective::SumMSE, 8, 8, 1.0, 2),
                    InvalidInputError);
  }
}

TEST_CASE("multihop_design reductions and structure") {
  Rng rng(37);
  // L = 2 is bit-identical to design_p1.
  {
    TwoHopChannel two = random_two_hop(3, 3, 2, 0.8, 0.8, rng);
    MultiHopChannel mh;
    mh.hops = {two.h_sr, two.h_rd};
    mh.rhos = {0.8, 0.8};
    mh.budgets = {6.0, 7.0};
    mh.num_streams = 2;
    const MultiHopSolution sol = multihop_design(mh, Objective::SumMSE);
    const P1Solution p1 = design_p1(two, Objective::SumMSE, 6.0, 7.0);
    CHECK((sol.node_matrices[0] - p1.design.u).cwiseAbs().maxCoeff() == 0.0);
    CHECK((sol.node_matrices[1] - p1.design.f).cwiseAbs().maxCoeff() == 0.0);
    CHECK((sol.g - p1.design.g).cwiseAbs().maxCoeff() == 0.0);
  }
  // Chain formula equals the two-hop closed form.
  {
    const double a = 0.9, b = 1.7, g1 = 2.1, g2 = 0.6, rho = 0.33;
    CHECK(chain_stream_mse({a * g1 / rho, b * g2 / rho}) ==
          doctest::Approx(stream_mse(a, b, g1, g2, rho)).epsilon(1e-14));
  }
  // L = 3: structure, budgets, and the per-stream MSE identity.
  for (int t = 0; t < 5; ++t) {
    MultiHopChannel mh;
    mh.num_streams = 2;
    mh.hops = {rayleigh_channel(3, 3, rng), rayleigh_channel(3, 3, rng),
               rayleigh_channel(3, 3, rng)};
    mh.rhos = {1.0, 1.0, 1.0};
    mh.budgets = {8.0, 9.0, 10.0};
    const MultiHopSolution sol = multihop_design(mh, Objective::SumMSE);

    // Node powers from the matrices respect the budgets.
    CMat cov = sol.node_matrices[0] * sol.node_matrices[0].adjoint();
    CHECK(cov.diagonal().real().sum() <= mh.budgets[0] + 1e-9);
    for (int i = 1; i < 3; ++i) {
      const CMat rx = mh.hops[i - 1] * cov * mh.hops[i - 1].adjoint() +
                      mh.rhos[i - 1] * CMat::Identity(3, 3);
      cov = sol.node_matrices[i] * rx * sol.node_matrices[i].adjoint();
      CHECK(cov.diagonal().real().sum() <= mh.budgets[i] + 1e-9);
    }

    // Matrix-level per-stream MSEs match the chain formula values.
    CMat h_eq = sol.node_matrices[0];
    for (int i = 1; i < 3; ++i) {
      h_eq = sol.node_matrices[i] * (mh.hops[i - 1] * h_eq);
    }
    h_eq = mh.hops[2] * h_eq;
    CMat c_n = CMat::Zero(3, 3);
    {
      CMat t1 = mh.hops[2] * (sol.node_matrices[2] * (mh.hops[1] *
                 sol.node_matrices[1]));
      c_n += 1.0 * (t1 * t1.adjoint());
      CMat t2 = mh.hops[2] * sol.node_matrices[2];
      c_n += 1.0 * (t2 * t2.adjoint());
      c_n += 1.0 * CMat::Identity(3, 3);
    }
    const Vec diag =
        mmse_matrix_cov(h_eq, CMat::Identity(2, 2), c_n).diagonal().real();
    for (int s = 0; s < 2; ++s) {
      CHECK(std::abs(diag(s) - sol.stream_mses(s)) <= 1e-9);
    }

    // L = 3, K = 1: full budgets ("3-D grid" over single-stream powers).
    MultiHopChannel k1 = mh;
    k1.num_streams = 1;
    const MultiHopSolution s1 = multihop_design(k1, Objective::SumMSE);
    for (int i = 0; i < 3; ++i) {
      CHECK(s1.node_powers[i](0) == doctest::Approx(k1.budgets[i]).epsilon(1e-9));
    }
  }
  // Broken chains and dead hops are rejected.
  {
    MultiHopChannel mh;
    mh.num_streams = 1;
    mh.hops = {CMat::Identity(3, 3), CMat::Zero(3, 3)};
    mh.rhos = {1.0, 1.0};
    mh.budgets = {1.0, 1.0};
    CHECK_THROWS_AS(multihop_design(mh, Objective::SumMSE),
                    DegenerateChannelError);
    MultiHopChannel bad;
    bad.num_streams = 1;
    bad.hops = {CMat::Identity(3, 3), CMat::Identity(4, 4)};
    bad.rhos = {1.0, 1.0};
    bad.budgets = {1.0, 1.0};
    CHECK_THROWS_AS(multihop_design(bad, Objective::SumMSE), DimensionError);
  }
}

TEST_CASE("multihop convex branch equalizes the diagonal") {
  Rng rng(43);
  MultiHopChannel mh;
  mh.num_streams = 2;
  mh.hops = {rayleigh_channel(3, 3, rng), rayleigh_channel(3, 3, rng),
             rayleigh_channel(3, 3, rng)};
  mh.rhos = {1.0, 1.0, 1.0};
  mh.budgets = {8.0, 8.0, 8.0};
  const MultiHopSolution sol = multihop_design(mh, Objective::MaxMSE);
  CMat h_eq = sol.node_matrices[0];
  for (int i = 1; i < 3; ++i) h_eq = sol.node_matrices[i] * (mh.hops[i - 1] * h_eq);
  h_eq = mh.hops[2] * h_eq;
  CMat t1 = mh.hops[2] * (sol.node_matrices[2] * (mh.hops[1] * sol.node_matrices[1]));
  CMat t2 = mh.hops[2] * sol.node_matrices[2];
  const CMat c_n = t1 * t1.adjoint() + t2 * t2.adjoint() + CMat::Identity(3, 3);
  const Vec diag =
      mmse_matrix_cov(h_eq, CMat::Identity(2, 2), c_n).diagonal().real();
  CHECK(std::abs(diag(0) - diag(1)) <= 1e-9);
}

TEST_CASE("multirelay_design") {
  Rng rng(47);
  // Q = 1 reduces to the single-relay SumMSE design.
  {
    MultiRelayChannel mr;
    mr.num_streams = 2;
    mr.rho_1 = mr.rho_2 = 1.0;
    mr.h_sr_q = {rayleigh_channel(3, 3, rng)};
    mr.h_rq_d = {rayleigh_channel(3, 3, rng)};
    const MultiRelaySolution sol = multirelay_design(mr, 10, 10);
    TwoHopChannel two{mr.h_sr_q[0], mr.h_rq_d[0], 1.0, 1.0, 2};
    const P1Solution p1 = design_p1(two, Objective::SumMSE, 10, 10);
    CHECK((sol.design.u - p1.design.u).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((sol.design.f - p1.design.f).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((sol.design.g - p1.design.g).cwiseAbs().maxCoeff() <= 1e-9);
  }
  // Q = 2 with identical relays: symmetric blocks, exact block zeros.
  {
    MultiRelayChannel mr;
    mr.num_streams = 2;
    mr.rho_1 = mr.rho_2 = 1.0;
    const CMat hsr = rayleigh_channel(2, 3, rng);
    const CMat hrd = rayleigh_channel(3, 2, rng);
    mr.h_sr_q = {hsr, hsr};
    mr.h_rq_d = {hrd, hrd};
    const MultiRelaySolution sol = multirelay_design(mr, 10, 10);
    const CMat b00 = sol.design.f.block(0, 0, 2, 2);
    const CMat b11 = sol.design.f.block(2, 2, 2, 2);
    CHECK((b00 - b11).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(sol.design.f.block(0, 2, 2, 2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(sol.design.f.block(2, 0, 2, 2).cwiseAbs().maxCoeff() == 0.0);
  }
  // Random Q = 3: block structure, exact power, honest sum MSE.
  {
    MultiRelayChannel mr;
    mr.num_streams = 3;
    mr.rho_1 = mr.rho_2 = 1.0;
    for (int i = 0; i < 3; ++i) {
      mr.h_sr_q.push_back(rayleigh_channel(3, 3, rng));
      mr.h_rq_d.push_back(rayleigh_channel(3, 3, rng));
    }
    const MultiRelaySolution sol = multirelay_design(mr, 10, 100);
    CHECK(relay_tx_power(sol.design.f, mr.stacked_h_sr(), sol.design.u, 1.0) ==
          doctest::Approx(100.0).epsilon(1e-9));
    for (int bi = 0; bi < 3; ++bi) {
      for (int bj = 0; bj < 3; ++bj) {
        if (bi != bj) {
          CHECK(sol.design.f.block(bi * 3, bj * 3, 3, 3).cwiseAbs().maxCoeff() ==
                0.0);
        }
      }
    }
    CHECK(sol.sum_mse > 0);
    CHECK(sol.sum_mse <= 3.0 + 1e-9);
    CHECK(sol.fit_residual >= 0);
  }
  // Inconsistent per-relay dimensions are rejected.
  {
    MultiRelayChannel bad;
    bad.num_streams = 1;
    bad.h_sr_q = {rayleigh_channel(2, 3, rng), rayleigh_channel(3, 3, rng)};
    bad.h_rq_d = {rayleigh_channel(3, 2, rng), rayleigh_channel(3, 3, rng)};
    CHECK_THROWS_AS(multirelay_design(bad, 1.0, 1.0), DimensionError);
  }
}

TEST_CASE("averaged_mse converges to the nominal matrix as eps shrinks") {
  Rng rng(83);
  RobustChannelState st = random_state(3, 3, 0.0, rng);
  const CMat u = rayleigh_channel(3, 2, rng);
  const CMat f = rayleigh_channel(3, 3, rng);
  const CMat h = st.h_rd_hat * f * st.h_sr_hat;
  const CMat r_n = effective_noise_cov(st.h_rd_hat, f);
  const CMat g = wiener_receiver(h, u, r_n, 0.5);
  const CMat nominal = mse_matrix(g, h, u, r_n, 0.5);
  double prev = 1e300;
  for (double eps : {1e-1, 1e-3, 1e-5, 1e-8}) {
    st.err_sr.sigma_row = eps * CMat::Identity(3, 3);
    st.err_rd.sigma_row = eps * CMat::Identity(3, 3);
    const double dist =
        (averaged_mse(st, u, f, g, 0.5) - nominal).cwiseAbs().maxCoeff();
    CHECK(dist < prev + 1e-15);
    prev = dist;
  }
  CHECK(prev <= 1e-7);
}

TEST_CASE("robust relay power constraint holds on 100 draws") {
  Rng rng(89);
  for (int t = 0; t < 100; ++t) {
    RobustChannelState st = random_state(3, 3, 0.02 + 0.2 * rng.uniform(), rng);
    const P1Solution rob =
        robust_design_p1(st, Objective::SumMSE, 10, 10, 1.0, 2);
    const double alpha =
        (rob.design.u * rob.design.u.adjoint() * st.err_sr.psi_col)
            .diagonal().real().sum();
    const CMat hsu = st.h_sr_hat * rob.design.u;
    const CMat m = hsu * hsu.adjoint() + alpha * st.err_sr.sigma_row +
                   CMat::Identity(3, 3);
    const double relay_power =
        (rob.design.f * m * rob.design.f.adjoint()).diagonal().real().sum();
    CHECK(relay_power <= 10 + 1e-9);
  }
}
