#include <cmath>

#include "doctest.h"
#include "relayopt/io.hpp"
#include "relayopt/sim.hpp"

using namespace relayopt;

TEST_CASE("qam mapping") {
  // Declared Gray map: bits 00 -> (1+j)/sqrt(2).
  const CVec s = qam_mod({0, 0}, 4);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(s(0).real() == doctest::Approx(r));
  CHECK(s(0).imag() == doctest::Approx(r));

  // Unit average energy over the full constellation, exact Gray adjacency.
  for (int m : {4, 16, 64}) {
    const int bps = qam_bits_per_symbol(m);
    double energy = 0;
    for (int v = 0; v < m; ++v) {
      std::vector<int> bits(bps);
      for (int j = 0; j < bps; ++j) bits[j] = (v >> (bps - 1 - j)) & 1;
      const CVec sym = qam_mod(bits, m);
      energy += std::norm(sym(0));
      const std::vector<int> back = qam_demod(sym, m);
      CHECK(back == bits);
    }
    CHECK(energy / m == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Noiseless round trip of random bits.
  Rng rng(3);
  std::vector<int> bits(10000 * 2);
  for (int& b : bits) b = static_cast<int>(rng.bit());
  const CVec sym = qam_mod(bits, 4);
  CHECK(qam_demod(sym, 4) == bits);

  CHECK_THROWS_AS(qam_mod({0, 1}, 8), InvalidInputError);
  CHECK_THROWS_AS(qam_mod({0, 1, 0}, 4), InvalidInputError);
}

TEST_CASE("qam over scalar AWGN matches the Q-function benchmark") {
  // 4-QAM at Es/N0 = 10 dB: BER = Q(sqrt(10)) = 7.827e-4.
  const double es_n0 = 10.0;
  const double sigma = std::sqrt(1.0 / es_n0);  // Es = 1
  Rng rng(12345);
  long long errs = 0;
  const long trials = 400000;
  for (long t = 0; t < trials; ++t) {
    std::vector<int> bits = {static_cast<int>(rng.bit()),
                             static_cast<int>(rng.bit())};
    const CVec s = qam_mod(bits, 4);
    CVec y(1);
    y(0) = s(0) + sigma * rng.cgauss();
    const std::vector<int> hat = qam_demod(y, 4);
    errs += (hat[0] != bits[0]) + (hat[1] != bits[1]);
  }
  const double nbits = 2.0 * trials;
  const double ber = errs / nbits;
  const double expect = 0.5 * std::erfc(std::sqrt(10.0) / std::sqrt(2.0));
  const double ci = 3 * std::sqrt(expect * (1 - expect) / nbits);
  CHECK(std::abs(ber - expect) <= ci);
}

TEST_CASE("detectors") {
  Rng rng(8);
  TwoHopChannel ch = random_two_hop(3, 3, 2, 1.0, 1.0, rng);
  const P1Solution sol = design_p1(ch, Objective::SumMSE, 100, 100);
  std::vector<int> bits = {1, 0, 0, 1};
  const CVec s = qam_mod(bits, 4);
  // Zero noise: exact recovery.
  const CVec y = sol.design.g * (ch.h_rd * (sol.design.f * (ch.h_sr *
                 (sol.design.u * s))));
  CHECK(detect_linear(y, 4) == bits);
  // A zero backward matrix reduces the DFE to the linear detector.
  CHECK(detect_dfe(y, CMat::Zero(2, 2), 4) == detect_linear(y, 4));
}

TEST_CASE("simulate_ber determinism and asymptotics") {
  SimConfig cfg;
  cfg.scenario = "two_hop_p1";
  cfg.n_s = cfg.n_r = 3;
  cfg.k = 2;
  cfg.designs = {"SumMSE", "NAF"};
  cfg.qam_order = 4;
  cfg.snr_sr_db = {10.0};
  cfg.snr_rd_db = {20.0};
  cfg.trials = 200;
  cfg.seed = 7;

  const auto a = simulate_ber(cfg);
  const auto b = simulate_ber(cfg);
  REQUIRE(a.size() == 2);
  CHECK(a[0].points[0].bit_errors == b[0].points[0].bit_errors);
  CHECK(a[1].points[0].bit_errors == b[1].points[0].bit_errors);
  CHECK(ber_curves_to_csv(a) == ber_curves_to_csv(b));

  // Very high SNR: no errors for the optimized full-rank design.
  SimConfig hi = cfg;
  hi.snr_sr_db = {60.0};
  hi.snr_rd_db = {60.0};
  hi.trials = 100;
  const auto c = simulate_ber(hi);
  CHECK(c[0].points[0].bit_errors == 0);
}

TEST_CASE("config parsing") {
  const std::string text = R"({
    "scenario": "two_hop_p1", "n_s": 3, "n_r": 3, "k": 2,
    "objective": ["MaxMSE", "NAF"], "qam_order": 4,
    "snr_sr_db": [5, 10], "snr_rd_db": 20, "trials": 10, "seed": 3,
    "output": "out.csv"})";
  const SimConfig cfg = sim_config_from_json(text);
  CHECK(cfg.designs.size() == 2);
  CHECK(cfg.snr_sr_db.size() == 2);
  CHECK(cfg.snr_rd_db.size() == 1);
  CHECK(cfg.seed == 3);

  CHECK_THROWS_AS(sim_config_from_json(R"({"scenario":"two_hop_p1","n_s":3,
    "n_r":3,"k":2,"bogus":1})"),
                  InvalidInputError);
  CHECK_THROWS_AS(sim_config_from_json(R"({"scenario":"x","n_s":3,"n_r":3,
    "k":2,"qam_order":8})"),
                  InvalidInputError);

  // Matrix JSON round trip.
  Rng rng(4);
  const CMat m = rayleigh_channel(3, 2, rng);
  const CMat back = matrix_from_json(matrix_to_json(m));
  CHECK((m - back).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("empirical_mse") {
  Rng rng(21);
  TwoHopChannel ch = random_two_hop(3, 3, 2, 1.0, 1.0, rng);

  // F = 0: nothing arrives, per-stream MSE is one.
  {
    TransceiverDesign d;
    d.u = CMat::Identity(3, 2);
    d.f = CMat::Zero(3, 3);
    d.g = CMat::Zero(2, 3);
    Rng mc(31);
    auto [mse, se] = empirical_mse(d, ch, 2000, mc);
    CHECK(mse(0) == doctest::Approx(1.0));
    CHECK(mse(1) == doctest::Approx(1.0));
  }

  // Matches the analytic diagonal within 3 standard errors.
  const P1Solution sol = design_p1(ch, Objective::SumMSE, 10, 10);
  Rng mc(33);
  auto [mse, se] = empirical_mse(sol.design, ch, 100000, mc);
  const CMat h_equiv = ch.h_rd * sol.design.f * ch.h_sr;
  const Vec ana = mmse_matrix_cov(h_equiv, sol.design.u,
                                  noise_cov(ch.h_rd, sol.design.f, 1.0, 1.0))
                      .diagonal()
                      .real();
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(mse(i) - ana(i)) <= 3 * se(i));
  }

  // Quadrupling the trials roughly halves the standard error.
  Rng mc2(33);
  auto [m4, se4] = empirical_mse(sol.design, ch, 400000, mc2);
  CHECK(se4(0) <= 0.7 * se(0));
  CHECK(se4(0) >= 0.3 * se(0));
}

TEST_CASE("power_experiment") {
  // Single draw, K = 1: equals the per-stream closed form.
  {
    SimConfig cfg;
    cfg.scenario = "two_hop_p2";
    cfg.n_s = cfg.n_r = 2;
    cfg.k = 1;
    cfg.eta_sweep = {0.4};
    cfg.trials = 1;
    cfg.seed = 11;
    cfg.rho_db = 0.0;
    const auto rows = power_experiment(cfg);
    REQUIRE(rows.size() == 3);

    Rng rng = Rng::substream(11, 0, 0);
    TwoHopChannel ch = random_two_hop(2, 2, 1, 1.0, 1.0, rng);
    const TruncatedSvd sr = truncate_svd(svd_sorted(ch.h_sr), 1);
    const TruncatedSvd rd = truncate_svd(svd_sorted(ch.h_rd), 1);
    auto [a, b] =
        per_stream_min_power(0.4, sr.gains()(0), rd.gains()(0), 1.0);
    const double expect_db = 10 * std::log10(a + b);
    for (const auto& r : rows) {
      CHECK(r.avg_power_db == doctest::Approx(expect_db).epsilon(1e-6));
    }
  }
  // Looser targets need less power, vanishing as eta -> 1.
  {
    SimConfig cfg;
    cfg.scenario = "two_hop_p2";
    cfg.n_s = cfg.n_r = 2;
    cfg.k = 2;
    cfg.eta_sweep = {0.5, 0.999, 0.9999999};
    cfg.trials = 5;
    cfg.seed = 13;
    const auto rows = power_experiment(cfg);
    REQUIRE(rows.size() == 9);
    for (int d = 0; d < 3; ++d) {
      CHECK(rows[3 + d].avg_power_db < rows[d].avg_power_db);
      CHECK(rows[6 + d].avg_power_db < rows[d].avg_power_db - 30.0);
    }
  }
}
