// Command-line front end: closed-form designs, BER sweeps, QoS power
// experiments, grid-search references, and the invariant self-check.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "relayopt/io.hpp"
#include "relayopt/rotations.hpp"

namespace ro = relayopt;

namespace {

ro::SimConfig load_config(const std::string& path,
                          std::optional<std::uint64_t> seed_override) {
  ro::SimConfig cfg = ro::sim_config_from_file(path);
  if (seed_override) cfg.seed = *seed_override;
  return cfg;
}

int cmd_design(const std::string& config_path,
               std::optional<std::uint64_t> seed) {
  ro::SimConfig cfg = load_config(config_path, seed);
  ro::Rng rng(cfg.seed);
  const double p_s = std::pow(10.0, cfg.snr_sr_db.at(0) / 10.0);
  const double p_r = std::pow(10.0, cfg.snr_rd_db.at(0) / 10.0);
  ro::TwoHopChannel ch = ro::random_two_hop(cfg.n_s, cfg.n_r, cfg.k, 1.0, 1.0,
                                            rng);

  if (cfg.scenario == "two_hop_p2") {
    if (cfg.eta.size() != cfg.k) {
      std::cerr << "design: two_hop_p2 needs an eta list of length k\n";
      return 2;
    }
    const ro::P2Solution sol = ro::design_p2(ch, ro::QoSTargets{cfg.eta});
    std::cout << ro::p2_solution_to_json(sol) << "\n";
    return 0;
  }
  const std::string name = cfg.designs.empty() ? "SumMSE" : cfg.designs[0];
  if (name == "NAF") {
    std::cout << ro::design_to_json(ro::naf_design(ch, p_s, p_r)) << "\n";
    return 0;
  }
  const std::string dfe_suffix = "-DFE";
  if (name.size() > dfe_suffix.size() &&
      name.compare(name.size() - dfe_suffix.size(), dfe_suffix.size(),
                   dfe_suffix) == 0) {
    const std::string base = name.substr(0, name.size() - dfe_suffix.size());
    const ro::DfeP1Solution sol =
        ro::design_dfe_p1(ch, ro::objective_from_name(base), p_s, p_r);
    std::cout << ro::design_to_json(sol.design.base) << "\n";
    return 0;
  }
  const ro::P1Solution sol =
      ro::design_p1(ch, ro::objective_from_name(name), p_s, p_r);
  std::cout << ro::p1_solution_to_json(sol) << "\n";
  return 0;
}

int cmd_ber(const std::string& config_path,
            std::optional<std::uint64_t> seed) {
  ro::SimConfig cfg = load_config(config_path, seed);
  const auto curves = ro::simulate_ber(cfg);
  const std::string csv = ro::ber_curves_to_csv(curves);
  if (cfg.output.empty()) {
    std::cout << csv;
  } else {
    ro::write_run_outputs(csv, cfg, cfg.output);
    std::cout << "wrote " << cfg.output << "\n";
  }
  return 0;
}

int cmd_power(const std::string& config_path,
              std::optional<std::uint64_t> seed) {
  ro::SimConfig cfg = load_config(config_path, seed);
  const auto rows = ro::power_experiment(cfg);
  const std::string csv = ro::power_rows_to_csv(rows);
  if (cfg.output.empty()) {
    std::cout << csv;
  } else {
    ro::write_run_outputs(csv, cfg, cfg.output);
    std::cout << "wrote " << cfg.output << "\n";
  }
  return 0;
}

int cmd_oracle(const std::string& config_path,
               std::optional<std::uint64_t> seed) {
  ro::SimConfig cfg = load_config(config_path, seed);
  ro::Rng rng(cfg.seed);
  ro::TwoHopChannel ch = ro::random_two_hop(cfg.n_s, cfg.n_r, cfg.k, 1.0, 1.0,
                                            rng);
  const ro::TruncatedSvd sr = ro::truncate_svd(ro::svd_sorted(ch.h_sr), cfg.k);
  const ro::TruncatedSvd rd = ro::truncate_svd(ro::svd_sorted(ch.h_rd), cfg.k);
  const double p_s = std::pow(10.0, cfg.snr_sr_db.at(0) / 10.0);
  const double p_r = std::pow(10.0, cfg.snr_rd_db.at(0) / 10.0);

  if (cfg.scenario == "two_hop_p2") {
    const double power = ro::grid_oracle_p2(sr.gains(), rd.gains(), 1.0,
                                            cfg.eta, cfg.resolution);
    std::printf("oracle_min_power %.12g\n", power);
    return 0;
  }
  const std::string name = cfg.designs.empty() ? "SumMSE" : cfg.designs[0];
  const ro::Objective obj = ro::objective_from_name(name);
  const ro::PowerAllocation alloc = ro::grid_oracle_p1(
      sr.gains(), rd.gains(), 1.0, p_s, p_r, obj, cfg.resolution);
  std::vector<double> mses(cfg.k);
  for (int i = 0; i < cfg.k; ++i) {
    mses[i] = ro::stream_mse(alloc.a(i), alloc.b(i), sr.gains()(i),
                             rd.gains()(i), 1.0);
  }
  std::printf("oracle_objective %.12g\n", ro::evaluate(obj, mses));
  std::cout << ro::allocation_to_json(alloc) << "\n";
  return 0;
}

bool check(const char* label, bool ok) {
  std::printf("%-55s %s\n", label, ok ? "PASS" : "FAIL");
  return ok;
}

// Quick structural self-check over random instances.
int cmd_validate(std::uint64_t seed) {
  bool all = true;
  ro::Rng rng(seed);

  {
    bool ok = true;
    for (int t = 0; t < 10; ++t) {
      ro::CMat h = ro::rayleigh_channel(4, 3, rng);
      ro::ChannelSvd svd = ro::svd_sorted(h);
      const ro::CMat rec = svd.left.leftCols(3) *
                           svd.singular_values.asDiagonal() *
                           svd.right.adjoint();
      ok = ok && (rec - h).norm() <= 1e-9 * h.norm();
      for (int i = 0; i + 1 < svd.singular_values.size(); ++i) {
        ok = ok && svd.singular_values(i) >= svd.singular_values(i + 1);
      }
    }
    all &= check("svd_sorted reconstruction + ordering", ok);
  }
  {
    bool ok = true;
    for (int t = 0; t < 10; ++t) {
      ro::TwoHopChannel ch = ro::random_two_hop(3, 3, 2, 1.0, 1.0, rng);
      ro::P1Solution sol = ro::design_p1(ch, ro::Objective::SumMSE, 10, 10);
      const ro::CMat overall = sol.design.g * ch.h_rd * sol.design.f *
                               ch.h_sr * sol.design.u;
      double offdiag = 0;
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          if (i != j) offdiag = std::max(offdiag, std::abs(overall(i, j)));
        }
      }
      ok = ok && offdiag <= 1e-9;
      ok = ok && sol.allocation.a.sum() <= 10 + 1e-9 &&
           sol.allocation.b.sum() <= 10 + 1e-9;
    }
    all &= check("P1 SumMSE diagonalization + budgets", ok);
  }
  {
    bool ok = true;
    for (int t = 0; t < 10; ++t) {
      ro::TwoHopChannel ch = ro::random_two_hop(3, 3, 2, 1.0, 1.0, rng);
      ro::P1Solution sol = ro::design_p1(ch, ro::Objective::MaxMSE, 10, 10);
      const ro::CMat h_equiv = ch.h_rd * sol.design.f * ch.h_sr;
      const ro::CMat e = ro::mmse_matrix_cov(
          h_equiv, sol.design.u,
          ro::noise_cov(ch.h_rd, sol.design.f, 1.0, 1.0));
      ok = ok && std::abs(e(0, 0).real() - e(1, 1).real()) <= 1e-10;
    }
    all &= check("P1 MaxMSE equal-diagonal MSE", ok);
  }
  {
    bool ok = true;
    for (int t = 0; t < 10; ++t) {
      ro::TwoHopChannel ch = ro::random_two_hop(3, 3, 3, 1.0, 1.0, rng);
      ro::Vec eta(3);
      eta << 0.15 + 0.1 * rng.uniform(), 0.3 + 0.1 * rng.uniform(),
          0.45 + 0.1 * rng.uniform();
      ro::P2Solution rc = ro::design_p2(ch, ro::QoSTargets{eta});
      ro::P2Solution sa = ro::sa_design_p2(ch, ro::QoSTargets{eta});
      ok = ok && (rc.achieved_mses.array() <= eta.array() + 1e-9).all();
      ok = ok && rc.total_power <= sa.total_power * (1 + 1e-9);
    }
    all &= check("P2 targets met, RC <= SA", ok);
  }
  {
    bool ok = true;
    ro::Vec lam(3);
    lam << 0.1, 0.5, 0.9;
    const ro::RotationResult rot = ro::mean_equalizing_rotation(lam);
    ok = ok && rot.residual <= 1e-12;
    const ro::CMat shouldI = rot.s * rot.s.adjoint() -
                             ro::CMat::Identity(3, 3);
    ok = ok && shouldI.cwiseAbs().maxCoeff() <= 1e-10;
    ro::Vec sigma(3);
    sigma << 9, 3, 1;
    const auto tf = ro::gmd(sigma);
    for (int i = 0; i < 3; ++i) {
      ok = ok && std::abs(tf.r(i, i).real() - 3.0) <= 1e-10;
    }
    all &= check("rotation kernels (mean-equalizing, GMD)", ok);
  }

  std::printf("validate: %s\n", all ? "ALL PASS" : "FAILURES");
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AF MIMO relay transceiver designs and link simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::uint64_t validate_seed = 1;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    if (need_config) {
      sub->add_option("-c,--config", config_path, "JSON config file")
          ->required();
    }
    sub->add_option("--seed", seed, "override the config seed");
  };

  CLI::App* design = app.add_subcommand(
      "design", "print matrices and allocation for one instance");
  add_common(design, true);
  CLI::App* ber = app.add_subcommand("ber", "run a BER sweep");
  add_common(ber, true);
  CLI::App* power = app.add_subcommand("power", "run a QoS power sweep");
  add_common(power, true);
  CLI::App* oracle =
      app.add_subcommand("oracle", "grid-search reference values");
  add_common(oracle, true);
  CLI::App* validate = app.add_subcommand("validate", "run invariant checks");
  validate->add_option("--seed", validate_seed, "rng seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (design->parsed()) return cmd_design(config_path, seed);
    if (ber->parsed()) return cmd_ber(config_path, seed);
    if (power->parsed()) return cmd_power(config_path, seed);
    if (oracle->parsed()) return cmd_oracle(config_path, seed);
    if (validate->parsed()) return cmd_validate(validate_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
