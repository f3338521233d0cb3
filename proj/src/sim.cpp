#include "relayopt/sim.hpp"

#include "relayopt/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace relayopt {

namespace {

int axis_levels(int m) {
  switch (m) {
    case 4: return 2;
    case 16: return 4;
    case 64: return 8;
    default:
      throw InvalidInputError("qam: order must be one of {4, 16, 64}");
  }
}

unsigned gray_to_binary(unsigned g) {
  for (unsigned shift = 1; shift < 8; shift <<= 1) g ^= g >> shift;
  return g;
}

unsigned binary_to_gray(unsigned b) { return b ^ (b >> 1); }

double axis_norm(int m) {
  const int la = axis_levels(m);
  return std::sqrt(2.0 * (la * la - 1) / 3.0);
}

// Level index p (0 = most positive) -> amplitude before normalization.
double level_amp(int p, int la) { return static_cast<double>(la - 1 - 2 * p); }

double axis_modulate(unsigned bits, int la, double norm) {
  const unsigned p = gray_to_binary(bits);
  return level_amp(static_cast<int>(p), la) / norm;
}

unsigned axis_demodulate(double v, int la, double norm) {
  const double a = v * norm;
  int p = static_cast<int>(std::lround((la - 1 - a) / 2.0));
  p = std::clamp(p, 0, la - 1);
  return binary_to_gray(static_cast<unsigned>(p));
}

}  // namespace

int qam_bits_per_symbol(int m) {
  const int la = axis_levels(m);
  int h = 0;
  while ((1 << h) < la) ++h;
  return 2 * h;
}

CVec qam_mod(const std::vector<int>& bits, int m) {
  const int bps = qam_bits_per_symbol(m);
  if (bits.size() % bps != 0) {
    throw InvalidInputError("qam_mod: bit count not divisible by log2(M)");
  }
  const int la = axis_levels(m);
  const int h = bps / 2;
  const double norm = axis_norm(m);
  const int n = static_cast<int>(bits.size()) / bps;
  CVec s(n);
  for (int i = 0; i < n; ++i) {
    unsigned bi = 0, bq = 0;
    for (int j = 0; j < h; ++j) bi = (bi << 1) | (bits[i * bps + j] & 1);
    for (int j = 0; j < h; ++j) bq = (bq << 1) | (bits[i * bps + h + j] & 1);
    s(i) = Cx(axis_modulate(bi, la, norm), axis_modulate(bq, la, norm));
  }
  return s;
}

std::vector<int> qam_demod(const CVec& symbols, int m) {
  const int bps = qam_bits_per_symbol(m);
  const int la = axis_levels(m);
  const int h = bps / 2;
  const double norm = axis_norm(m);
  std::vector<int> bits(symbols.size() * bps);
  for (int i = 0; i < symbols.size(); ++i) {
    const unsigned bi = axis_demodulate(symbols(i).real(), la, norm);
    const unsigned bq = axis_demodulate(symbols(i).imag(), la, norm);
    for (int j = 0; j < h; ++j) {
      bits[i * bps + j] = (bi >> (h - 1 - j)) & 1;
      bits[i * bps + h + j] = (bq >> (h - 1 - j)) & 1;
    }
  }
  return bits;
}

Cx qam_slice(Cx v, int m) {
  const int la = axis_levels(m);
  const double norm = axis_norm(m);
  auto slice_axis = [&](double x) {
    int p = static_cast<int>(std::lround((la - 1 - x * norm) / 2.0));
    p = std::clamp(p, 0, la - 1);
    return level_amp(p, la) / norm;
  };
  return Cx(slice_axis(v.real()), slice_axis(v.imag()));
}

std::vector<int> detect_linear(const CVec& gy, int m) {
  return qam_demod(gy, m);
}

std::vector<int> detect_dfe(const CVec& gy, const CMat& backward, int m) {
  const int k = static_cast<int>(gy.size());
  if (backward.rows() != k || backward.cols() != k) {
    throw DimensionError("detect_dfe: backward matrix size mismatch");
  }
  CVec decided(k);
  for (int s = k - 1; s >= 0; --s) {
    Cx z = gy(s);
    for (int j = s + 1; j < k; ++j) z -= backward(s, j) * decided(j);
    decided(s) = qam_slice(z, m);
  }
  return qam_demod(decided, m);
}

int sim_thread_count() {
  if (const char* env = std::getenv("RELAYOPT_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace {

double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }

struct DesignSpec {
  std::string name;
  bool naf = false;
  bool dfe = false;
  bool robust = false;
  bool naive_robust = false;  // estimate treated as truth
  Objective objective = Objective::SumMSE;
};

DesignSpec parse_design_name(const std::string& raw) {
  DesignSpec d;
  d.name = raw;
  std::string base = raw;
  auto strip_suffix = [&](const std::string& suf) {
    if (base.size() > suf.size() &&
        base.compare(base.size() - suf.size(), suf.size(), suf) == 0) {
      base = base.substr(0, base.size() - suf.size());
      return true;
    }
    return false;
  };
  if (base == "NAF") {
    d.naf = true;
    return d;
  }
  if (strip_suffix("-DFE")) d.dfe = true;
  if (base.rfind("Robust-", 0) == 0) {
    d.robust = true;
    base = base.substr(7);
  } else if (base.rfind("Naive-", 0) == 0) {
    d.naive_robust = true;
    base = base.substr(6);
  }
  d.objective = objective_from_name(base);
  return d;
}

struct TrialCounts {
  std::vector<long long> bit_errors;  // per design
  long long bits_per_design = 0;
};

// One two-hop trial: fresh channel, one symbol vector, shared noise across
// designs.
void run_two_hop_trial(const SimConfig& cfg,
                       const std::vector<DesignSpec>& specs, double p_s,
                       double p_r, Rng& rng, std::vector<long long>& errors) {
  TwoHopChannel ch = random_two_hop(cfg.n_s, cfg.n_r, cfg.k, 1.0, 1.0, rng);
  const int bps = qam_bits_per_symbol(cfg.qam_order);
  std::vector<int> bits(cfg.k * bps);
  for (int& b : bits) b = static_cast<int>(rng.bit());
  const CVec s = qam_mod(bits, cfg.qam_order);
  CVec n1(cfg.n_r), n2(cfg.n_s);
  for (int i = 0; i < cfg.n_r; ++i) n1(i) = rng.cgauss();
  for (int i = 0; i < cfg.n_s; ++i) n2(i) = rng.cgauss();

  // Robust scenario: the drawn channel is the estimate; the truth adds a
  // scaled-identity-covariance error.
  CMat d_sr, d_rd;
  KroneckerErrorModel esr, erd;
  if (cfg.scenario == "robust") {
    esr.sigma_row = cfg.eps * CMat::Identity(cfg.n_r, cfg.n_r);
    esr.psi_col = CMat::Identity(cfg.n_s, cfg.n_s);
    erd.sigma_row = cfg.eps * CMat::Identity(cfg.n_s, cfg.n_s);
    erd.psi_col = CMat::Identity(cfg.n_r, cfg.n_r);
    d_sr = kron_error_sample(esr, cfg.n_r, cfg.n_s, rng);
    d_rd = kron_error_sample(erd, cfg.n_s, cfg.n_r, rng);
  }

  for (size_t di = 0; di < specs.size(); ++di) {
    const DesignSpec& spec = specs[di];
    CMat u, f, g;
    const CMat* backward = nullptr;
    CMat backward_store;
    if (spec.naf) {
      TransceiverDesign d = naf_design(ch, p_s, p_r);
      u = d.u; f = d.f; g = d.g;
    } else if (spec.dfe) {
      DfeP1Solution sol = design_dfe_p1(ch, spec.objective, p_s, p_r);
      u = sol.design.base.u;
      f = sol.design.base.f;
      g = sol.design.base.g;
      backward_store = *sol.design.base.backward;
      backward = &backward_store;
    } else if (spec.robust || spec.naive_robust) {
      RobustChannelState st{ch.h_sr, ch.h_rd, esr, erd};
      TransceiverDesign d;
      if (spec.robust) {
        d = robust_design_p1(st, spec.objective, p_s, p_r, 1.0, cfg.k).design;
      } else {
        d = design_p1(ch, spec.objective, p_s, p_r).design;
      }
      u = d.u; f = d.f; g = d.g;
    } else {
      P1Solution sol = design_p1(ch, spec.objective, p_s, p_r);
      u = sol.design.u;
      f = sol.design.f;
      g = sol.design.g;
    }

    CMat h_sr = ch.h_sr, h_rd = ch.h_rd;
    if (cfg.scenario == "robust") {
      h_sr += d_sr;  // transmit over the true channel
      h_rd += d_rd;
    }
    const CVec y = g * (h_rd * (f * (h_sr * (u * s) + n1)) + n2);
    const std::vector<int> hat =
        backward ? detect_dfe(y, *backward, cfg.qam_order)
                 : detect_linear(y, cfg.qam_order);
    long long err = 0;
    for (size_t i = 0; i < bits.size(); ++i) err += bits[i] != hat[i];
    errors[di] += err;
  }
}

void run_multihop_trial(const SimConfig& cfg,
                        const std::vector<DesignSpec>& specs, double p_first,
                        double p_rest, Rng& rng,
                        std::vector<long long>& errors) {
  MultiHopChannel ch;
  ch.num_streams = cfg.k;
  for (int i = 0; i < cfg.l; ++i) {
    const int rows = (i + 1 < cfg.l) ? cfg.n_r : cfg.n_s;
    const int cols = (i == 0) ? cfg.n_s : cfg.n_r;
    ch.hops.push_back(rayleigh_channel(rows, cols, rng));
    ch.rhos.push_back(1.0);
    ch.budgets.push_back(i == 0 ? p_first : p_rest);
  }
  const int bps = qam_bits_per_symbol(cfg.qam_order);
  std::vector<int> bits(cfg.k * bps);
  for (int& b : bits) b = static_cast<int>(rng.bit());
  const CVec s = qam_mod(bits, cfg.qam_order);
  std::vector<CVec> noise(cfg.l);
  for (int i = 0; i < cfg.l; ++i) {
    noise[i] = CVec(ch.hops[i].rows());
    for (int j = 0; j < noise[i].size(); ++j) noise[i](j) = rng.cgauss();
  }

  for (size_t di = 0; di < specs.size(); ++di) {
    MultiHopSolution sol = multihop_design(ch, specs[di].objective);
    CVec x = sol.node_matrices[0] * s;
    for (int i = 1; i < cfg.l; ++i) {
      x = sol.node_matrices[i] * (ch.hops[i - 1] * x + noise[i - 1]);
    }
    const CVec y = sol.g * (ch.hops[cfg.l - 1] * x + noise[cfg.l - 1]);
    const std::vector<int> hat = detect_linear(y, cfg.qam_order);
    long long err = 0;
    for (size_t i = 0; i < bits.size(); ++i) err += bits[i] != hat[i];
    errors[di] += err;
  }
}

void run_multirelay_trial(const SimConfig& cfg,
                          const std::vector<DesignSpec>& specs, double p_s,
                          double p_r, Rng& rng,
                          std::vector<long long>& errors) {
  MultiRelayChannel ch;
  ch.num_streams = cfg.k;
  ch.rho_1 = 1.0;
  ch.rho_2 = 1.0;
  for (int i = 0; i < cfg.q; ++i) {
    ch.h_sr_q.push_back(rayleigh_channel(cfg.n_r, cfg.n_s, rng));
    ch.h_rq_d.push_back(rayleigh_channel(cfg.n_s, cfg.n_r, rng));
  }
  const int bps = qam_bits_per_symbol(cfg.qam_order);
  std::vector<int> bits(cfg.k * bps);
  for (int& b : bits) b = static_cast<int>(rng.bit());
  const CVec s = qam_mod(bits, cfg.qam_order);
  CVec n1(cfg.q * cfg.n_r), n2(cfg.n_s);
  for (int i = 0; i < n1.size(); ++i) n1(i) = rng.cgauss();
  for (int i = 0; i < n2.size(); ++i) n2(i) = rng.cgauss();

  const CMat h_sr = ch.stacked_h_sr();
  const CMat h_rd = ch.stacked_h_rd();
  for (size_t di = 0; di < specs.size(); ++di) {
    MultiRelaySolution sol = multirelay_design(ch, p_s, p_r);
    const CVec y = sol.design.g *
                   (h_rd * (sol.design.f * (h_sr * (sol.design.u * s) + n1)) +
                    n2);
    const std::vector<int> hat = detect_linear(y, cfg.qam_order);
    long long err = 0;
    for (size_t i = 0; i < bits.size(); ++i) err += bits[i] != hat[i];
    errors[di] += err;
  }
}

}  // namespace

std::vector<BerCurve> simulate_ber(const SimConfig& cfg) {
  if (cfg.trials < 1) throw InvalidInputError("simulate_ber: trials must be >= 1");
  if (cfg.snr_sr_db.empty()) {
    throw InvalidInputError("simulate_ber: empty SNR sweep");
  }
  axis_levels(cfg.qam_order);  // validates the constellation order

  std::vector<DesignSpec> specs;
  if (cfg.scenario == "two_hop_p1" || cfg.scenario == "dfe" ||
      cfg.scenario == "robust") {
    for (const std::string& name : cfg.designs) {
      specs.push_back(parse_design_name(name));
    }
    if (specs.empty()) {
      throw InvalidInputError("simulate_ber: no designs configured");
    }
  } else if (cfg.scenario == "naf") {
    specs.push_back(parse_design_name("NAF"));
  } else if (cfg.scenario == "multihop") {
    if (cfg.l < 2) throw InvalidInputError("simulate_ber: multihop needs l >= 2");
    for (const std::string& name : cfg.designs) {
      specs.push_back(parse_design_name(name));
    }
    if (specs.empty()) specs.push_back(parse_design_name("SumMSE"));
  } else if (cfg.scenario == "multirelay") {
    if (cfg.q < 1) throw InvalidInputError("simulate_ber: multirelay needs q >= 1");
    DesignSpec d;
    d.name = "MultiRelay";
    specs.push_back(d);
  } else {
    throw InvalidInputError("simulate_ber: unsupported scenario " +
                            cfg.scenario);
  }

  const int n_designs = static_cast<int>(specs.size());
  const int bits_per_trial = cfg.k * qam_bits_per_symbol(cfg.qam_order);
  std::vector<BerCurve> curves(n_designs);
  const std::string hash = config_hash(cfg);
  for (int d = 0; d < n_designs; ++d) {
    curves[d].design = specs[d].name;
    curves[d].seed = cfg.seed;
    curves[d].config_hash = hash;
  }

  const int nthreads = sim_thread_count();
  for (size_t p = 0; p < cfg.snr_sr_db.size(); ++p) {
    const double snr_sr = cfg.snr_sr_db[p];
    const double snr_rd =
        cfg.snr_rd_db.size() == 1 ? cfg.snr_rd_db[0]
                                  : cfg.snr_rd_db[std::min(p, cfg.snr_rd_db.size() - 1)];
    const double p_s = db_to_lin(snr_sr);   // SNR_SR = P_S / rho_1, rho_1 = 1
    const double p_r = db_to_lin(snr_rd);   // SNR_RD = P_R / rho_2, rho_2 = 1

    std::vector<std::vector<long long>> partial(
        nthreads, std::vector<long long>(n_designs, 0));
    auto worker = [&](int tid) {
      std::vector<long long>& errors = partial[tid];
      for (long t = tid; t < cfg.trials; t += nthreads) {
        Rng rng = Rng::substream(cfg.seed, p, static_cast<std::uint64_t>(t));
        if (cfg.scenario == "multihop") {
          run_multihop_trial(cfg, specs, p_s, p_r, rng, errors);
        } else if (cfg.scenario == "multirelay") {
          run_multirelay_trial(cfg, specs, p_s, p_r, rng, errors);
        } else {
          run_two_hop_trial(cfg, specs, p_s, p_r, rng, errors);
        }
      }
    };
    std::vector<std::thread> pool;
    for (int tid = 1; tid < nthreads; ++tid) pool.emplace_back(worker, tid);
    worker(0);
    for (auto& th : pool) th.join();

    for (int d = 0; d < n_designs; ++d) {
      long long errs = 0;
      for (int tid = 0; tid < nthreads; ++tid) errs += partial[tid][d];
      BerPoint pt;
      pt.snr_db = snr_sr;
      pt.trials = cfg.trials;
      pt.bit_errors = errs;
      const double nbits = static_cast<double>(cfg.trials) * bits_per_trial;
      pt.ber = errs / nbits;
      pt.ci95 = 1.96 * std::sqrt(std::max(0.0, pt.ber * (1.0 - pt.ber)) / nbits);
      curves[d].points.push_back(pt);
    }
  }
  return curves;
}

std::vector<PowerRow> power_experiment(const SimConfig& cfg) {
  if (cfg.eta_sweep.empty()) {
    throw InvalidInputError("power_experiment: eta_sweep is empty");
  }
  if (cfg.trials < 1) {
    throw InvalidInputError("power_experiment: trials must be >= 1");
  }
  const double rho = db_to_lin(cfg.rho_db);
  std::vector<PowerRow> rows;
  const char* names[3] = {"RC", "SA", "RC-DFE"};

  for (size_t p = 0; p < cfg.eta_sweep.size(); ++p) {
    const double eta = cfg.eta_sweep[p];
    if (!(eta > 0.0) || eta >= 1.0) {
      throw InvalidInputError("power_experiment: eta values must be in (0,1)");
    }
    double sums[3] = {0, 0, 0};
    long draws = 0;
    long infeasible = 0;
    for (long t = 0; t < cfg.trials; ++t) {
      Rng rng = Rng::substream(cfg.seed, p, static_cast<std::uint64_t>(t));
      TwoHopChannel ch = random_two_hop(cfg.n_s, cfg.n_r, cfg.k, rho, rho, rng);
      QoSTargets targets{Vec::Constant(cfg.k, eta)};
      try {
        const P2Solution rc = design_p2(ch, targets);
        const P2Solution sa = sa_design_p2(ch, targets);
        const DfeP2Solution dfe = design_dfe_p2(ch, targets);
        if (rc.total_power > sa.total_power * (1 + 1e-9) ||
            dfe.total_power > rc.total_power * (1 + 1e-9)) {
          throw NumericalError("power_experiment: design ordering violated");
        }
        sums[0] += rc.total_power;
        sums[1] += sa.total_power;
        sums[2] += dfe.total_power;
        ++draws;
      } catch (const InfeasibleError&) {
        ++infeasible;  // excluded and counted
      }
    }
    for (int d = 0; d < 3; ++d) {
      PowerRow row;
      row.eta = eta;
      row.design = names[d];
      row.avg_power_db =
          draws > 0 ? 10.0 * std::log10(sums[d] / draws) : 0.0;
      row.draws = draws;
      row.infeasible = infeasible;
      rows.push_back(row);
    }
  }
  return rows;
}

std::pair<Vec, Vec> empirical_mse(const TransceiverDesign& design,
                                  const TwoHopChannel& channel, long trials,
                                  Rng& rng) {
  if (trials < 1000) {
    throw InvalidInputError("empirical_mse: need at least 10^3 trials");
  }
  const int k = static_cast<int>(design.u.cols());
  const int m = 4;
  const int bps = qam_bits_per_symbol(m);
  Vec acc = Vec::Zero(k), acc2 = Vec::Zero(k);
  const CMat gh =
      design.g * (channel.h_rd * (design.f * channel.h_sr)) * design.u;
  const CMat gf = design.g * channel.h_rd * design.f;  // relay noise path
  const double sr1 = std::sqrt(channel.rho_1), sr2 = std::sqrt(channel.rho_2);
  std::vector<int> bits(k * bps);
  for (long t = 0; t < trials; ++t) {
    for (int& b : bits) b = static_cast<int>(rng.bit());
    const CVec s = qam_mod(bits, m);
    CVec n1(channel.n_r()), n2(channel.n_s());
    for (int i = 0; i < n1.size(); ++i) n1(i) = sr1 * rng.cgauss();
    for (int i = 0; i < n2.size(); ++i) n2(i) = sr2 * rng.cgauss();
    CVec y = gh * s + gf * n1 + design.g * n2;
    if (design.backward) {
      y -= *design.backward * s;  // true-symbol feedback
    }
    for (int i = 0; i < k; ++i) {
      const double e2 = std::norm(y(i) - s(i));
      acc(i) += e2;
      acc2(i) += e2 * e2;
    }
  }
  Vec mean = acc / trials;
  Vec se(k);
  for (int i = 0; i < k; ++i) {
    const double var = std::max(0.0, acc2(i) / trials - mean(i) * mean(i));
    se(i) = std::sqrt(var / trials);
  }
  return {mean, se};
}

}  // namespace relayopt
