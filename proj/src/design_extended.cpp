#include "relayopt/design_extended.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

#include "relayopt/rotations.hpp"

namespace relayopt {

namespace {

CMat hermitian_inverse_apply(const CMat& a, const CMat& b, const char* ctx) {
  Eigen::SelfAdjointEigenSolver<CMat> es(a);
  const Vec& ev = es.eigenvalues();
  if (ev.minCoeff() <= 0 || ev.maxCoeff() / ev.minCoeff() > 1e12) {
    throw NumericalError(std::string(ctx) +
                         ": matrix singular or ill-conditioned");
  }
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
         es.eigenvectors().adjoint() * b;
}

double real_trace(const CMat& m) { return m.diagonal().real().sum(); }

struct RobustMoments {
  CMat m;        // relay input covariance incl. estimation error
  CMat a;        // destination covariance
  double alpha;  // tr(U U^H Psi_sr)
  double beta;   // tr(F M F^H Psi_rd)
};

RobustMoments robust_moments(const RobustChannelState& st, const CMat& u,
                             const CMat& f, double rho) {
  const int n_r = static_cast<int>(st.h_sr_hat.rows());
  const int n_s = static_cast<int>(st.h_rd_hat.rows());
  if (st.h_sr_hat.cols() != u.rows() || f.rows() != n_r ||
      st.h_rd_hat.cols() != f.rows()) {
    throw DimensionError("averaged_mse: dimension mismatch");
  }
  RobustMoments rm;
  const CMat uu = u * u.adjoint();
  rm.alpha = real_trace(uu * st.err_sr.psi_col);
  const CMat hsu = st.h_sr_hat * u;
  rm.m = hsu * hsu.adjoint() + rm.alpha * st.err_sr.sigma_row +
         rho * CMat::Identity(n_r, n_r);
  const CMat fmf = f * rm.m * f.adjoint();
  rm.beta = real_trace(fmf * st.err_rd.psi_col);
  const CMat hfm = st.h_rd_hat * f;
  rm.a = hfm * rm.m * hfm.adjoint() + rm.beta * st.err_rd.sigma_row +
         rho * CMat::Identity(n_s, n_s);
  rm.a = 0.5 * (rm.a + rm.a.adjoint());
  return rm;
}

}  // namespace

CMat MultiRelayChannel::stacked_h_sr() const {
  const int q = q_relays();
  if (q < 1) throw InvalidInputError("multirelay: Q must be >= 1");
  const int n_r = static_cast<int>(h_sr_q[0].rows());
  const int n_s = static_cast<int>(h_sr_q[0].cols());
  CMat h(q * n_r, n_s);
  for (int i = 0; i < q; ++i) {
    if (h_sr_q[i].rows() != n_r || h_sr_q[i].cols() != n_s) {
      throw DimensionError("multirelay: inconsistent per-relay dimensions");
    }
    h.middleRows(i * n_r, n_r) = h_sr_q[i];
  }
  return h;
}

CMat MultiRelayChannel::stacked_h_rd() const {
  const int q = q_relays();
  const int n_r = static_cast<int>(h_rq_d[0].cols());
  const int n_s = static_cast<int>(h_rq_d[0].rows());
  if (static_cast<int>(h_rq_d.size()) != q) {
    throw DimensionError("multirelay: relay count mismatch");
  }
  CMat h(n_s, q * n_r);
  for (int i = 0; i < q; ++i) {
    if (h_rq_d[i].rows() != n_s || h_rq_d[i].cols() != n_r) {
      throw DimensionError("multirelay: inconsistent per-relay dimensions");
    }
    h.middleCols(i * n_r, n_r) = h_rq_d[i];
  }
  return h;
}

CMat averaged_mse(const RobustChannelState& state, const CMat& u, const CMat& f,
                  const CMat& g, double rho) {
  if (rho <= 0) throw InvalidInputError("averaged_mse: rho must be positive");
  const RobustMoments rm = robust_moments(state, u, f, rho);
  const CMat h_hat = state.h_rd_hat * f * state.h_sr_hat;
  const int k = static_cast<int>(u.cols());
  const CMat ghu = g * h_hat * u;
  CMat e = g * rm.a * g.adjoint() - ghu - ghu.adjoint() +
           CMat::Identity(k, k);
  return 0.5 * (e + e.adjoint());
}

CMat robust_wiener(const RobustChannelState& state, const CMat& u,
                   const CMat& f, double rho) {
  if (rho <= 0) throw InvalidInputError("robust_wiener: rho must be positive");
  const RobustMoments rm = robust_moments(state, u, f, rho);
  const CMat h_hat = state.h_rd_hat * f * state.h_sr_hat;
  const CMat x = hermitian_inverse_apply(rm.a, h_hat * u, "robust_wiener");
  return x.adjoint();
}

P1Solution robust_design_p1(const RobustChannelState& state, Objective obj,
                            double p_s, double p_r, double rho, int k,
                            const AllocOptions& opts) {
  if (p_s <= 0 || p_r <= 0 || rho <= 0) {
    throw InvalidInputError("robust_design_p1: budgets and rho must be positive");
  }
  auto scaled_identity_eps = [](const CMat& m) {
    const int n = static_cast<int>(m.rows());
    const double eps = real_trace(m) / n;
    if ((m - eps * CMat::Identity(n, n)).cwiseAbs().maxCoeff() >
        1e-10 * std::max(1.0, std::abs(eps))) {
      return -1.0;
    }
    return eps;
  };
  const double eps_sr = scaled_identity_eps(state.err_sr.sigma_row);
  const double eps_rd = scaled_identity_eps(state.err_rd.sigma_row);
  if (eps_sr < 0 || eps_rd < 0) {
    throw InvalidInputError(
        "robust_design_p1: unsupported configuration, row covariances must "
        "be scaled identities");
  }

  const TruncatedSvd sr = truncate_svd(svd_sorted(state.h_sr_hat), k);
  const TruncatedSvd rd = truncate_svd(svd_sorted(state.h_rd_hat), k);
  const Vec gsr = sr.gains();
  const Vec grd = rd.gains();
  if (gsr.maxCoeff() <= 0 || grd.maxCoeff() <= 0) {
    throw DegenerateChannelError("robust_design_p1: zero channel estimate");
  }
  // Per-eigenchannel error loads from the column covariances.
  Vec phi(k), psi(k);
  for (int i = 0; i < k; ++i) {
    phi(i) = (sr.right.col(i).adjoint() * state.err_sr.psi_col *
              sr.right.col(i))(0, 0).real();
    psi(i) = (rd.right.col(i).adjoint() * state.err_rd.psi_col *
              rd.right.col(i))(0, 0).real();
  }

  const DesignBranch branch =
      dispatch_class(obj, /*nonlinear=*/false, opts.use_convex_for_summse);
  const AllocFamily family = alloc_family(obj, branch);

  // Fixed point over the error-inflated noise levels: alpha and beta depend
  // on the allocation itself.
  Vec a = Vec::Constant(k, p_s / k);
  Vec b = Vec::Constant(k, p_r / k);
  double rho1 = rho, rho2 = rho;
  ChainAllocation alloc;
  bool converged = false;
  int outer_iters = 0;
  for (int outer = 0; outer < 60; ++outer) {
    ++outer_iters;
    const double alpha = (a.array() * phi.array()).sum();
    const double beta = (b.array() * psi.array()).sum();
    const double rho1_next = rho + eps_sr * alpha;
    const double rho2_next = rho + eps_rd * beta;
    const bool settled = std::abs(rho1_next - rho1) <= 1e-12 * rho1 &&
                         std::abs(rho2_next - rho2) <= 1e-12 * rho2 &&
                         outer > 0;
    rho1 = rho1_next;
    rho2 = rho2_next;
    alloc = alternating_chain_allocation({gsr, grd}, {rho1, rho2}, {p_s, p_r},
                                         family, {a, b}, opts.rel_tol,
                                         opts.max_iters);
    a = alloc.powers[0];
    b = alloc.powers[1];
    if (settled) {
      converged = alloc.converged;
      break;
    }
  }

  // Assemble with the inflated relay noise so the robust power constraint
  // tr{F (Hsr_hat U U^H Hsr_hat^H + alpha Sigma_sr + rho I) F^H} = sum(B).
  TransceiverDesign d;
  Vec lambda(k);
  for (int i = 0; i < k; ++i) {
    lambda(i) = stream_mse2(a(i), b(i), gsr(i), grd(i), rho1, rho2);
  }
  CMat s_rot = CMat::Identity(k, k);
  if (branch == DesignBranch::LinearConvex) {
    s_rot = mean_equalizing_rotation(lambda).s;
  }
  d.u = sr.right * a.cwiseSqrt().asDiagonal() * s_rot.adjoint();
  d.s_rotation = s_rot;
  Vec lam_f(k);
  for (int i = 0; i < k; ++i) lam_f(i) = b(i) / (a(i) * gsr(i) + rho1);
  d.f = rd.right * lam_f.cwiseSqrt().asDiagonal() * sr.left.adjoint();
  d.g = robust_wiener(state, d.u, d.f, rho);

  P1Solution sol;
  sol.design = std::move(d);
  sol.allocation = PowerAllocation{a, b, p_s, p_r};
  sol.converged = converged;
  sol.iterations = outer_iters;
  const CMat ebar =
      averaged_mse(state, sol.design.u, sol.design.f, sol.design.g, rho);
  std::vector<double> diag(k);
  for (int i = 0; i < k; ++i) {
    diag[i] = std::min(1.0, std::max(1e-300, ebar(i, i).real()));
  }
  sol.objective_value = evaluate(obj, diag);
  return sol;
}

MultiHopSolution multihop_design(const MultiHopChannel& channel, Objective obj,
                                 const AllocOptions& opts) {
  const int nhops = static_cast<int>(channel.hops.size());
  if (nhops < 2) throw InvalidInputError("multihop_design: need L >= 2 hops");
  if (static_cast<int>(channel.rhos.size()) != nhops ||
      static_cast<int>(channel.budgets.size()) != nhops) {
    throw DimensionError("multihop_design: rhos/budgets must have one entry "
                         "per hop");
  }
  const int k = channel.num_streams;
  for (int i = 0; i + 1 < nhops; ++i) {
    if (channel.hops[i + 1].cols() != channel.hops[i].rows()) {
      throw DimensionError("multihop_design: dimension chain broken");
    }
  }

  if (nhops == 2) {
    // Exact reduction to the two-hop design.
    TwoHopChannel two;
    two.h_sr = channel.hops[0];
    two.h_rd = channel.hops[1];
    two.rho_1 = channel.rhos[0];
    two.rho_2 = channel.rhos[1];
    two.num_streams = k;
    P1Solution p1 = design_p1(two, obj, channel.budgets[0], channel.budgets[1],
                              opts);
    MultiHopSolution out;
    out.node_matrices = {p1.design.u, p1.design.f};
    out.g = p1.design.g;
    out.node_powers = {p1.allocation.a, p1.allocation.b};
    out.objective_value = p1.objective_value;
    out.converged = p1.converged;
    out.iterations = p1.iterations;
    const TruncatedSvd sr = truncate_svd(svd_sorted(two.h_sr), k);
    const TruncatedSvd rd = truncate_svd(svd_sorted(two.h_rd), k);
    out.stream_mses = Vec(k);
    for (int i = 0; i < k; ++i) {
      out.stream_mses(i) =
          stream_mse2(p1.allocation.a(i), p1.allocation.b(i), sr.gains()(i),
                      rd.gains()(i), two.rho_1, two.rho_2);
    }
    return out;
  }

  std::vector<TruncatedSvd> svds(nhops);
  std::vector<Vec> gains(nhops);
  for (int i = 0; i < nhops; ++i) {
    svds[i] = truncate_svd(svd_sorted(channel.hops[i]), k);
    gains[i] = svds[i].gains();
    if (gains[i].maxCoeff() <= 0) {
      throw DegenerateChannelError("multihop_design: zero channel on hop " +
                                   std::to_string(i + 1));
    }
  }

  const DesignBranch branch =
      dispatch_class(obj, /*nonlinear=*/false, opts.use_convex_for_summse);
  const AllocFamily family = alloc_family(obj, branch);
  std::vector<Vec> init(nhops);
  for (int i = 0; i < nhops; ++i) {
    init[i] = Vec::Constant(k, channel.budgets[i] / k);
  }
  ChainAllocation alloc = alternating_chain_allocation(
      gains, channel.rhos, channel.budgets, family, init, opts.rel_tol,
      opts.max_iters);

  Vec lambda(k);
  {
    std::vector<double> snrs(nhops);
    for (int s = 0; s < k; ++s) {
      for (int i = 0; i < nhops; ++i) {
        snrs[i] = alloc.powers[i](s) * gains[i](s) / channel.rhos[i];
      }
      lambda(s) = chain_stream_mse(snrs);
    }
  }
  CMat s_rot = CMat::Identity(k, k);
  if (branch == DesignBranch::LinearConvex) {
    s_rot = mean_equalizing_rotation(lambda).s;
  }

  MultiHopSolution out;
  out.node_matrices.resize(nhops);
  // F_0 = V_{H_1} Lambda_U^{1/2} S^H.
  out.node_matrices[0] =
      svds[0].right * alloc.powers[0].cwiseSqrt().asDiagonal() * s_rot.adjoint();
  // F_i = V_{H_{i+1}} Lambda_{F_i}^{1/2} Omega_{H_i}^H; the loading keeps the
  // per-node transmit power at exactly the allocated per-stream values.
  for (int i = 1; i < nhops; ++i) {
    Vec lam_f(k);
    for (int s = 0; s < k; ++s) {
      lam_f(s) = alloc.powers[i](s) /
                 (gains[i - 1](s) * alloc.powers[i - 1](s) + channel.rhos[i - 1]);
    }
    out.node_matrices[i] = svds[i].right * lam_f.cwiseSqrt().asDiagonal() *
                           svds[i - 1].left.adjoint();
  }

  // Destination Wiener receiver over the accumulated chain.
  const int n_dest = static_cast<int>(channel.hops[nhops - 1].rows());
  CMat h_equiv = out.node_matrices[0];
  CMat c_n = CMat::Zero(n_dest, n_dest);
  for (int i = 1; i < nhops; ++i) {
    h_equiv = out.node_matrices[i] * (channel.hops[i - 1] * h_equiv);
  }
  h_equiv = channel.hops[nhops - 1] * h_equiv;
  for (int i = 1; i < nhops; ++i) {
    // Noise injected at hop i propagates through F_i .. F_{L-1}.
    CMat t = out.node_matrices[i];
    for (int j = i + 1; j < nhops; ++j) {
      t = out.node_matrices[j] * (channel.hops[j - 1] * t);
    }
    t = channel.hops[nhops - 1] * t;
    c_n += channel.rhos[i - 1] * (t * t.adjoint());
  }
  c_n += channel.rhos[nhops - 1] * CMat::Identity(n_dest, n_dest);
  out.g = wiener_receiver_cov(h_equiv, CMat::Identity(k, k), c_n);

  out.node_powers = alloc.powers;
  out.converged = alloc.converged;
  out.iterations = alloc.iterations;
  out.stream_mses = Vec(k);
  const CMat e = mmse_matrix_cov(h_equiv, CMat::Identity(k, k), c_n);
  std::vector<double> diag(k);
  for (int s = 0; s < k; ++s) {
    out.stream_mses(s) = branch == DesignBranch::LinearConvex
                             ? lambda.mean()
                             : lambda(s);
    diag[s] = std::min(1.0, e(s, s).real());
  }
  out.objective_value = evaluate(obj, diag);
  return out;
}

MultiRelaySolution multirelay_design(const MultiRelayChannel& channel,
                                     double p_s, double p_r_total) {
  const int q = channel.q_relays();
  if (q < 1) throw InvalidInputError("multirelay_design: Q must be >= 1");
  if (p_s <= 0 || p_r_total <= 0) {
    throw InvalidInputError("multirelay_design: budgets must be positive");
  }
  const int k = channel.num_streams;

  if (q == 1) {
    // The block structure is vacuous; fall back to the single-relay SumMSE
    // design.
    TwoHopChannel two;
    two.h_sr = channel.h_sr_q[0];
    two.h_rd = channel.h_rq_d[0];
    two.rho_1 = channel.rho_1;
    two.rho_2 = channel.rho_2;
    two.num_streams = k;
    P1Solution p1 = design_p1(two, Objective::SumMSE, p_s, p_r_total);
    MultiRelaySolution out;
    out.design = p1.design;
    out.allocation = p1.allocation;
    out.fit_residual = 0.0;
    const CMat h_equiv = two.h_rd * p1.design.f * two.h_sr;
    out.sum_mse = mmse_matrix_cov(h_equiv, p1.design.u,
                                  noise_cov(two.h_rd, p1.design.f, two.rho_1,
                                            two.rho_2))
                      .diagonal()
                      .real()
                      .sum();
    return out;
  }

  const CMat h_sr = channel.stacked_h_sr();
  const CMat h_rd = channel.stacked_h_rd();
  const int n_s = static_cast<int>(h_sr.cols());
  const int n_r = static_cast<int>(channel.h_sr_q[0].rows());
  if (k > std::min<int>(n_s, q * n_r)) {
    throw InvalidInputError("multirelay_design: K too large");
  }

  const TruncatedSvd sr = truncate_svd(svd_sorted(h_sr), k);
  const Vec gsr = sr.gains();
  if (gsr.maxCoeff() <= 0) {
    throw DegenerateChannelError("multirelay_design: zero stacked channel");
  }

  // In the target parameterization H_RD F = P Lambda_F^{1/2} Omega_sr^H the
  // per-stream chain sees unit second-hop gains, so the allocation runs with
  // gains_rd = 1.
  ChainAllocation alloc = alternating_chain_allocation(
      {gsr, Vec::Ones(k)}, {channel.rho_1, channel.rho_2}, {p_s, p_r_total},
      AllocFamily::SumMse,
      {Vec::Constant(k, p_s / k), Vec::Constant(k, p_r_total / k)}, 1e-8, 500);
  const Vec& a = alloc.powers[0];
  const Vec& b = alloc.powers[1];
  Vec lam_f(k);
  for (int i = 0; i < k; ++i) {
    lam_f(i) = b(i) / (a(i) * gsr(i) + channel.rho_1);
  }

  // Least-squares block-diagonal fit to the target product, P = I embedded.
  CMat target = CMat::Zero(n_s, q * n_r);
  target.topRows(k) = lam_f.cwiseSqrt().asDiagonal() * sr.left.adjoint();
  CMat f = CMat::Zero(q * n_r, q * n_r);
  double res_num = 0;
  for (int i = 0; i < q; ++i) {
    const CMat& hq = channel.h_rq_d[i];
    const CMat tq = target.middleCols(i * n_r, n_r);
    Eigen::JacobiSVD<CMat> svd(hq, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const CMat fq = svd.solve(tq);
    f.block(i * n_r, i * n_r, n_r, n_r) = fq;
    res_num += (hq * fq - tq).squaredNorm();
  }

  MultiRelaySolution out;
  out.fit_residual = std::sqrt(res_num) / std::max(1e-300, target.norm());

  // Rescale to land exactly on the total relay power budget.
  TransceiverDesign d;
  d.u = sr.right * a.cwiseSqrt().asDiagonal();
  const double p_actual = relay_tx_power(f, h_sr, d.u, channel.rho_1);
  if (p_actual <= 0) {
    throw DegenerateChannelError("multirelay_design: relay sees no signal");
  }
  d.f = std::sqrt(p_r_total / p_actual) * f;
  const CMat h_equiv = h_rd * d.f * h_sr;
  d.g = wiener_receiver_cov(
      h_equiv, d.u, noise_cov(h_rd, d.f, channel.rho_1, channel.rho_2));

  out.design = std::move(d);
  out.allocation = PowerAllocation{a, b, p_s, p_r_total};
  out.sum_mse =
      mmse_matrix_cov(h_equiv, out.design.u,
                      noise_cov(h_rd, out.design.f, channel.rho_1,
                                channel.rho_2))
          .diagonal()
          .real()
          .sum();
  return out;
}

}  // namespace relayopt
