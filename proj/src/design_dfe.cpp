#include "relayopt/design_dfe.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
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

}  // namespace

BackwardFactors backward_matrix_cov(const CMat& u, const CMat& h_equiv,
                                    const CMat& c_n, double rho_ref) {
  if (h_equiv.cols() != u.rows() || c_n.rows() != h_equiv.rows()) {
    throw DimensionError("backward_matrix: dimension mismatch");
  }
  if (rho_ref <= 0) {
    throw InvalidInputError("backward_matrix: rho must be positive");
  }
  const int k = static_cast<int>(u.cols());
  const CMat hu = h_equiv * u;
  const CMat w = hermitian_inverse_apply(c_n, hu, "backward_matrix");
  CMat m = rho_ref * (hu.adjoint() * w + CMat::Identity(k, k));
  m = 0.5 * (m + m.adjoint());

  Eigen::LLT<CMat> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("backward_matrix: Gram matrix not positive definite");
  }
  CMat l = llt.matrixL();

  BackwardFactors out;
  out.l = l;
  out.d = Vec(k);
  for (int i = 0; i < k; ++i) {
    const double lkk = l(i, i).real();
    if (!(lkk > 0)) {
      throw NumericalError("backward_matrix: non-positive Cholesky pivot");
    }
    out.d(i) = 1.0 / lkk;
  }
  out.b = out.d.asDiagonal() * l.adjoint();
  out.b -= CMat::Identity(k, k);
  // Enforce exact strict upper triangularity.
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j <= i; ++j) out.b(i, j) = Cx(0, 0);
  }
  return out;
}

BackwardFactors backward_matrix(const CMat& u, const CMat& h_equiv,
                                const CMat& r_n, double rho) {
  if (rho <= 0) throw InvalidInputError("backward_matrix: rho must be positive");
  return backward_matrix_cov(u, h_equiv, rho * r_n, rho);
}

namespace {

struct Decomposed {
  TruncatedSvd sr;
  TruncatedSvd rd;
  Vec gains_sr;
  Vec gains_rd;
};

Decomposed decompose(const TwoHopChannel& ch) {
  const int k = ch.num_streams;
  if (k < 1 || k > std::min(ch.n_s(), ch.n_r())) {
    throw InvalidInputError("design_dfe: K must be in [1, min(N_S, N_R)]");
  }
  Decomposed d;
  d.sr = truncate_svd(svd_sorted(ch.h_sr), k);
  d.rd = truncate_svd(svd_sorted(ch.h_rd), k);
  d.gains_sr = d.sr.gains();
  d.gains_rd = d.rd.gains();
  if (d.gains_sr.maxCoeff() <= 0 || d.gains_rd.maxCoeff() <= 0) {
    throw DegenerateChannelError("design_dfe: zero channel matrix");
  }
  return d;
}

// DFE transceiver for a given unitary S and power split. The feedforward is
// G = rho_ref D L^{-1} U^H H^H C_n^{-1}, which leaves the decision-point
// error covariance diagonal with entries rho_ref |d_k|^2.
DfeDesign assemble_dfe(const Decomposed& dc, const TwoHopChannel& ch,
                       const Vec& a, const Vec& b, const CMat& s_rot) {
  const int k = static_cast<int>(a.size());
  DfeDesign d;
  d.base.u = dc.sr.right * a.cwiseSqrt().asDiagonal() * s_rot.adjoint();
  d.base.s_rotation = s_rot;
  Vec lam_f(k);
  for (int i = 0; i < k; ++i) {
    lam_f(i) = b(i) / (a(i) * dc.gains_sr(i) + ch.rho_1);
  }
  d.base.f = dc.rd.right * lam_f.cwiseSqrt().asDiagonal() * dc.sr.left.adjoint();

  const CMat h_equiv = ch.h_rd * d.base.f * ch.h_sr;
  const CMat c_n = noise_cov(ch.h_rd, d.base.f, ch.rho_1, ch.rho_2);
  BackwardFactors bf = backward_matrix_cov(d.base.u, h_equiv, c_n, ch.rho_2);

  const CMat hu = h_equiv * d.base.u;
  const CMat w = hermitian_inverse_apply(c_n, hu, "design_dfe");
  const CMat ff = bf.l.triangularView<Eigen::Lower>().solve(w.adjoint());
  d.base.g = ch.rho_2 * bf.d.asDiagonal() * ff;
  d.base.backward = bf.b;
  d.l_factor = std::move(bf.l);
  d.d_scale = std::move(bf.d);
  return d;
}

Vec dfe_mses(const TwoHopChannel& ch, const DfeDesign& d) {
  return ch.rho_2 * d.d_scale.array().square();
}

}  // namespace

DfeP1Solution design_dfe_p1(const TwoHopChannel& channel, Objective obj,
                            double p_s, double p_r, const AllocOptions& opts) {
  if (multiplicative_class(obj) != SchurClass::SchurConvex) {
    throw InvalidInputError(
        "design_dfe_p1: objective is not multiplicatively Schur-convex; "
        "use the linear design");
  }
  if (p_s <= 0 || p_r <= 0) {
    throw InvalidInputError("design_dfe_p1: budgets must be positive");
  }
  const Decomposed dc = decompose(channel);
  const int k = channel.num_streams;

  // Power allocation solves the MSE-product problem.
  ChainAllocation alloc = alternating_chain_allocation(
      {dc.gains_sr, dc.gains_rd}, {channel.rho_1, channel.rho_2}, {p_s, p_r},
      AllocFamily::LogMse,
      {Vec::Constant(k, p_s / k), Vec::Constant(k, p_r / k)}, opts.rel_tol,
      opts.max_iters);
  const Vec& a = alloc.powers[0];
  const Vec& b = alloc.powers[1];

  Vec lambda(k);
  for (int i = 0; i < k; ++i) {
    lambda(i) = stream_mse2(a(i), b(i), dc.gains_sr(i), dc.gains_rd(i),
                            channel.rho_1, channel.rho_2);
  }
  // S = P^H from the GMD of diag(sqrt(rho_2 / lambda)) equalizes the
  // Cholesky diagonal, so every stream MSE is the geometric mean of lambda.
  const Vec sigma_l = (channel.rho_2 / lambda.array()).sqrt();
  TriangularFactorization tf = gmd(sigma_l);
  const CMat s_rot = tf.p.adjoint();

  DfeP1Solution sol;
  sol.design = assemble_dfe(dc, channel, a, b, s_rot);
  sol.allocation = PowerAllocation{a, b, p_s, p_r};
  sol.converged = alloc.converged;
  sol.iterations = alloc.iterations;

  const Vec mses = dfe_mses(channel, sol.design);
  std::vector<double> m(mses.data(), mses.data() + k);
  for (double& v : m) v = std::min(1.0, v);
  sol.objective_value = evaluate(obj, m);
  return sol;
}

DfeP2Solution design_dfe_p2(const TwoHopChannel& channel,
                            const QoSTargets& targets) {
  const Decomposed dc = decompose(channel);
  const int k = channel.num_streams;
  if (targets.eta.size() != k) {
    throw DimensionError("design_dfe_p2: targets size must equal K");
  }
  for (int i = 0; i < k; ++i) {
    if (!(targets.eta(i) > 0.0) || targets.eta(i) >= 1.0) {
      throw InfeasibleError("design_dfe_p2: targets must lie in (0, 1)");
    }
  }

  Vec eta_asc = targets.eta;
  std::sort(eta_asc.data(), eta_asc.data() + k);

  // Seed the multiplicative search with the linear RC eigenvalues; the
  // additive polytope is contained in the multiplicative one, so the DFE
  // never spends more power than the linear design.
  Vec linear_lambda(k);
  {
    const P2Solution lin = design_p2(channel, targets);
    for (int i = 0; i < k; ++i) {
      linear_lambda(i) =
          stream_mse2(lin.allocation.a(i), lin.allocation.b(i), dc.gains_sr(i),
                      dc.gains_rd(i), channel.rho_1, channel.rho_2);
    }
  }
  const P2EigenSearch outer =
      p2_eigen_search(dc.gains_sr, dc.gains_rd, channel.rho_1, channel.rho_2,
                      eta_asc, /*log_domain=*/true, &linear_lambda);

  // Multiplicative slack folds into the targets as a uniform scale.
  double log_slack = 0;
  for (int i = 0; i < k; ++i) {
    log_slack += std::log(eta_asc(i)) - std::log(outer.lambda(i));
  }
  Vec d = targets.eta;
  if (log_slack > 1e-12 * k) {
    d *= std::exp(-log_slack / k);
  }

  const Vec sigma_l = (channel.rho_2 / outer.lambda.array()).sqrt();
  const Vec r_diag = (channel.rho_2 / d.array()).sqrt();
  TriangularFactorization tf = gtd(sigma_l, r_diag);
  const CMat s_rot = tf.p.adjoint();

  DfeP2Solution sol;
  sol.design = assemble_dfe(dc, channel, outer.a, outer.b, s_rot);
  sol.allocation =
      PowerAllocation{outer.a, outer.b, outer.a.sum(), outer.b.sum()};
  sol.total_power = outer.total_power;
  sol.achieved_mses = dfe_mses(channel, sol.design);
  return sol;
}

}  // namespace relayopt
