#include "relayopt/channel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

namespace relayopt {

ChannelSvd svd_sorted(const CMat& h) {
  if (h.rows() == 0 || h.cols() == 0) {
    throw InvalidInputError("svd_sorted: empty matrix");
  }
  if (!h.allFinite()) {
    throw InvalidInputError("svd_sorted: non-finite entries");
  }

  Eigen::JacobiSVD<CMat> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  CMat left = svd.matrixU();
  CMat right = svd.matrixV();
  Vec values = svd.singularValues();  // Eigen sorts non-increasing already

  // Sign convention: rotate each right singular vector so its
  // largest-magnitude entry is real positive, and rotate the paired left
  // vector by the same phase. Columns of the larger factor beyond
  // min(rows, cols) have no partner; normalize them directly.
  const int p = static_cast<int>(std::min(h.rows(), h.cols()));
  for (int k = 0; k < right.cols(); ++k) {
    Eigen::Index imax = 0;
    right.col(k).cwiseAbs().maxCoeff(&imax);
    const Cx v = right(imax, k);
    if (std::abs(v) > 0) {
      const Cx phase = std::conj(v) / std::abs(v);
      right.col(k) *= phase;
      if (k < p && k < left.cols()) left.col(k) *= phase;
    }
  }
  for (int k = p; k < left.cols(); ++k) {
    Eigen::Index imax = 0;
    left.col(k).cwiseAbs().maxCoeff(&imax);
    const Cx v = left(imax, k);
    if (std::abs(v) > 0) left.col(k) *= std::conj(v) / std::abs(v);
  }
  return ChannelSvd{std::move(left), std::move(values), std::move(right)};
}

CMat rayleigh_channel(int rows, int cols, Rng& rng) {
  if (rows < 1 || cols < 1) {
    throw InvalidInputError("rayleigh_channel: rows/cols must be >= 1");
  }
  CMat h(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) h(i, j) = rng.cgauss();
  }
  return h;
}

CMat psd_sqrt(const CMat& m) {
  if (m.rows() != m.cols()) throw DimensionError("psd_sqrt: square matrix required");
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff())) {
    throw InvalidInputError("psd_sqrt: matrix not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<CMat> es(m);
  Vec ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-12) throw InvalidInputError("psd_sqrt: matrix not PSD");
    if (ev(i) < 0) ev(i) = 0;
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
         es.eigenvectors().adjoint();
}

CMat kron_error_sample(const KroneckerErrorModel& model, int rows, int cols,
                       Rng& rng) {
  if (model.sigma_row.rows() != rows || model.psi_col.rows() != cols) {
    throw DimensionError("kron_error_sample: covariance dimensions mismatch");
  }
  const CMat sig_half = psd_sqrt(model.sigma_row);
  const CMat psi_half = psd_sqrt(model.psi_col);
  return sig_half * rayleigh_channel(rows, cols, rng) * psi_half;
}

TruncatedSvd truncate_svd(const ChannelSvd& svd, int k) {
  const int p = static_cast<int>(svd.singular_values.size());
  if (k < 1 || k > p) throw InvalidInputError("truncate_svd: k out of range");
  return TruncatedSvd{svd.left.leftCols(k), svd.singular_values.head(k),
                      svd.right.leftCols(k)};
}

TwoHopChannel random_two_hop(int n_s, int n_r, int num_streams, double rho_1,
                             double rho_2, Rng& rng) {
  if (num_streams > std::min(n_s, n_r)) {
    throw InvalidInputError("random_two_hop: K must be <= min(N_S, N_R)");
  }
  if (rho_1 <= 0 || rho_2 <= 0) {
    throw InvalidInputError("random_two_hop: noise variances must be positive");
  }
  TwoHopChannel ch;
  ch.h_sr = rayleigh_channel(n_r, n_s, rng);
  ch.h_rd = rayleigh_channel(n_s, n_r, rng);
  ch.rho_1 = rho_1;
  ch.rho_2 = rho_2;
  ch.num_streams = num_streams;
  return ch;
}

}  // namespace relayopt
