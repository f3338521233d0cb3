#include "relayopt/mse.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace relayopt {

namespace {

// Hermitian solve A X = B with a conditioning gate at 1e12.
CMat hermitian_solve(const CMat& a, const CMat& b, const char* ctx) {
  Eigen::SelfAdjointEigenSolver<CMat> es(a);
  const Vec& ev = es.eigenvalues();
  const double emax = ev.cwiseAbs().maxCoeff();
  const double emin = ev.minCoeff();
  if (emin <= 0 || emax / emin > 1e12) {
    throw NumericalError(std::string(ctx) + ": system matrix is singular or "
                         "ill-conditioned beyond 1e12");
  }
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
         es.eigenvectors().adjoint() * b;
}

void check_conformable(bool ok, const char* ctx) {
  if (!ok) throw DimensionError(std::string(ctx) + ": dimension mismatch");
}

}  // namespace

CMat effective_noise_cov(const CMat& h_rd, const CMat& f) {
  check_conformable(h_rd.cols() == f.rows(), "effective_noise_cov");
  const CMat hf = h_rd * f;
  CMat r = hf * hf.adjoint();
  r += CMat::Identity(h_rd.rows(), h_rd.rows());
  return 0.5 * (r + r.adjoint());  // strip Hermitian round-off
}

CMat noise_cov(const CMat& h_rd, const CMat& f, double rho_1, double rho_2) {
  check_conformable(h_rd.cols() == f.rows(), "noise_cov");
  if (rho_1 <= 0 || rho_2 <= 0) {
    throw InvalidInputError("noise_cov: noise variances must be positive");
  }
  const CMat hf = h_rd * f;
  CMat r = rho_1 * (hf * hf.adjoint());
  r += rho_2 * CMat::Identity(h_rd.rows(), h_rd.rows());
  return 0.5 * (r + r.adjoint());
}

CMat wiener_receiver_cov(const CMat& h_equiv, const CMat& u, const CMat& c_n) {
  check_conformable(h_equiv.cols() == u.rows() && c_n.rows() == h_equiv.rows(),
                    "wiener_receiver");
  const CMat hu = h_equiv * u;
  const CMat a = hu * hu.adjoint() + c_n;
  const CMat x = hermitian_solve(a, hu, "wiener_receiver");  // x = A^{-1} H U
  return x.adjoint();
}

CMat wiener_receiver(const CMat& h_equiv, const CMat& u, const CMat& r_n,
                     double rho) {
  if (rho <= 0) throw InvalidInputError("wiener_receiver: rho must be positive");
  return wiener_receiver_cov(h_equiv, u, rho * r_n);
}

CMat mse_matrix_cov(const CMat& g, const CMat& h_equiv, const CMat& u,
                    const CMat& c_n) {
  check_conformable(g.cols() == h_equiv.rows() && h_equiv.cols() == u.rows() &&
                        c_n.rows() == h_equiv.rows(),
                    "mse_matrix");
  const int k = static_cast<int>(u.cols());
  const CMat d = g * h_equiv * u - CMat::Identity(k, k);
  CMat e = d * d.adjoint() + g * c_n * g.adjoint();
  return 0.5 * (e + e.adjoint());
}

CMat mse_matrix(const CMat& g, const CMat& h_equiv, const CMat& u,
                const CMat& r_n, double rho) {
  if (rho <= 0) throw InvalidInputError("mse_matrix: rho must be positive");
  return mse_matrix_cov(g, h_equiv, u, rho * r_n);
}

CMat mmse_matrix_cov(const CMat& h_equiv, const CMat& u, const CMat& c_n) {
  check_conformable(h_equiv.cols() == u.rows() && c_n.rows() == h_equiv.rows(),
                    "mmse_matrix");
  const int k = static_cast<int>(u.cols());
  const CMat hu = h_equiv * u;
  const CMat w = hermitian_solve(c_n, hu, "mmse_matrix");  // C_n^{-1} H U
  const CMat gram = hu.adjoint() * w;
  CMat e = hermitian_solve(gram + CMat::Identity(k, k), CMat::Identity(k, k),
                           "mmse_matrix");
  return 0.5 * (e + e.adjoint());
}

CMat mmse_matrix(const CMat& h_equiv, const CMat& u, const CMat& r_n,
                 double rho) {
  if (rho <= 0) throw InvalidInputError("mmse_matrix: rho must be positive");
  return mmse_matrix_cov(h_equiv, u, rho * r_n);
}

double sinr_from_mse(double mse_kk) {
  if (!(mse_kk > 0.0) || mse_kk > 1.0) {
    throw InvalidInputError("sinr_from_mse: mse must be in (0, 1]");
  }
  return 1.0 / mse_kk - 1.0;
}

double relay_tx_power(const CMat& f, const CMat& h_sr, const CMat& u,
                      double rho) {
  check_conformable(f.cols() == h_sr.rows() && h_sr.cols() == u.rows(),
                    "relay_tx_power");
  if (rho <= 0) throw InvalidInputError("relay_tx_power: rho must be positive");
  const CMat fhu = f * h_sr * u;
  return fhu.squaredNorm() + rho * f.squaredNorm();
}

double stream_mse(double a, double b, double lam_sr, double lam_rd,
                  double rho) {
  return stream_mse2(a, b, lam_sr, lam_rd, rho, rho);
}

double stream_mse2(double a, double b, double lam_sr, double lam_rd,
                   double rho_1, double rho_2) {
  if (a < 0 || b < 0 || lam_sr < 0 || lam_rd < 0 || rho_1 <= 0 || rho_2 <= 0) {
    throw InvalidInputError("stream_mse: negative argument");
  }
  return chain_stream_mse({a * lam_sr / rho_1, b * lam_rd / rho_2});
}

double chain_stream_mse(const std::vector<double>& per_hop_snrs) {
  double prod = 1.0;
  for (double s : per_hop_snrs) {
    if (s < 0) throw InvalidInputError("chain_stream_mse: negative SNR");
    prod *= s / (1.0 + s);
  }
  return 1.0 - prod;
}

}  // namespace relayopt
