#pragma once

#include "relayopt/types.hpp"

namespace relayopt {

/// R_n = H_RD F F^H H_RD^H + I (unit-noise form).
CMat effective_noise_cov(const CMat& h_rd, const CMat& f);

/// Full decision-point noise covariance rho_1 * H_RD F F^H H_RD^H + rho_2 * I.
/// Equals rho * effective_noise_cov when rho_1 == rho_2 == rho.
CMat noise_cov(const CMat& h_rd, const CMat& f, double rho_1, double rho_2);

/// Wiener receiver G = U^H H^H (H U U^H H^H + C_n)^{-1} for noise covariance
/// C_n. Throws NumericalError when the system matrix condition number
/// exceeds 1e12.
CMat wiener_receiver_cov(const CMat& h_equiv, const CMat& u, const CMat& c_n);

/// Unit-noise-form signature with C_n = rho * r_n.
CMat wiener_receiver(const CMat& h_equiv, const CMat& u, const CMat& r_n,
                     double rho);

/// E = (G H U - I)(G H U - I)^H + G C_n G^H.
CMat mse_matrix_cov(const CMat& g, const CMat& h_equiv, const CMat& u,
                    const CMat& c_n);
CMat mse_matrix(const CMat& g, const CMat& h_equiv, const CMat& u,
                const CMat& r_n, double rho);

/// MMSE matrix with the Wiener receiver: E = (U^H H^H C_n^{-1} H U + I)^{-1}.
CMat mmse_matrix_cov(const CMat& h_equiv, const CMat& u, const CMat& c_n);
CMat mmse_matrix(const CMat& h_equiv, const CMat& u, const CMat& r_n,
                 double rho);

/// SINR_k = 1/mse_k - 1, valid for mse in (0, 1].
double sinr_from_mse(double mse_kk);

/// tr{F (H_SR U U^H H_SR^H + rho I) F^H}.
double relay_tx_power(const CMat& f, const CMat& h_sr, const CMat& u,
                      double rho);

/// Per-stream MSE of the diagonalized two-hop system:
/// rho (a*lam_sr + b*lam_rd + rho) / ((a*lam_sr + rho)(b*lam_rd + rho)).
double stream_mse(double a, double b, double lam_sr, double lam_rd,
                  double rho);

/// Two-link version with distinct noise variances.
double stream_mse2(double a, double b, double lam_sr, double lam_rd,
                   double rho_1, double rho_2);

/// Per-stream MSE of a diagonalized AF chain: 1 - prod_i s_i/(1+s_i) for
/// per-hop SNRs s_i. Reduces to stream_mse for two hops.
double chain_stream_mse(const std::vector<double>& per_hop_snrs);

}  // namespace relayopt
