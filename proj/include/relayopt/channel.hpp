#pragma once

#include "relayopt/types.hpp"

namespace relayopt {

/// SVD with singular values sorted non-increasing and a deterministic sign
/// convention: the largest-magnitude entry of each right singular vector is
/// made real positive (ties broken by lowest row index), with the matching
/// phase applied to the left vector so the product is unchanged.
ChannelSvd svd_sorted(const CMat& h);

/// i.i.d. circularly symmetric complex Gaussian entries, unit variance.
CMat rayleigh_channel(int rows, int cols, Rng& rng);

/// Draw an estimation-error matrix from the separable covariance model.
CMat kron_error_sample(const KroneckerErrorModel& model, int rows, int cols,
                       Rng& rng);

/// Leading-k truncation of a sorted SVD.
struct TruncatedSvd {
  CMat left;
  Vec singular_values;
  CMat right;
  Vec gains() const { return singular_values.array().square(); }
};
TruncatedSvd truncate_svd(const ChannelSvd& svd, int k);

/// Hermitian PSD square root via eigendecomposition; eigenvalues in
/// [-1e-12, 0) are clamped to zero, below that is rejected.
CMat psd_sqrt(const CMat& m);

TwoHopChannel random_two_hop(int n_s, int n_r, int num_streams, double rho_1,
                             double rho_2, Rng& rng);

}  // namespace relayopt
