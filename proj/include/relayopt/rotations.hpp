#pragma once

#include "relayopt/types.hpp"

namespace relayopt {

struct RotationResult {
  CMat s;             // K x K unitary
  Vec achieved_diag;  // recomputed diag(S Lambda S^H)
  double residual;    // max |achieved - target|
};

/// Constant-modulus unitary: Walsh-Hadamard when k is a power of two, DFT
/// otherwise. diag(S Lambda S^H) is the arithmetic mean of Lambda for any
/// real Lambda.
CMat dft_or_hadamard(int k);

/// Unitary S with diag(S diag(lambda) S^H) all equal to mean(lambda),
/// built from at most K-1 two-coordinate rotations that each pin the
/// current max/min pair at the mean.
RotationResult mean_equalizing_rotation(const Vec& lambda);

/// Unitary S with diag(S diag(lambda) S^H) = target. Feasible iff target is
/// majorized by lambda (ascending partial sums of lambda below target's,
/// equal totals). Throws InfeasibleError / InvalidInputError otherwise.
RotationResult schur_horn_rotation(const Vec& lambda, const Vec& target);

struct TriangularFactorization {
  CMat q;  // unitary
  CMat r;  // upper triangular, prescribed positive diagonal
  CMat p;  // unitary; diag(sigma) = q * r * p^H
};

/// Geometric mean decomposition of diag(sigma): every diagonal entry of r
/// equals the geometric mean of sigma.
TriangularFactorization gmd(const Vec& sigma);

/// Generalized triangular decomposition with prescribed positive diagonal.
/// Feasible iff target is multiplicatively majorized by sigma.
TriangularFactorization gtd(const Vec& sigma, const Vec& target_diag);

}  // namespace relayopt
