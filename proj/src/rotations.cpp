#include "relayopt/rotations.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace relayopt {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_power_of_two(int k) { return k > 0 && (k & (k - 1)) == 0; }

Vec recompute_diag(const CMat& s, const Vec& lambda) {
  const CMat m = s * lambda.asDiagonal() * s.adjoint();
  return m.diagonal().real();
}

// Ascending-sort permutation.
std::vector<int> sort_perm_ascending(const Vec& v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return v(a) < v(b); });
  return idx;
}

}  // namespace

CMat dft_or_hadamard(int k) {
  if (k < 1) throw InvalidInputError("dft_or_hadamard: k must be >= 1");
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));
  CMat s(k, k);
  if (is_power_of_two(k)) {
    // Sylvester construction via bit parity.
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        const int parity = std::popcount(static_cast<unsigned>(i & j)) & 1;
        s(i, j) = Cx(parity ? -scale : scale, 0.0);
      }
    }
  } else {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        const double ang = -2.0 * kPi * i * j / k;
        s(i, j) = scale * Cx(std::cos(ang), std::sin(ang));
      }
    }
  }
  return s;
}

RotationResult mean_equalizing_rotation(const Vec& lambda) {
  const int k = static_cast<int>(lambda.size());
  if (k < 1) throw InvalidInputError("mean_equalizing_rotation: empty input");
  if (!lambda.allFinite()) {
    throw InvalidInputError("mean_equalizing_rotation: non-finite input");
  }
  const double mean = lambda.mean();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());

  CMat s = CMat::Identity(k, k);
  CMat m = CMat::Zero(k, k);
  m.diagonal() = lambda.cast<Cx>();

  std::vector<int> active(k);
  std::iota(active.begin(), active.end(), 0);

  while (active.size() > 1) {
    int p = active[0], q = active[0];
    for (int i : active) {
      if (m(i, i).real() > m(p, p).real()) p = i;
      if (m(i, i).real() < m(q, q).real()) q = i;
    }
    if (m(p, p).real() - m(q, q).real() <= 1e-15 * scale) break;  // already flat

    const double a = m(p, p).real();
    const double b = m(q, q).real();
    const Cx c = m(p, q);
    const double phi = std::abs(c) > 0 ? std::arg(c) : 0.0;
    // With G = [[cos t, -sin t e^{i phi}], [sin t e^{-i phi}, cos t]] on
    // (p, q), the new (p,p) entry is (a+b)/2 + (a-b)/2 cos 2t - |c| sin 2t.
    const double r = std::hypot(0.5 * (a - b), std::abs(c));
    const double delta = std::atan2(std::abs(c), 0.5 * (a - b));
    double arg = (mean - 0.5 * (a + b)) / r;
    arg = std::clamp(arg, -1.0, 1.0);
    const double u = std::acos(arg) - delta;
    const double ct = std::cos(0.5 * u), st = std::sin(0.5 * u);
    const Cx eip(std::cos(phi), std::sin(phi));

    // Apply G on rows p, q of m and s, then G^H on columns of m.
    for (int j = 0; j < k; ++j) {
      const Cx mp = m(p, j), mq = m(q, j);
      m(p, j) = ct * mp - st * eip * mq;
      m(q, j) = st * std::conj(eip) * mp + ct * mq;
      const Cx sp = s(p, j), sq = s(q, j);
      s(p, j) = ct * sp - st * eip * sq;
      s(q, j) = st * std::conj(eip) * sp + ct * sq;
    }
    for (int i = 0; i < k; ++i) {
      const Cx mp = m(i, p), mq = m(i, q);
      m(i, p) = ct * mp - st * std::conj(eip) * mq;
      m(i, q) = st * eip * mp + ct * mq;
    }
    m(p, p) = Cx(mean, 0.0);  // pinned exactly by construction
    active.erase(std::find(active.begin(), active.end(), p));
  }

  RotationResult out;
  out.s = std::move(s);
  out.achieved_diag = recompute_diag(out.s, lambda);
  out.residual =
      (out.achieved_diag.array() - mean).abs().maxCoeff();
  return out;
}

RotationResult schur_horn_rotation(const Vec& lambda, const Vec& target) {
  const int k = static_cast<int>(lambda.size());
  if (k < 1 || target.size() != k) {
    throw InvalidInputError("schur_horn_rotation: bad input sizes");
  }
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (std::abs(lambda.sum() - target.sum()) > 1e-9 * scale * k) {
    throw InvalidInputError("schur_horn_rotation: trace mismatch");
  }
  // Majorization check, ascending: partial sums of lambda <= those of target.
  const auto lp = sort_perm_ascending(lambda);
  const auto tp = sort_perm_ascending(target);
  double ls = 0, ts = 0;
  for (int j = 0; j < k - 1; ++j) {
    ls += lambda(lp[j]);
    ts += target(tp[j]);
    if (ls > ts + 1e-9 * scale) {
      throw InfeasibleError("schur_horn_rotation: target not majorized by "
                            "eigenvalues");
    }
  }

  // Chan-Li style construction. The active principal submatrix stays
  // diagonal throughout: each step rotates one active pair that brackets the
  // smallest remaining target, pins it, and retires that coordinate.
  std::vector<double> vals(k);     // current diagonal value per coordinate
  std::vector<bool> retired(k, false);
  for (int i = 0; i < k; ++i) vals[i] = lambda(i);

  CMat s = CMat::Identity(k, k);
  // Targets processed smallest-first; coordinate assignment is recorded so
  // the caller's target order is restored at the end.
  std::vector<int> slot_of_target(k, -1);

  for (int step = 0; step < k; ++step) {
    const int tgt_idx = tp[step];
    const double t = target(tgt_idx);

    if (step == k - 1) {
      for (int i = 0; i < k; ++i) {
        if (!retired[i]) slot_of_target[tgt_idx] = i;
      }
      break;
    }

    // Bracket t by active values: lo = largest value <= t, hi = smallest >= t.
    int lo = -1, hi = -1;
    for (int i = 0; i < k; ++i) {
      if (retired[i]) continue;
      if (vals[i] <= t + 1e-12 * scale &&
          (lo < 0 || vals[i] > vals[lo])) lo = i;
      if (vals[i] >= t - 1e-12 * scale &&
          (hi < 0 || vals[i] < vals[hi])) hi = i;
    }
    if (lo < 0 || hi < 0) {
      throw NumericalError("schur_horn_rotation: bracketing failed");
    }
    if (lo == hi) {  // an active value equals t
      retired[lo] = true;
      vals[lo] = t;
      slot_of_target[tgt_idx] = lo;
      continue;
    }
    const double a = vals[hi], b = vals[lo];  // a >= t >= b
    const double c2 = (t - b) / (a - b);
    const double ct = std::sqrt(std::clamp(c2, 0.0, 1.0));
    const double st = std::sqrt(std::clamp(1.0 - c2, 0.0, 1.0));
    // Rotation on (hi, lo) places t on coordinate hi.
    for (int j = 0; j < k; ++j) {
      const Cx sh = s(hi, j), sl = s(lo, j);
      s(hi, j) = ct * sh + st * sl;
      s(lo, j) = -st * sh + ct * sl;
    }
    vals[hi] = t;
    vals[lo] = a + b - t;
    retired[hi] = true;
    slot_of_target[tgt_idx] = hi;
  }

  // Permute rows so that row k of S carries target k.
  CMat s_perm(k, k);
  for (int i = 0; i < k; ++i) s_perm.row(i) = s.row(slot_of_target[i]);

  RotationResult out;
  out.s = std::move(s_perm);
  out.achieved_diag = recompute_diag(out.s, lambda);
  out.residual = (out.achieved_diag - target).cwiseAbs().maxCoeff();
  return out;
}

TriangularFactorization gmd(const Vec& sigma) {
  const int k = static_cast<int>(sigma.size());
  if (k < 1) throw InvalidInputError("gmd: empty input");
  double logmean = 0;
  for (int i = 0; i < k; ++i) {
    if (!(sigma(i) > 0)) throw InvalidInputError("gmd: sigma must be positive");
    logmean += std::log(sigma(i));
  }
  logmean /= k;
  return gtd(sigma, Vec::Constant(k, std::exp(logmean)));
}

TriangularFactorization gtd(const Vec& sigma, const Vec& target_diag) {
  const int k = static_cast<int>(sigma.size());
  if (k < 1 || target_diag.size() != k) {
    throw InvalidInputError("gtd: bad input sizes");
  }
  for (int i = 0; i < k; ++i) {
    if (!(sigma(i) > 0) || !(target_diag(i) > 0)) {
      throw InvalidInputError("gtd: values must be positive");
    }
  }
  // Multiplicative majorization in the log domain, descending partial sums.
  Vec lsig(k), ltgt(k);
  for (int i = 0; i < k; ++i) {
    lsig(i) = std::log(sigma(i));
    ltgt(i) = std::log(target_diag(i));
  }
  {
    Vec a = lsig, b = ltgt;
    std::sort(a.data(), a.data() + k, std::greater<double>());
    std::sort(b.data(), b.data() + k, std::greater<double>());
    if (std::abs(a.sum() - b.sum()) > 1e-9 * std::max(1.0, a.cwiseAbs().sum())) {
      throw InvalidInputError("gtd: product of targets differs from product "
                              "of singular values");
    }
    double sa = 0, sb = 0;
    for (int j = 0; j < k - 1; ++j) {
      sa += a(j);
      sb += b(j);
      if (sb > sa + 1e-9) {
        throw InfeasibleError("gtd: target diagonal not multiplicatively "
                              "majorized by singular values");
      }
    }
  }

  // Jiang-Hager-Li construction on diag(sigma). The active trailing block
  // stays diagonal; each step permutes a bracketing pair into place and
  // applies the 2x2 kernel.
  CMat r = CMat::Zero(k, k);
  r.diagonal() = sigma.cast<Cx>();
  CMat q = CMat::Identity(k, k);
  CMat p = CMat::Identity(k, k);

  for (int step = 0; step < k - 1; ++step) {
    const double t = target_diag(step);
    // Active diagonal values live at positions step..k-1.
    int hi = -1, lo = -1;
    for (int i = step; i < k; ++i) {
      const double v = r(i, i).real();
      if (v >= t - 1e-12 && (hi < 0 || v < r(hi, hi).real())) hi = i;
      if (v <= t + 1e-12 && (lo < 0 || v > r(lo, lo).real())) lo = i;
    }
    if (hi < 0 || lo < 0) throw NumericalError("gtd: bracketing failed");

    auto swap_rows_cols = [&](int i, int j) {
      if (i == j) return;
      r.row(i).swap(r.row(j));
      q.col(i).swap(q.col(j));
      r.col(i).swap(r.col(j));
      p.col(i).swap(p.col(j));
    };
    if (hi == lo) {  // an active value already equals t
      swap_rows_cols(hi, step);
      continue;
    }
    // Move the >= t value to position step; the <= t partner to step+1.
    swap_rows_cols(hi, step);
    if (lo == step) lo = hi;  // tracked value moved by the swap
    swap_rows_cols(lo, step + 1);

    const double d1 = r(step, step).real();
    const double d2 = r(step + 1, step + 1).real();
    if (std::abs(d1 - d2) < 1e-14 * std::max(1.0, d1)) {
      // Both equal t within precision; nothing to rotate.
      continue;
    }
    const double denom = d1 * d1 - d2 * d2;
    const double c = std::sqrt(std::clamp((t * t - d2 * d2) / denom, 0.0, 1.0));
    const double s = std::sqrt(std::clamp(1.0 - c * c, 0.0, 1.0));
    // Right rotation G2 on columns (step, step+1) of r and p.
    for (int i = 0; i < k; ++i) {
      const Cx a = r(i, step), b = r(i, step + 1);
      r(i, step) = c * a + s * b;
      r(i, step + 1) = -s * a + c * b;
      const Cx pa = p(i, step), pb = p(i, step + 1);
      p(i, step) = c * pa + s * pb;
      p(i, step + 1) = -s * pa + c * pb;
    }
    // Left rotation G1^T on rows (step, step+1) of r; G1 on columns of q.
    const double g11 = d1 * c / t, g21 = d2 * s / t;
    for (int j = 0; j < k; ++j) {
      const Cx a = r(step, j), b = r(step + 1, j);
      r(step, j) = g11 * a + g21 * b;
      r(step + 1, j) = -g21 * a + g11 * b;
    }
    for (int i = 0; i < k; ++i) {
      const Cx qa = q(i, step), qb = q(i, step + 1);
      q(i, step) = g11 * qa + g21 * qb;
      q(i, step + 1) = -g21 * qa + g11 * qb;
    }
    r(step, step) = Cx(t, 0.0);
    r(step + 1, step) = Cx(0.0, 0.0);
    r(step + 1, step + 1) = Cx(d1 * d2 / t, 0.0);
  }

  return TriangularFactorization{std::move(q), std::move(r), std::move(p)};
}

}  // namespace relayopt
