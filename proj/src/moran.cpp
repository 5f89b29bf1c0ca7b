#include "esfbma/moran.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "esfbma/errors.hpp"
#include "esfbma/rng.hpp"

namespace esfbma {

namespace {

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double weighted_cross(std::span<const double> e, const WeightMatrix& W) {
  double acc = 0.0;
  const auto& rows = W.rows();
  for (int i = 0; i < W.n(); ++i) {
    double wi = 0.0;
    for (const auto& entry : rows[i]) wi += entry.weight * e[entry.index];
    acc += e[i] * wi;
  }
  return acc;
}

}  // namespace

double morans_i(std::span<const double> e, const WeightMatrix& W) {
  if (static_cast<int>(e.size()) != W.n())
    throw ValidationError("morans_i: vector length does not match matrix");
  double ss = 0.0;
  for (double v : e) ss += v * v;
  if (ss == 0.0) throw ValidationError("morans_i: zero residual vector");
  const double s0 = W.sum_weights();
  return (W.n() / s0) * weighted_cross(e, W) / ss;
}

double morans_i(const Eigen::VectorXd& e, const WeightMatrix& W) {
  return morans_i(std::span<const double>(e.data(), e.size()), W);
}

Eigen::MatrixXd design_basis(const Eigen::MatrixXd& X, int n) {
  Eigen::MatrixXd D(n, X.cols() + 1);
  D.col(0).setOnes();
  if (X.cols() > 0) D.rightCols(X.cols()) = X;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  qr.setThreshold(1e-10);
  if (qr.rank() < D.cols())
    throw ValidationError("design matrix is rank deficient");
  Eigen::MatrixXd Q =
      qr.householderQ() * Eigen::MatrixXd::Identity(n, D.cols());
  return Q;
}

ResidualMoranStats residual_moran_normal(const Eigen::VectorXd& resid,
                                         const Eigen::MatrixXd& Q,
                                         const WeightMatrix& W) {
  const int n = W.n();
  const int q = static_cast<int>(Q.cols());
  if (n - q < 3)
    throw ValidationError("residual Moran: too few degrees of freedom");
  const double s0 = W.sum_weights();

  // Sparse cross-traces with the projector P = QQ'. tr(W) = 0 (no self
  // links), so tr(MW) = -tr(PW).
  double tr_pw = 0.0;        // sum_j q_j' W q_j
  double tr_pwwt = 0.0;      // sum_j ||W' q_j||^2
  double tr_pwtw = 0.0;      // sum_j ||W q_j||^2
  double tr_pww = 0.0;       // sum_j (W' q_j)'(W q_j)
  Eigen::MatrixXd WQ(n, q);
  Eigen::MatrixXd WtQ(n, q);
  WQ.setZero();
  WtQ.setZero();
  const auto& rows = W.rows();
  for (int i = 0; i < n; ++i) {
    for (const auto& e : rows[i]) {
      WQ.row(i) += e.weight * Q.row(e.index);
      WtQ.row(e.index) += e.weight * Q.row(i);
    }
  }
  for (int j = 0; j < q; ++j) {
    tr_pw += Q.col(j).dot(WQ.col(j));
    tr_pwtw += WQ.col(j).squaredNorm();
    tr_pwwt += WtQ.col(j).squaredNorm();
    tr_pww += WtQ.col(j).dot(WQ.col(j));
  }
  double tr_wwt = 0.0;  // sum w_ij^2
  double tr_ww = 0.0;   // sum w_ij w_ji
  std::vector<std::vector<NeighborEntry>> const& r = W.rows();
  for (int i = 0; i < n; ++i) {
    for (const auto& e : r[i]) {
      tr_wwt += e.weight * e.weight;
      // w_ji lookup
      for (const auto& back : r[e.index]) {
        if (back.index == i) {
          tr_ww += e.weight * back.weight;
          break;
        }
      }
    }
  }
  const Eigen::MatrixXd Aq = Q.transpose() * WQ;  // Q'WQ
  const double tr_pwpwt = Aq.cwiseProduct(Aq).sum();
  const double tr_pwpw = (Aq * Aq).trace();

  const double tr_mw = -tr_pw;
  const double tr_mwmwt = tr_wwt - tr_pwtw - tr_pwwt + tr_pwpwt;
  const double tr_mwmw = tr_ww - 2.0 * tr_pww + tr_pwpw;

  ResidualMoranStats s;
  s.I = morans_i(resid, W);
  const double nf = static_cast<double>(n);
  const double df = static_cast<double>(n - q);
  s.expected = (nf / s0) * tr_mw / df;
  const double e_i2 = (nf / s0) * (nf / s0) *
                      (tr_mwmwt + tr_mwmw + tr_mw * tr_mw) /
                      (df * (df + 2.0));
  s.variance = e_i2 - s.expected * s.expected;
  if (!(s.variance > 0.0))
    throw NumericalError("residual Moran: non-positive variance");
  s.z = (s.I - s.expected) / std::sqrt(s.variance);
  s.p_greater = normal_sf(s.z);
  s.p_two_sided = std::erfc(std::abs(s.z) / std::sqrt(2.0));
  return s;
}

namespace {

double permuted_moran(std::span<const double> e, const WeightMatrix& W,
                      double ss, double s0, std::uint64_t perm_seed,
                      std::vector<double>& scratch) {
  const int n = W.n();
  scratch.assign(e.begin(), e.end());
  SplitMix64 rng(perm_seed);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(
        rng.next_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(scratch[i], scratch[j]);
  }
  return (n / s0) * weighted_cross(scratch, W) / ss;
}

}  // namespace

std::pair<long, long> permutation_counts(std::span<const double> e,
                                         const WeightMatrix& W, double i_obs,
                                         int permutations, std::uint64_t seed,
                                         int threads) {
  double ss = 0.0;
  for (double v : e) ss += v * v;
  const double s0 = W.sum_weights();
  long ge = 0;
  long le = 0;
#ifdef _OPENMP
#pragma omp parallel num_threads(threads > 0 ? threads : 1)
  {
    std::vector<double> scratch;
    long lge = 0, lle = 0;
#pragma omp for schedule(static)
    for (int p = 0; p < permutations; ++p) {
      const double ip = permuted_moran(
          e, W, ss, s0, SplitMix64::derive(seed, static_cast<std::uint64_t>(p)),
          scratch);
      if (ip >= i_obs) ++lge;
      if (ip <= i_obs) ++lle;
    }
#pragma omp critical
    {
      ge += lge;
      le += lle;
    }
  }
#else
  std::vector<double> scratch;
  for (int p = 0; p < permutations; ++p) {
    const double ip = permuted_moran(
        e, W, ss, s0, SplitMix64::derive(seed, static_cast<std::uint64_t>(p)),
        scratch);
    if (ip >= i_obs) ++ge;
    if (ip <= i_obs) ++le;
  }
#endif
  return {ge, le};
}

namespace reference {

std::pair<long, long> permutation_counts(std::span<const double> e,
                                         const WeightMatrix& W, double i_obs,
                                         int permutations,
                                         std::uint64_t seed) {
  double ss = 0.0;
  for (double v : e) ss += v * v;
  const double s0 = W.sum_weights();
  long ge = 0, le = 0;
  std::vector<double> scratch;
  for (int p = 0; p < permutations; ++p) {
    const double ip = permuted_moran(
        e, W, ss, s0, SplitMix64::derive(seed, static_cast<std::uint64_t>(p)),
        scratch);
    if (ip >= i_obs) ++ge;
    if (ip <= i_obs) ++le;
  }
  return {ge, le};
}

}  // namespace reference

MoranResult moran_test_residuals(const Eigen::VectorXd& y,
                                 const Eigen::MatrixXd& X,
                                 const WeightMatrix& W, MoranMethod method,
                                 MoranAlternative alternative,
                                 int permutations, std::uint64_t seed,
                                 int threads) {
  const int n = W.n();
  if (y.size() != n || (X.rows() != n && X.cols() > 0))
    throw ValidationError("moran_test_residuals: dimension mismatch");
  const Eigen::MatrixXd Q = design_basis(X, n);
  const Eigen::VectorXd resid = y - Q * (Q.transpose() * y);
  if (resid.squaredNorm() == 0.0)
    throw ValidationError("moran_test_residuals: zero residual vector");

  MoranResult out;
  out.method = method;
  out.alternative = alternative;

  if (method == MoranMethod::NormalApprox) {
    const ResidualMoranStats s = residual_moran_normal(resid, Q, W);
    out.I = s.I;
    out.expected_I = s.expected;
    out.z = s.z;
    out.p = (alternative == MoranAlternative::Greater) ? s.p_greater
                                                       : s.p_two_sided;
    return out;
  }

  if (permutations < 19)
    throw ValidationError(
        "moran_test_residuals: fewer than 19 permutations is meaningless");
  out.permutations = permutations;
  out.I = morans_i(resid, W);
  out.expected_I = -1.0 / (n - 1);
  const auto [ge, le] = permutation_counts(
      std::span<const double>(resid.data(), resid.size()), W, out.I,
      permutations, seed, threads);
  const double pg = (1.0 + ge) / (1.0 + permutations);
  const double pl = (1.0 + le) / (1.0 + permutations);
  out.p = (alternative == MoranAlternative::Greater)
              ? pg
              : std::min(1.0, 2.0 * std::min(pg, pl));
  out.z = 0.0;
  return out;
}

}  // namespace esfbma
