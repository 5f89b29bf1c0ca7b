#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include <Eigen/Core>

#include "esfbma/weights.hpp"

namespace esfbma {

enum class MoranMethod { Permutation, NormalApprox };
enum class MoranAlternative { Greater, TwoSided };

struct MoranResult {
  double I = 0.0;
  double expected_I = 0.0;
  double z = 0.0;
  double p = 1.0;
  MoranMethod method = MoranMethod::Permutation;
  MoranAlternative alternative = MoranAlternative::Greater;
  int permutations = 0;  // 0 for the normal approximation
};

// I = (n/S0) * (e'We)/(e'e). e must not be the zero vector.
double morans_i(std::span<const double> e, const WeightMatrix& W);
double morans_i(const Eigen::VectorXd& e, const WeightMatrix& W);

// Cliff-Ord moments of residual Moran's I under the null, for residuals of a
// regression whose fitted subspace is spanned by the orthonormal columns of Q
// (intercept included in Q's span).
struct ResidualMoranStats {
  double I = 0.0;
  double expected = 0.0;
  double variance = 0.0;
  double z = 0.0;
  double p_greater = 1.0;
  double p_two_sided = 1.0;
};
ResidualMoranStats residual_moran_normal(const Eigen::VectorXd& resid,
                                         const Eigen::MatrixXd& Q,
                                         const WeightMatrix& W);

// Orthonormal basis of [1 X] via column-pivoted QR. Throws on rank
// deficiency.
Eigen::MatrixXd design_basis(const Eigen::MatrixXd& X, int n);

// Counts of permuted Moran statistics >= and <= the observed one, over P
// random permutations of e. Each permutation uses a seed derived from (seed,
// permutation index), so the counts are independent of thread count.
std::pair<long, long> permutation_counts(std::span<const double> e,
                                         const WeightMatrix& W, double i_obs,
                                         int permutations, std::uint64_t seed,
                                         int threads = 1);

namespace reference {
std::pair<long, long> permutation_counts(std::span<const double> e,
                                         const WeightMatrix& W, double i_obs,
                                         int permutations, std::uint64_t seed);
}

// Moran test on the residuals of y ~ [1 X]. Permutation p-values use
// p = (1 + #{I_perm >= I_obs}) / (1 + P) for the "greater" alternative and
// min(1, 2 * min(p_greater, p_less)) for "two-sided".
MoranResult moran_test_residuals(const Eigen::VectorXd& y,
                                 const Eigen::MatrixXd& X,
                                 const WeightMatrix& W,
                                 MoranMethod method = MoranMethod::Permutation,
                                 MoranAlternative alternative =
                                     MoranAlternative::Greater,
                                 int permutations = 999,
                                 std::uint64_t seed = 0, int threads = 1);

}  // namespace esfbma
