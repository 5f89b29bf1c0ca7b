#include "esfbma/sar.hpp"

#include <Eigen/Dense>

#include "esfbma/errors.hpp"
#include "esfbma/rng.hpp"

namespace esfbma {

Eigen::VectorXd sar_simulate_with_noise(const WeightMatrix& W,
                                        const Eigen::MatrixXd& X,
                                        const Eigen::VectorXd& lambda,
                                        double rho, double sigma,
                                        const Eigen::VectorXd& eps) {
  const int n = W.n();
  if (!(std::abs(rho) < 1.0))
    throw ValidationError("sar_simulate: |rho| must be < 1");
  if (X.cols() != lambda.size())
    throw ValidationError("sar_simulate: lambda length mismatch");
  if ((X.cols() > 0 && X.rows() != n) || eps.size() != n)
    throw ValidationError("sar_simulate: dimension mismatch");

  Eigen::VectorXd signal = sigma * eps;
  if (X.cols() > 0) signal += X * lambda;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - rho * W.dense();
  return Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(signal);
}

Eigen::VectorXd sar_simulate(const WeightMatrix& W, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& lambda, double rho,
                             double sigma, std::uint64_t seed) {
  return sar_simulate_with_noise(W, X, lambda, rho, sigma,
                                 gaussian_vector(W.n(), seed));
}

Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.next_normal();
  return m;
}

Eigen::VectorXd gaussian_vector(int n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.next_normal();
  return v;
}

}  // namespace esfbma
