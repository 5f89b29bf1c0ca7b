#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "esfbma/weights.hpp"

namespace esfbma {

// Simulates y = (I - rho W)^{-1} (X lambda + sigma eps) with eps standard
// normal. |rho| must be < 1 so the inverse exists for a row-standardized W.
Eigen::VectorXd sar_simulate(const WeightMatrix& W, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& lambda, double rho,
                             double sigma, std::uint64_t seed);

// Same model with the innovation vector supplied by the caller.
Eigen::VectorXd sar_simulate_with_noise(const WeightMatrix& W,
                                        const Eigen::MatrixXd& X,
                                        const Eigen::VectorXd& lambda,
                                        double rho, double sigma,
                                        const Eigen::VectorXd& eps);

Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::uint64_t seed);
Eigen::VectorXd gaussian_vector(int n, std::uint64_t seed);

}  // namespace esfbma
