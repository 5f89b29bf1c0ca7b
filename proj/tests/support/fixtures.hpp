#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "esfbma/geo.hpp"
#include "esfbma/ingest.hpp"
#include "esfbma/weights.hpp"

namespace esfbma::testing {

// Binary ring (cycle graph C_n), units R00..R{n-1}.
NeighborList ring_neighbor_list(int n);
WeightMatrix ring_weights(int n);

// The pinned capital-city coordinates used for the published-distance checks.
std::vector<GeoPoint> capital_fixture();

// Deterministic 115-point world: points scattered around a handful of
// continent-like cluster centers, pairwise distinct, no islands under a
// 1500 km band. Unit ids U000..U114 in index order.
std::vector<GeoPoint> synthetic_world(int n = 115, std::uint64_t seed = 87);

// Symmetrized kNN (the union of i->j and j->i links), used as a stand-in for
// polygon queen contiguity in fixtures.
NeighborList symmetrized_knn(std::span<const GeoPoint> points, int k);

// The six-matrix menu used for the weight-uncertainty fixtures: queen-like,
// 4NN, 6NN, 8NN, 1500 km band, inverse 1500 km band.
struct MatrixMenu {
  std::vector<std::string> names;
  std::vector<WeightMatrix> matrices;
};
MatrixMenu six_matrix_menu(std::span<const GeoPoint> points);

// SAR fixture shared by the sampler/oracle acceptance checks: k covariates,
// the first three carry signal (0.6, 0.5, 0.4), rho = 0.6 on the given W.
struct SarFixture {
  Eigen::VectorXd y;  // standardized
  Eigen::MatrixXd x;  // standardized columns
  std::vector<std::string> names;
};
SarFixture sar_fixture(const WeightMatrix& w_true, int k, std::uint64_t seed,
                       double sigma = 0.5);

// Standardize a vector/columns to mean 0, sample SD 1 (n-1 denominator).
Eigen::VectorXd zscore(const Eigen::VectorXd& v);
Eigen::MatrixXd zscore_columns(const Eigen::MatrixXd& m);

}  // namespace esfbma::testing
