#include <doctest.h>

#include <cmath>
#include <vector>

#include "esfbma/errors.hpp"
#include "esfbma/moran.hpp"
#include "esfbma/rng.hpp"
#include "esfbma/sar.hpp"
#include "support/fixtures.hpp"

using namespace esfbma;
using esfbma::testing::ring_weights;
using esfbma::testing::synthetic_world;
using esfbma::testing::zscore;

TEST_CASE("morans_i: alternating signs on the 4-ring give exactly -1") {
  const WeightMatrix w = ring_weights(4);
  const std::vector<double> e = {1.0, -1.0, 1.0, -1.0};
  CHECK(morans_i(e, w) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("morans_i: e orthogonal to We gives 0") {
  const WeightMatrix w = ring_weights(4);
  // (1, 0, -1, 0): each unit's neighbors cancel, We = 0.
  const std::vector<double> e = {1.0, 0.0, -1.0, 0.0};
  CHECK(morans_i(e, w) == 0.0);
}

TEST_CASE("morans_i: SAR residuals with rho = 0.6 are positively correlated") {
  const auto pts = synthetic_world(115);
  const WeightMatrix w = row_standardize(build_knn(pts, 8));
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const Eigen::VectorXd y =
        sar_simulate(w, Eigen::MatrixXd(115, 0), Eigen::VectorXd(), 0.6, 1.0,
                     seed);
    const Eigen::VectorXd centered = y.array() - y.mean();
    CHECK(morans_i(centered, w) > 0.0);
  }
}

TEST_CASE("morans_i: zero vector is an error, scaling cancels") {
  const WeightMatrix w = ring_weights(4);
  CHECK_THROWS_AS(morans_i(std::vector<double>(4, 0.0), w), ValidationError);
  const std::vector<double> e = {0.3, -1.2, 0.5, 0.4};
  std::vector<double> e1000 = e;
  for (double& v : e1000) v *= 1000.0;
  CHECK(morans_i(e, w) == doctest::Approx(morans_i(e1000, w)).epsilon(1e-12));
}

TEST_CASE("moran_test_residuals: permutation basics") {
  const auto pts = synthetic_world(40);
  const WeightMatrix w = row_standardize(build_knn(pts, 4));
  const Eigen::VectorXd y = gaussian_vector(40, 99);
  const Eigen::MatrixXd x(40, 0);

  CHECK_THROWS_AS(moran_test_residuals(y, x, w, MoranMethod::Permutation,
                                       MoranAlternative::Greater, 10),
                  ValidationError);

  const MoranResult r = moran_test_residuals(y, x, w);
  CHECK(r.permutations == 999);
  CHECK(r.p >= 1.0 / 1000.0);
  CHECK(r.p <= 1.0);

  // Reproducible given the seed.
  const MoranResult r2 = moran_test_residuals(y, x, w);
  CHECK(r.p == r2.p);
  CHECK(r.I == r2.I);
}

TEST_CASE("moran_test_residuals: close to uniform under the null") {
  const auto pts = synthetic_world(115);
  const WeightMatrix w = row_standardize(build_knn(pts, 8));
  const Eigen::MatrixXd x(115, 0);
  int rejections = 0;
  const int reps = 500;
  for (int r = 0; r < reps; ++r) {
    const Eigen::VectorXd y = gaussian_vector(115, 1000 + r);
    const MoranResult res = moran_test_residuals(
        y, x, w, MoranMethod::Permutation, MoranAlternative::Greater, 199,
        SplitMix64::derive(7, r));
    if (res.p <= 0.05) ++rejections;
  }
  const double rate = static_cast<double>(rejections) / reps;
  CHECK(rate > 0.02);
  CHECK(rate < 0.08);
}

TEST_CASE("moran_test_residuals: strong SAR signal is detected") {
  const auto pts = synthetic_world(115);
  const WeightMatrix w = row_standardize(build_knn(pts, 8));
  const Eigen::MatrixXd x(115, 0);
  int low = 0;
  const int reps = 30;
  for (int r = 0; r < reps; ++r) {
    const Eigen::VectorXd y = sar_simulate(w, Eigen::MatrixXd(115, 0),
                                           Eigen::VectorXd(), 0.6, 1.0,
                                           5000 + r);
    const MoranResult res = moran_test_residuals(
        y, x, w, MoranMethod::Permutation, MoranAlternative::Greater, 999,
        SplitMix64::derive(8, r));
    if (res.p < 0.01) ++low;
  }
  CHECK(low >= 25);
}

TEST_CASE("moran_test_residuals: normal approximation agrees with permutation") {
  const auto pts = synthetic_world(115);
  const WeightMatrix w = row_standardize(build_knn(pts, 6));
  for (int r = 0; r < 20; ++r) {
    Eigen::MatrixXd x = gaussian_matrix(115, 3, 40 + r);
    Eigen::VectorXd y = gaussian_vector(115, 90 + r);
    const MoranResult perm = moran_test_residuals(
        y, x, w, MoranMethod::Permutation, MoranAlternative::Greater, 1999,
        SplitMix64::derive(9, r));
    const MoranResult normal = moran_test_residuals(
        y, x, w, MoranMethod::NormalApprox, MoranAlternative::Greater);
    CHECK(std::abs(perm.p - normal.p) < 0.05);
  }
}

TEST_CASE("moran_test_residuals: rank-deficient design is rejected") {
  const auto pts = synthetic_world(30);
  const WeightMatrix w = row_standardize(build_knn(pts, 3));
  Eigen::MatrixXd x(30, 2);
  x.col(0) = gaussian_vector(30, 1);
  x.col(1) = 2.0 * x.col(0);
  CHECK_THROWS_AS(
      moran_test_residuals(gaussian_vector(30, 2), x, w), ValidationError);
}

TEST_CASE("residual moran z: two-sided and greater are consistent") {
  const auto pts = synthetic_world(80);
  const WeightMatrix w = row_standardize(build_knn(pts, 5));
  const Eigen::MatrixXd x = gaussian_matrix(80, 2, 3);
  const Eigen::VectorXd y =
      sar_simulate(w, x, Eigen::Vector2d(0.4, 0.3), 0.5, 1.0, 4);
  const MoranResult greater = moran_test_residuals(
      y, x, w, MoranMethod::NormalApprox, MoranAlternative::Greater);
  const MoranResult two = moran_test_residuals(
      y, x, w, MoranMethod::NormalApprox, MoranAlternative::TwoSided);
  CHECK(greater.z == two.z);
  CHECK(greater.z > 0.0);
  CHECK(two.p == doctest::Approx(2.0 * greater.p).epsilon(1e-12));
}
