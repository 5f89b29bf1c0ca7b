#include "support/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "esfbma/rng.hpp"
#include "esfbma/sar.hpp"

namespace esfbma::testing {

NeighborList ring_neighbor_list(int n) {
  NeighborList nl;
  nl.builder_tag = "queen-file";
  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "R%02d", i);
    nl.unit_ids.push_back(buf);
  }
  nl.entries.resize(n);
  for (int i = 0; i < n; ++i) {
    const int prev = (i + n - 1) % n;
    const int next = (i + 1) % n;
    nl.entries[i].push_back({std::min(prev, next), 1.0});
    nl.entries[i].push_back({std::max(prev, next), 1.0});
  }
  return nl;
}

WeightMatrix ring_weights(int n) { return row_standardize(ring_neighbor_list(n)); }

std::vector<GeoPoint> capital_fixture() {
  return {
      {"AUS", -35.28, 149.13}, {"NZL", -41.29, 174.78},
      {"LKA", 6.93, 79.85},    {"IND", 28.61, 77.21},
      {"DJI", 11.59, 43.15},   {"KEN", -1.29, 36.82},
      {"PHL", 14.60, 120.98},  {"VNM", 21.03, 105.85},
  };
}

std::vector<GeoPoint> synthetic_world(int n, std::uint64_t seed) {
  // Continent-like cluster centers (lat, lon).
  static constexpr double centers[][2] = {
      {48.0, 12.0},   // Europe
      {8.0, 12.0},    // Africa
      {30.0, 80.0},   // South/Central Asia
      {18.0, 108.0},  // East Asia
      {-12.0, -58.0}, // South America
      {38.0, -95.0},  // North America
      {-25.0, 135.0}, // Oceania
  };
  constexpr int num_clusters = 7;
  SplitMix64 rng(seed);
  std::vector<GeoPoint> points;
  points.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int c = i % num_clusters;
    GeoPoint p;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "U%03d", i);
    p.unit_id = buf;
    for (;;) {
      p.lat = centers[c][0] + 6.5 * rng.next_normal();
      p.lon = centers[c][1] + 8.0 * rng.next_normal();
      if (p.lat < -85.0 || p.lat > 85.0 || p.lon <= -180.0 || p.lon > 180.0)
        continue;
      bool clash = false;
      for (const auto& q : points)
        if (q.lat == p.lat && q.lon == p.lon) clash = true;
      if (!clash) break;
    }
    points.push_back(p);
  }
  return points;
}

NeighborList symmetrized_knn(std::span<const GeoPoint> points, int k) {
  const NeighborList knn = build_knn(points, k);
  NeighborList out = knn;
  out.builder_tag = "queen-file";
  for (int i = 0; i < knn.n(); ++i) {
    for (const auto& e : knn.entries[i]) {
      bool found = false;
      for (const auto& back : out.entries[e.index])
        if (back.index == i) found = true;
      if (!found) out.entries[e.index].push_back({i, 1.0});
    }
  }
  for (auto& row : out.entries)
    std::sort(row.begin(), row.end(),
              [](const NeighborEntry& a, const NeighborEntry& b) {
                return a.index < b.index;
              });
  out.validate();
  return out;
}

MatrixMenu six_matrix_menu(std::span<const GeoPoint> points) {
  MatrixMenu menu;
  menu.names = {"queen", "4nn", "6nn", "8nn", "band1500", "invband1500"};
  menu.matrices.push_back(row_standardize(symmetrized_knn(points, 3)));
  menu.matrices.push_back(row_standardize(build_knn(points, 4)));
  menu.matrices.push_back(row_standardize(build_knn(points, 6)));
  menu.matrices.push_back(row_standardize(build_knn(points, 8)));
  menu.matrices.push_back(
      row_standardize(build_distance_band(points, 1500.0, false)));
  menu.matrices.push_back(
      row_standardize(build_distance_band(points, 1500.0, true)));
  return menu;
}

Eigen::VectorXd zscore(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  const double sd =
      std::sqrt((v.array() - mean).square().sum() / (v.size() - 1));
  return (v.array() - mean) / sd;
}

Eigen::MatrixXd zscore_columns(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (int j = 0; j < m.cols(); ++j) out.col(j) = zscore(m.col(j));
  return out;
}

SarFixture sar_fixture(const WeightMatrix& w_true, int k, std::uint64_t seed,
                       double sigma) {
  const int n = w_true.n();
  SarFixture fx;
  fx.x = zscore_columns(gaussian_matrix(n, k, SplitMix64::derive(seed, 1)));
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(k);
  lambda(0) = 0.6;
  if (k > 1) lambda(1) = 0.5;
  if (k > 2) lambda(2) = 0.4;
  const Eigen::VectorXd y_raw = sar_simulate(
      w_true, fx.x, lambda, 0.6, sigma, SplitMix64::derive(seed, 2));
  fx.y = zscore(y_raw);
  for (int j = 0; j < k; ++j) fx.names.push_back("x" + std::to_string(j + 1));
  return fx;
}

}  // namespace esfbma::testing
