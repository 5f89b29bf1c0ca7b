// Benchmark comparing the serial reference kernels against the OpenMP paths:
// pairwise great-circle distances, Moran permutation draws and exact BMA
// enumeration.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "esfbma/bma.hpp"
#include "esfbma/geo.hpp"
#include "esfbma/moran.hpp"
#include "esfbma/rng.hpp"
#include "esfbma/sar.hpp"
#include "esfbma/weights.hpp"

using namespace esfbma;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

std::vector<GeoPoint> scatter_points(int n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<GeoPoint> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    GeoPoint p;
    p.unit_id = "P" + std::to_string(i);
    p.lat = -80.0 + 160.0 * rng.next_double();
    p.lon = -179.0 + 359.0 * rng.next_double();
    pts.push_back(p);
  }
  return pts;
}

void print_row(const char* kernel, double serial_s, double parallel_s,
               int threads) {
  std::printf("%-28s %10.3fs %10.3fs   x%.2f (%d threads)\n", kernel, serial_s,
              parallel_s, serial_s / parallel_s, threads);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel benchmark"};
  int threads = 2;
  int distance_n = 3000;
  int permutations = 40000;
  int enum_covariates = 15;
  app.add_option("--threads", threads, "OpenMP thread count");
  app.add_option("--distance-n", distance_n, "points for the distance kernel");
  app.add_option("--permutations", permutations,
                 "draws for the Moran permutation kernel");
  app.add_option("--enum-covariates", enum_covariates,
                 "covariates for the enumeration kernel (2^k models per z)");
  CLI11_PARSE(app, argc, argv);

  std::printf("%-28s %11s %11s\n", "kernel", "serial", "parallel");

  {
    const auto pts = scatter_points(distance_n, 1);
    auto t0 = std::chrono::steady_clock::now();
    const auto serial = reference::pairwise_distance_matrix(pts);
    const double ts = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto parallel = pairwise_distance_matrix(pts, threads);
    const double tp = seconds_since(t0);
    if (serial != parallel) {
      std::fprintf(stderr, "distance kernel mismatch\n");
      return 1;
    }
    print_row("pairwise distances", ts, tp, threads);
  }

  {
    const auto pts = scatter_points(400, 2);
    const WeightMatrix w = row_standardize(build_knn(pts, 8, threads));
    const Eigen::VectorXd e = gaussian_vector(400, 3);
    const std::span<const double> es(e.data(), e.size());
    const double i_obs = morans_i(es, w);
    auto t0 = std::chrono::steady_clock::now();
    const auto serial =
        reference::permutation_counts(es, w, i_obs, permutations, 4);
    const double ts = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto parallel =
        permutation_counts(es, w, i_obs, permutations, 4, threads);
    const double tp = seconds_since(t0);
    if (serial != parallel) {
      std::fprintf(stderr, "permutation kernel mismatch\n");
      return 1;
    }
    print_row("moran permutations", ts, tp, threads);
  }

  {
    const int n = 200;
    const Eigen::MatrixXd x = gaussian_matrix(n, enum_covariates, 5);
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(enum_covariates);
    lambda(0) = 0.5;
    lambda(1) = 0.4;
    const Eigen::VectorXd y = x * lambda + gaussian_vector(n, 6);
    ModelEvaluator ev(y, x, {}, static_cast<double>(n));
    std::vector<std::string> names;
    for (int j = 0; j < enum_covariates; ++j)
      names.push_back("x" + std::to_string(j));
    const std::uint64_t cap = 1ull << 26;

    auto t0 = std::chrono::steady_clock::now();
    const PosteriorSummary serial =
        reference::exact_bma(ev, ModelPrior{}, names, cap);
    const double ts = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const PosteriorSummary parallel =
        exact_bma(ev, ModelPrior{}, names, cap, threads);
    const double tp = seconds_since(t0);
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (std::abs(serial.variables[j].pip - parallel.variables[j].pip) >
          1e-10) {
        std::fprintf(stderr, "enumeration kernel mismatch\n");
        return 1;
      }
    }
    print_row("exact bma enumeration", ts, tp, threads);
  }

  return 0;
}
