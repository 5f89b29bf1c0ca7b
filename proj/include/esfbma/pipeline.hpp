#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "esfbma/bma.hpp"
#include "esfbma/filtering.hpp"
#include "esfbma/ingest.hpp"
#include "esfbma/moran.hpp"
#include "esfbma/sampler.hpp"
#include "esfbma/weights.hpp"

namespace esfbma {

struct WeightSpecConfig {
  std::string name;
  std::string builder;  // "knn" | "band" | "inverse-band" | "queen-file"
  int k = 0;
  double d_max_km = 0.0;
  std::string gal_path;      // queen-file only
  std::string sidecar_path;  // optional raw-weight sidecar for queen-file
  std::string patches_path;  // optional island patch file
};

struct FilterConfig {
  double coherence_threshold = 0.25;
  double stop_p = 0.10;
  // Select eigenvectors against the full covariate set (default) or against
  // the intercept-only design.
  bool select_against_full = true;
};

struct RunManifest {
  std::string panel_path;
  std::string coordinates_path;
  std::string variables_path;
  int year_from = 0;
  int year_to = 0;
  std::optional<int> outcome_year;

  std::vector<WeightSpecConfig> weights;  // empty -> non-spatial BMA

  GPrior::Kind gprior = GPrior::Kind::UIP;
  ModelPrior model_prior;
  FilterConfig filtering;
  ChainConfig chain;
  std::uint64_t enumeration_cap = kDefaultEnumerationCap;

  int moran_permutations = 999;
  int moran_top_models = 50;

  std::string output_dir;
};

// Parses the manifest JSON; relative paths resolve against the manifest's
// directory. Referenced files must exist.
RunManifest load_run_manifest(const std::string& path);

struct BuiltWeights {
  std::vector<std::string> names;
  std::vector<NeighborList> lists;     // after patching
  std::vector<WeightMatrix> matrices;  // row-standardized
};

Dataset load_dataset(const RunManifest& manifest);

// Builds every configured weight matrix over the given unit order (island
// errors carry a patch-file hint on the diagnostics stream).
BuiltWeights build_weights(const RunManifest& manifest,
                           std::span<const GeoPoint> points, int threads,
                           std::ostream& diag);

struct FilterOutputs {
  std::vector<EigenCandidates> candidates;
  std::vector<EigenFilterSet> sets;
  std::vector<Eigen::MatrixXd> vectors;  // selected columns per matrix
};

FilterOutputs build_filters(const RunManifest& manifest, const Dataset& ds,
                            const BuiltWeights& weights, int threads);

// Subcommand bodies. Each returns the list of files written; on error any
// partial outputs are removed before the exception propagates.
std::vector<std::string> cmd_weights(const RunManifest& manifest, int threads,
                                     std::ostream& diag);
std::vector<std::string> cmd_filter(const RunManifest& manifest, int threads,
                                    std::ostream& diag);
std::vector<std::string> cmd_run(const RunManifest& manifest, int threads,
                                 std::ostream& diag);
std::vector<std::string> cmd_oracle(const RunManifest& manifest, int threads,
                                    std::ostream& diag);
std::vector<std::string> cmd_moran(const RunManifest& manifest,
                                   MoranMethod method, int permutations,
                                   int threads, std::ostream& diag);

}  // namespace esfbma
