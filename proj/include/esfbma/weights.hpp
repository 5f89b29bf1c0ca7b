#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "esfbma/geo.hpp"

namespace esfbma {

struct NeighborEntry {
  int index = -1;       // neighbor position within the unit list
  double weight = 0.0;  // raw (pre-standardization) weight, > 0

  friend bool operator==(const NeighborEntry&, const NeighborEntry&) = default;
};

struct IslandPatch {
  enum class Rule { Binary, InverseDistance };

  struct Added {
    std::string unit_id;
    // Distance in km used for inverse-distance weights; <= 0 means "compute
    // from coordinates".
    double km = 0.0;
  };

  std::string island;
  std::vector<Added> neighbors;
  Rule rule = Rule::Binary;
};

// Sparse neighbor structure before row standardization. Entries per unit are
// kept sorted by neighbor index; patched links carry patched=true provenance
// in the patches list.
struct NeighborList {
  std::vector<std::string> unit_ids;
  std::vector<std::vector<NeighborEntry>> entries;
  std::string builder_tag;  // "queen-file", "knn(4)", "band(1500)", ...
  std::vector<IslandPatch> patches;

  int n() const { return static_cast<int>(unit_ids.size()); }
  std::size_t total_links() const;
  bool binary_weights() const;
  void validate() const;  // no self links, indices in range, weights > 0
};

struct MatrixStats {
  int min_links = 0;
  int max_links = 0;
  double avg_links = 0.0;
  double pct_nonzero = 0.0;  // 100 * total links / n^2
};

// Row-standardized weight matrix: every row sums to 1.
class WeightMatrix {
 public:
  WeightMatrix() = default;
  WeightMatrix(std::vector<std::string> unit_ids,
               std::vector<std::vector<NeighborEntry>> rows);

  int n() const { return static_cast<int>(unit_ids_.size()); }
  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  const std::vector<std::vector<NeighborEntry>>& rows() const { return rows_; }
  bool standardized() const { return true; }

  // S0 = sum of all weights (= n for a row-standardized matrix).
  double sum_weights() const;

  // out = W * v
  void multiply(std::span<const double> v, std::span<double> out) const;
  Eigen::VectorXd multiply(const Eigen::VectorXd& v) const;

  Eigen::MatrixXd dense() const;

 private:
  std::vector<std::string> unit_ids_;
  std::vector<std::vector<NeighborEntry>> rows_;
};

// k nearest neighbors by great-circle distance, raw weight 1. Distance ties
// are broken by ascending unit_id so chains are reproducible.
NeighborList build_knn(std::span<const GeoPoint> points, int k,
                       int threads = 1);

// Link (i, j) iff great-circle distance < d_max_km (strict). Raw weight is 1,
// or 1/distance_km when inverse is set. Zero-link units are kept; they
// surface in find_islands / row_standardize.
NeighborList build_distance_band(std::span<const GeoPoint> points,
                                 double d_max_km, bool inverse,
                                 int threads = 1);

// Indices of units with no links.
std::vector<int> find_islands(const NeighborList& nl);

// Adds the patch links in both directions and records provenance. A patch
// whose target still has links is rejected unless force is set.
NeighborList apply_island_patches(const NeighborList& nl,
                                  std::span<const IslandPatch> patches,
                                  std::span<const GeoPoint> points = {},
                                  bool force = false);

MatrixStats matrix_stats(const NeighborList& nl);

// Divides every row by its raw sum. Throws IslandError listing all zero-link
// units if any remain.
WeightMatrix row_standardize(const NeighborList& nl);

// Reorders a neighbor list to match the given unit order; throws if the id
// sets differ.
NeighborList align_to_units(const NeighborList& nl,
                            std::span<const std::string> unit_order);

}  // namespace esfbma
