#include "esfbma/weights.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "esfbma/errors.hpp"

namespace esfbma {

std::size_t NeighborList::total_links() const {
  std::size_t t = 0;
  for (const auto& row : entries) t += row.size();
  return t;
}

bool NeighborList::binary_weights() const {
  for (const auto& row : entries)
    for (const auto& e : row)
      if (e.weight != 1.0) return false;
  return true;
}

void NeighborList::validate() const {
  const int count = n();
  if (static_cast<int>(entries.size()) != count)
    throw ValidationError("neighbor list: entries/unit_ids size mismatch");
  for (int i = 0; i < count; ++i) {
    int prev = -1;
    for (const auto& e : entries[i]) {
      if (e.index < 0 || e.index >= count)
        throw ValidationError("neighbor list: index out of range for unit " +
                              unit_ids[i]);
      if (e.index == i)
        throw ValidationError("neighbor list: self link for unit " +
                              unit_ids[i]);
      if (e.index <= prev)
        throw ValidationError("neighbor list: unsorted or duplicate entry for unit " +
                              unit_ids[i]);
      if (!(e.weight > 0.0))
        throw ValidationError("neighbor list: non-positive weight for unit " +
                              unit_ids[i]);
      prev = e.index;
    }
  }
}

WeightMatrix::WeightMatrix(std::vector<std::string> unit_ids,
                           std::vector<std::vector<NeighborEntry>> rows)
    : unit_ids_(std::move(unit_ids)), rows_(std::move(rows)) {}

double WeightMatrix::sum_weights() const {
  double s = 0.0;
  for (const auto& row : rows_)
    for (const auto& e : row) s += e.weight;
  return s;
}

void WeightMatrix::multiply(std::span<const double> v,
                            std::span<double> out) const {
  for (int i = 0; i < n(); ++i) {
    double acc = 0.0;
    for (const auto& e : rows_[i]) acc += e.weight * v[e.index];
    out[i] = acc;
  }
}

Eigen::VectorXd WeightMatrix::multiply(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(n());
  multiply(std::span<const double>(v.data(), v.size()),
           std::span<double>(out.data(), out.size()));
  return out;
}

Eigen::MatrixXd WeightMatrix::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n(), n());
  for (int i = 0; i < n(); ++i)
    for (const auto& e : rows_[i]) m(i, e.index) = e.weight;
  return m;
}

namespace {

void sort_rows(NeighborList& nl) {
  for (auto& row : nl.entries)
    std::sort(row.begin(), row.end(),
              [](const NeighborEntry& a, const NeighborEntry& b) {
                return a.index < b.index;
              });
}

int unit_index(const NeighborList& nl, const std::string& id) {
  for (int i = 0; i < nl.n(); ++i)
    if (nl.unit_ids[i] == id) return i;
  return -1;
}

}  // namespace

NeighborList build_knn(std::span<const GeoPoint> points, int k, int threads) {
  const int n = static_cast<int>(points.size());
  if (k <= 0) throw ValidationError("knn: k must be positive");
  if (k >= n)
    throw ValidationError("knn: k=" + std::to_string(k) +
                          " must be smaller than n=" + std::to_string(n));
  validate_points(points);
  require_distinct_coordinates(points);

  const std::vector<double> dist = pairwise_distance_matrix(points, threads);

  NeighborList nl;
  nl.builder_tag = "knn(" + std::to_string(k) + ")";
  nl.unit_ids.reserve(n);
  for (const auto& p : points) nl.unit_ids.push_back(p.unit_id);
  nl.entries.assign(n, {});

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) {
    order.clear();
    for (int j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    // Ties in distance fall back to ascending unit_id.
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double da = dist[static_cast<std::size_t>(i) * n + a];
      const double db = dist[static_cast<std::size_t>(i) * n + b];
      if (da != db) return da < db;
      return points[a].unit_id < points[b].unit_id;
    });
    for (int r = 0; r < k; ++r)
      nl.entries[i].push_back({order[r], 1.0});
  }
  sort_rows(nl);
  nl.validate();
  return nl;
}

NeighborList build_distance_band(std::span<const GeoPoint> points,
                                 double d_max_km, bool inverse, int threads) {
  const int n = static_cast<int>(points.size());
  if (!(d_max_km > 0.0))
    throw ValidationError("distance band: d_max_km must be > 0");
  validate_points(points);
  require_distinct_coordinates(points);

  const std::vector<double> dist = pairwise_distance_matrix(points, threads);

  NeighborList nl;
  {
    std::ostringstream tag;
    tag << (inverse ? "inverse-band(" : "band(") << d_max_km << ")";
    nl.builder_tag = tag.str();
  }
  nl.unit_ids.reserve(n);
  for (const auto& p : points) nl.unit_ids.push_back(p.unit_id);
  nl.entries.assign(n, {});

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = dist[static_cast<std::size_t>(i) * n + j];
      if (d < d_max_km)
        nl.entries[i].push_back({j, inverse ? 1.0 / d : 1.0});
    }
  }
  nl.validate();
  return nl;
}

std::vector<int> find_islands(const NeighborList& nl) {
  std::vector<int> islands;
  for (int i = 0; i < nl.n(); ++i)
    if (nl.entries[i].empty()) islands.push_back(i);
  return islands;
}

NeighborList apply_island_patches(const NeighborList& nl,
                                  std::span<const IslandPatch> patches,
                                  std::span<const GeoPoint> points,
                                  bool force) {
  NeighborList out = nl;
  for (const IslandPatch& patch : patches) {
    const int i = unit_index(out, patch.island);
    if (i < 0)
      throw ValidationError("island patch: unknown unit_id '" + patch.island +
                            "'");
    if (!out.entries[i].empty() && !force)
      throw ValidationError("island patch: unit '" + patch.island +
                            "' is not an island (pass force to patch anyway)");
    for (const IslandPatch::Added& add : patch.neighbors) {
      const int j = unit_index(out, add.unit_id);
      if (j < 0)
        throw ValidationError("island patch: unknown neighbor unit_id '" +
                              add.unit_id + "'");
      if (j == i)
        throw ValidationError("island patch: self link for '" + patch.island +
                              "'");
      double w = 1.0;
      if (patch.rule == IslandPatch::Rule::InverseDistance) {
        double km = add.km;
        if (km <= 0.0) {
          if (points.empty())
            throw ValidationError(
                "island patch: inverse-distance rule needs km or coordinates");
          const GeoPoint* a = nullptr;
          const GeoPoint* b = nullptr;
          for (const GeoPoint& p : points) {
            if (p.unit_id == patch.island) a = &p;
            if (p.unit_id == add.unit_id) b = &p;
          }
          if (a == nullptr || b == nullptr)
            throw ValidationError(
                "island patch: coordinates missing for patch pair " +
                patch.island + "/" + add.unit_id);
          km = great_circle_km(*a, *b);
        }
        if (!(km > 0.0))
          throw ValidationError("island patch: non-positive distance for " +
                                patch.island + "/" + add.unit_id);
        w = 1.0 / km;
      }
      auto upsert = [&](int row, int col) {
        for (auto& e : out.entries[row])
          if (e.index == col) {
            e.weight = w;
            return;
          }
        out.entries[row].push_back({col, w});
      };
      upsert(i, j);
      upsert(j, i);
    }
    out.patches.push_back(patch);
  }
  for (auto& row : out.entries)
    std::sort(row.begin(), row.end(),
              [](const NeighborEntry& a, const NeighborEntry& b) {
                return a.index < b.index;
              });
  out.validate();
  return out;
}

MatrixStats matrix_stats(const NeighborList& nl) {
  MatrixStats s;
  const int n = nl.n();
  if (n == 0) return s;
  s.min_links = static_cast<int>(nl.entries[0].size());
  s.max_links = 0;
  std::size_t total = 0;
  for (const auto& row : nl.entries) {
    const int links = static_cast<int>(row.size());
    s.min_links = std::min(s.min_links, links);
    s.max_links = std::max(s.max_links, links);
    total += row.size();
  }
  s.avg_links = static_cast<double>(total) / n;
  s.pct_nonzero =
      100.0 * static_cast<double>(total) / (static_cast<double>(n) * n);
  return s;
}

WeightMatrix row_standardize(const NeighborList& nl) {
  nl.validate();
  const std::vector<int> islands = find_islands(nl);
  if (!islands.empty()) {
    std::vector<std::string> ids;
    std::string msg = "cannot row-standardize, neighborless units:";
    for (int i : islands) {
      ids.push_back(nl.unit_ids[i]);
      msg += " " + nl.unit_ids[i];
    }
    throw IslandError(msg, std::move(ids));
  }
  std::vector<std::vector<NeighborEntry>> rows = nl.entries;
  for (auto& row : rows) {
    double sum = 0.0;
    for (const auto& e : row) sum += e.weight;
    for (auto& e : row) e.weight /= sum;
  }
  return WeightMatrix(nl.unit_ids, std::move(rows));
}

NeighborList align_to_units(const NeighborList& nl,
                            std::span<const std::string> unit_order) {
  if (static_cast<int>(unit_order.size()) != nl.n())
    throw ValidationError("align_to_units: unit count mismatch");
  std::map<std::string, int> src;
  for (int i = 0; i < nl.n(); ++i) src[nl.unit_ids[i]] = i;
  std::vector<int> old_of_new(unit_order.size());
  std::vector<int> new_of_old(unit_order.size());
  for (std::size_t i = 0; i < unit_order.size(); ++i) {
    auto it = src.find(std::string(unit_order[i]));
    if (it == src.end())
      throw ValidationError("align_to_units: unit '" + unit_order[i] +
                            "' missing from neighbor list");
    old_of_new[i] = it->second;
    new_of_old[it->second] = static_cast<int>(i);
  }
  NeighborList out;
  out.builder_tag = nl.builder_tag;
  out.patches = nl.patches;
  out.unit_ids.assign(unit_order.begin(), unit_order.end());
  out.entries.resize(unit_order.size());
  for (std::size_t i = 0; i < unit_order.size(); ++i) {
    for (const auto& e : nl.entries[old_of_new[i]])
      out.entries[i].push_back({new_of_old[e.index], e.weight});
    std::sort(out.entries[i].begin(), out.entries[i].end(),
              [](const NeighborEntry& a, const NeighborEntry& b) {
                return a.index < b.index;
              });
  }
  out.validate();
  return out;
}

}  // namespace esfbma
