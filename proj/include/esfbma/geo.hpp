#pragma once

#include <span>
#include <string>
#include <vector>

namespace esfbma {

struct GeoPoint {
  std::string unit_id;
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, (-180, 180]
};

// Mean Earth radius in kilometers; all great-circle distances use a sphere of
// this radius.
inline constexpr double kEarthRadiusKm = 6371.0088;

// Haversine great-circle distance between two valid points, in km.
double great_circle_km(const GeoPoint& a, const GeoPoint& b);

// Checks coordinate bounds and unit-id uniqueness/validity.
void validate_points(std::span<const GeoPoint> points);

// Throws naming the colliding unit ids if two points share coordinates.
void require_distinct_coordinates(std::span<const GeoPoint> points);

// Full n*n great-circle distance matrix, row-major. The parallel kernel
// computes each entry independently, so its output is bit-identical to the
// serial reference at any thread count.
std::vector<double> pairwise_distance_matrix(std::span<const GeoPoint> points,
                                             int threads = 1);

namespace reference {
std::vector<double> pairwise_distance_matrix(std::span<const GeoPoint> points);
}

// Coordinates CSV: header "unit_id,lat,lon", one row per unit.
std::vector<GeoPoint> parse_coordinates_csv(const std::string& text);
std::string serialize_coordinates_csv(std::span<const GeoPoint> points);

}  // namespace esfbma
