#include "esfbma/geo.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <utility>

#include "esfbma/errors.hpp"
#include "esfbma/io_util.hpp"

namespace esfbma {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  const double phi1 = lat1 * kDegToRad;
  const double phi2 = lat2 * kDegToRad;
  const double dphi = (lat2 - lat1) * kDegToRad;
  const double dlam = (lon2 - lon1) * kDegToRad;
  const double s1 = std::sin(0.5 * dphi);
  const double s2 = std::sin(0.5 * dlam);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  if (h > 1.0) h = 1.0;
  if (h < 0.0) h = 0.0;
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

}  // namespace

double great_circle_km(const GeoPoint& a, const GeoPoint& b) {
  return haversine_km(a.lat, a.lon, b.lat, b.lon);
}

void validate_points(std::span<const GeoPoint> points) {
  std::set<std::string> seen;
  for (const GeoPoint& p : points) {
    if (!valid_identifier(p.unit_id))
      throw ValidationError("invalid unit_id: '" + p.unit_id + "'");
    if (!(p.lat >= -90.0 && p.lat <= 90.0))
      throw ValidationError("latitude out of [-90, 90] for unit " + p.unit_id);
    if (!(p.lon > -180.0 && p.lon <= 180.0))
      throw ValidationError("longitude out of (-180, 180] for unit " +
                            p.unit_id);
    if (!seen.insert(p.unit_id).second)
      throw ValidationError("duplicate unit_id: " + p.unit_id);
  }
}

void require_distinct_coordinates(std::span<const GeoPoint> points) {
  std::set<std::pair<double, double>> seen;
  std::vector<std::string> collisions;
  std::set<std::pair<double, double>> reported;
  for (const GeoPoint& p : points) {
    auto key = std::make_pair(p.lat, p.lon);
    if (!seen.insert(key).second && reported.insert(key).second) {
      for (const GeoPoint& q : points) {
        if (q.lat == p.lat && q.lon == p.lon) collisions.push_back(q.unit_id);
      }
    }
  }
  if (!collisions.empty()) {
    std::string msg = "duplicate coordinates for units:";
    for (const std::string& id : collisions) msg += " " + id;
    throw ValidationError(msg);
  }
}

std::vector<double> pairwise_distance_matrix(std::span<const GeoPoint> points,
                                             int threads) {
  const int n = static_cast<int>(points.size());
  std::vector<double> d(static_cast<std::size_t>(n) * n, 0.0);
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads > 0 ? threads : 1) \
    schedule(static)
#endif
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      d[static_cast<std::size_t>(i) * n + j] =
          great_circle_km(points[i], points[j]);
    }
  }
  return d;
}

namespace reference {

std::vector<double> pairwise_distance_matrix(std::span<const GeoPoint> points) {
  const int n = static_cast<int>(points.size());
  std::vector<double> d(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j)
        d[static_cast<std::size_t>(i) * n + j] =
            great_circle_km(points[i], points[j]);
  return d;
}

}  // namespace reference

std::vector<GeoPoint> parse_coordinates_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("coordinates CSV: empty file");
  auto header = split_csv_line(line);
  if (header.size() != 3 || trim(header[0]) != "unit_id" ||
      trim(header[1]) != "lat" || trim(header[2]) != "lon")
    throw ValidationError("coordinates CSV: expected header 'unit_id,lat,lon'");
  std::vector<GeoPoint> points;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 3)
      throw ValidationError("coordinates CSV line " + std::to_string(lineno) +
                            ": expected 3 fields");
    GeoPoint p;
    p.unit_id = trim(f[0]);
    p.lat = parse_double(f[1], "coordinates CSV line " + std::to_string(lineno));
    p.lon = parse_double(f[2], "coordinates CSV line " + std::to_string(lineno));
    points.push_back(std::move(p));
  }
  validate_points(points);
  return points;
}

std::string serialize_coordinates_csv(std::span<const GeoPoint> points) {
  std::string out = "unit_id,lat,lon\n";
  for (const GeoPoint& p : points) {
    out += p.unit_id;
    out += ',';
    out += format_double(p.lat);
    out += ',';
    out += format_double(p.lon);
    out += '\n';
  }
  return out;
}

}  // namespace esfbma
