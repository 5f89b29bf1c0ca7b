#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "esfbma/geo.hpp"

namespace esfbma {

// Long-format panel row: "unit_id,year,variable,value".
struct PanelRow {
  std::string unit_id;
  int year = 0;
  std::string variable;
  double value = 0.0;
};

std::vector<PanelRow> parse_panel_csv(const std::string& text);
std::string serialize_panel_csv(const std::vector<PanelRow>& rows);

struct VariableSpec {
  enum class Role { Outcome, Covariate };
  Role role = Role::Covariate;
  std::string group;
  std::optional<bool> dummy;  // unset -> detected from the data
};

// Ordered: the file order defines the covariate column order.
using VariableManifest = std::vector<std::pair<std::string, VariableSpec>>;

VariableManifest parse_variable_manifest_json(const std::string& text);

struct CrossSection {
  std::vector<std::string> unit_ids;  // ascending unit_id
  std::vector<std::string> variables;
  Eigen::MatrixXd values;             // units x variables
  Eigen::MatrixXi year_counts;        // contributing years per cell
};

// Per-unit arithmetic mean over the years available inside [year_from,
// year_to]. A unit with zero observations for some variable is a hard error
// naming (unit, variable).
CrossSection average_panel(const std::vector<PanelRow>& rows, int year_from,
                           int year_to);

// A column is a dummy iff every value is exactly 0 or 1.
std::vector<bool> detect_dummies(const CrossSection& cs);

struct StandardizationRecord {
  std::vector<std::string> variables;  // outcome first, then covariates
  std::vector<double> mean;
  std::vector<double> sd;              // sample SD, n-1 denominator
  std::vector<bool> is_dummy;          // dummies pass through untouched
};

struct Dataset {
  std::vector<std::string> unit_ids;
  std::vector<GeoPoint> points;
  std::string outcome_name;
  Eigen::VectorXd y;
  std::vector<std::string> covariate_names;
  Eigen::MatrixXd X;
  std::vector<bool> dummy;  // per covariate
  StandardizationRecord standardization;
};

// Z-scores every non-dummy column (and the outcome) with the sample SD;
// dummies pass through. Covariate order follows the manifest. Coordinates
// must cover every unit; extras are ignored.
Dataset standardize(const CrossSection& cs, const VariableManifest& manifest,
                    std::span<const GeoPoint> coordinates);

// Full ingest pipeline: average covariates over [year_from, year_to], take
// the outcome at outcome_year (default year_to), then standardize.
Dataset build_dataset(const std::vector<PanelRow>& rows,
                      const VariableManifest& manifest,
                      std::span<const GeoPoint> coordinates, int year_from,
                      int year_to,
                      std::optional<int> outcome_year = std::nullopt);

// Inverse of the standardization for one variable, for audits and tests.
double destandardize(const StandardizationRecord& record,
                     const std::string& variable, double standardized_value);

}  // namespace esfbma
