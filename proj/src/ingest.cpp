#include "esfbma/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "esfbma/errors.hpp"
#include "esfbma/io_util.hpp"

namespace esfbma {

std::vector<PanelRow> parse_panel_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("panel CSV: empty file");
  auto header = split_csv_line(line);
  if (header.size() != 4 || trim(header[0]) != "unit_id" ||
      trim(header[1]) != "year" || trim(header[2]) != "variable" ||
      trim(header[3]) != "value")
    throw ValidationError(
        "panel CSV: expected header 'unit_id,year,variable,value'");
  std::vector<PanelRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    const std::string ctx = "panel CSV line " + std::to_string(lineno);
    if (f.size() != 4) throw ValidationError(ctx + ": expected 4 fields");
    PanelRow r;
    r.unit_id = trim(f[0]);
    if (!valid_identifier(r.unit_id))
      throw ValidationError(ctx + ": invalid unit_id '" + r.unit_id + "'");
    r.year = static_cast<int>(parse_long(f[1], ctx));
    r.variable = trim(f[2]);
    if (!valid_identifier(r.variable))
      throw ValidationError(ctx + ": invalid variable name '" + r.variable +
                            "'");
    r.value = parse_double(f[3], ctx);
    if (!std::isfinite(r.value))
      throw ValidationError(ctx + ": non-finite value");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string serialize_panel_csv(const std::vector<PanelRow>& rows) {
  std::string out = "unit_id,year,variable,value\n";
  for (const PanelRow& r : rows) {
    out += r.unit_id + ',' + std::to_string(r.year) + ',' + r.variable + ',' +
           format_double(r.value) + '\n';
  }
  return out;
}

VariableManifest parse_variable_manifest_json(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("variable manifest: ") + e.what());
  }
  if (!j.is_object())
    throw ValidationError("variable manifest: expected a JSON object");
  VariableManifest manifest;
  for (const auto& [name, spec] : j.items()) {
    if (!valid_identifier(name))
      throw ValidationError("variable manifest: invalid name '" + name + "'");
    VariableSpec v;
    if (!spec.is_object())
      throw ValidationError("variable manifest: entry for '" + name +
                            "' must be an object");
    const std::string role = spec.value("role", "covariate");
    if (role == "outcome")
      v.role = VariableSpec::Role::Outcome;
    else if (role == "covariate")
      v.role = VariableSpec::Role::Covariate;
    else
      throw ValidationError("variable manifest: unknown role '" + role +
                            "' for '" + name + "'");
    v.group = spec.value("group", "");
    if (spec.contains("dummy")) v.dummy = spec.at("dummy").get<bool>();
    manifest.emplace_back(name, std::move(v));
  }
  return manifest;
}

CrossSection average_panel(const std::vector<PanelRow>& rows, int year_from,
                           int year_to) {
  if (year_from > year_to)
    throw ValidationError("average_panel: empty year range");

  std::set<std::string> unit_set;
  std::set<std::string> var_set;
  for (const PanelRow& r : rows) {
    if (r.year < year_from || r.year > year_to) continue;
    unit_set.insert(r.unit_id);
    var_set.insert(r.variable);
  }
  if (unit_set.empty())
    throw ValidationError("average_panel: no rows inside the year range");

  CrossSection cs;
  cs.unit_ids.assign(unit_set.begin(), unit_set.end());
  cs.variables.assign(var_set.begin(), var_set.end());
  const int n = static_cast<int>(cs.unit_ids.size());
  const int v = static_cast<int>(cs.variables.size());
  std::map<std::string, int> unit_of;
  std::map<std::string, int> var_of;
  for (int i = 0; i < n; ++i) unit_of[cs.unit_ids[i]] = i;
  for (int j = 0; j < v; ++j) var_of[cs.variables[j]] = j;

  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n, v);
  cs.year_counts = Eigen::MatrixXi::Zero(n, v);
  std::set<std::tuple<int, int, int>> seen;
  for (const PanelRow& r : rows) {
    if (r.year < year_from || r.year > year_to) continue;
    const int i = unit_of[r.unit_id];
    const int j = var_of[r.variable];
    if (!seen.insert({i, j, r.year}).second)
      throw ValidationError("average_panel: duplicate observation for (" +
                            r.unit_id + ", " + r.variable + ", " +
                            std::to_string(r.year) + ")");
    sums(i, j) += r.value;
    cs.year_counts(i, j) += 1;
  }

  std::string missing;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < v; ++j)
      if (cs.year_counts(i, j) == 0)
        missing += " (" + cs.unit_ids[i] + ", " + cs.variables[j] + ")";
  if (!missing.empty())
    throw ValidationError("average_panel: units with no observations:" +
                          missing);

  cs.values = sums.array() / cs.year_counts.array().cast<double>();
  return cs;
}

std::vector<bool> detect_dummies(const CrossSection& cs) {
  std::vector<bool> out(cs.variables.size(), false);
  for (int j = 0; j < static_cast<int>(cs.variables.size()); ++j) {
    bool dummy = true;
    for (int i = 0; i < cs.values.rows(); ++i) {
      const double x = cs.values(i, j);
      if (x != 0.0 && x != 1.0) {
        dummy = false;
        break;
      }
    }
    out[j] = dummy;
  }
  return out;
}

namespace {

int column_of(const CrossSection& cs, const std::string& name) {
  for (int j = 0; j < static_cast<int>(cs.variables.size()); ++j)
    if (cs.variables[j] == name) return j;
  return -1;
}

}  // namespace

Dataset standardize(const CrossSection& cs, const VariableManifest& manifest,
                    std::span<const GeoPoint> coordinates) {
  const int n = static_cast<int>(cs.unit_ids.size());
  if (n < 3) throw ValidationError("standardize: need at least 3 units");

  std::string outcome_name;
  std::vector<std::pair<std::string, VariableSpec>> covariates;
  for (const auto& [name, spec] : manifest) {
    if (spec.role == VariableSpec::Role::Outcome) {
      if (!outcome_name.empty())
        throw ValidationError("variable manifest: more than one outcome");
      outcome_name = name;
    } else {
      covariates.emplace_back(name, spec);
    }
  }
  if (outcome_name.empty())
    throw ValidationError("variable manifest: no outcome variable");

  const std::vector<bool> detected = detect_dummies(cs);

  Dataset ds;
  ds.unit_ids = cs.unit_ids;
  ds.outcome_name = outcome_name;
  ds.covariate_names.reserve(covariates.size());
  ds.X.resize(n, static_cast<int>(covariates.size()));
  ds.y.resize(n);
  ds.dummy.resize(covariates.size());

  auto standardize_column = [&](const Eigen::VectorXd& col,
                                const std::string& name,
                                bool as_dummy) -> Eigen::VectorXd {
    if (as_dummy) {
      ds.standardization.variables.push_back(name);
      ds.standardization.mean.push_back(0.0);
      ds.standardization.sd.push_back(1.0);
      ds.standardization.is_dummy.push_back(true);
      return col;
    }
    const double mean = col.mean();
    const double sd =
        std::sqrt((col.array() - mean).square().sum() / (n - 1));
    if (!(sd > 0.0))
      throw ValidationError("standardize: zero variance in column '" + name +
                            "'");
    ds.standardization.variables.push_back(name);
    ds.standardization.mean.push_back(mean);
    ds.standardization.sd.push_back(sd);
    ds.standardization.is_dummy.push_back(false);
    return (col.array() - mean) / sd;
  };

  const int yc = column_of(cs, outcome_name);
  if (yc < 0)
    throw ValidationError("standardize: outcome '" + outcome_name +
                          "' missing from the cross-section");
  ds.y = standardize_column(cs.values.col(yc), outcome_name, false);

  for (std::size_t c = 0; c < covariates.size(); ++c) {
    const auto& [name, spec] = covariates[c];
    const int j = column_of(cs, name);
    if (j < 0)
      throw ValidationError("standardize: covariate '" + name +
                            "' missing from the cross-section");
    const bool is_dummy = spec.dummy.value_or(detected[j]);
    ds.dummy[c] = is_dummy;
    ds.covariate_names.push_back(name);
    ds.X.col(static_cast<int>(c)) =
        standardize_column(cs.values.col(j), name, is_dummy);
  }

  // Attach coordinates in unit order.
  std::map<std::string, GeoPoint> by_id;
  for (const GeoPoint& p : coordinates) by_id[p.unit_id] = p;
  std::string missing;
  for (const std::string& id : ds.unit_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      missing += " " + id;
    else
      ds.points.push_back(it->second);
  }
  if (!missing.empty())
    throw ValidationError("standardize: coordinates missing for units:" +
                          missing);
  return ds;
}

Dataset build_dataset(const std::vector<PanelRow>& rows,
                      const VariableManifest& manifest,
                      std::span<const GeoPoint> coordinates, int year_from,
                      int year_to, std::optional<int> outcome_year) {
  CrossSection cs = average_panel(rows, year_from, year_to);

  std::string outcome_name;
  for (const auto& [name, spec] : manifest)
    if (spec.role == VariableSpec::Role::Outcome) outcome_name = name;
  if (outcome_name.empty())
    throw ValidationError("variable manifest: no outcome variable");
  const int yc = column_of(cs, outcome_name);
  if (yc < 0)
    throw ValidationError("build_dataset: outcome '" + outcome_name +
                          "' not present in the panel");

  // The outcome enters at a single reference year, not averaged.
  const int target_year = outcome_year.value_or(year_to);
  std::map<std::string, double> outcome_at;
  for (const PanelRow& r : rows)
    if (r.variable == outcome_name && r.year == target_year)
      outcome_at[r.unit_id] = r.value;
  std::string missing;
  for (int i = 0; i < static_cast<int>(cs.unit_ids.size()); ++i) {
    auto it = outcome_at.find(cs.unit_ids[i]);
    if (it == outcome_at.end()) {
      missing += " " + cs.unit_ids[i];
      continue;
    }
    cs.values(i, yc) = it->second;
    cs.year_counts(i, yc) = 1;
  }
  if (!missing.empty())
    throw ValidationError("build_dataset: outcome '" + outcome_name +
                          "' missing at year " + std::to_string(target_year) +
                          " for units:" + missing);

  return standardize(cs, manifest, coordinates);
}

double destandardize(const StandardizationRecord& record,
                     const std::string& variable, double standardized_value) {
  for (std::size_t i = 0; i < record.variables.size(); ++i) {
    if (record.variables[i] == variable)
      return standardized_value * record.sd[i] + record.mean[i];
  }
  throw ValidationError("destandardize: unknown variable '" + variable + "'");
}

}  // namespace esfbma
