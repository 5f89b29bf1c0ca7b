#include "esfbma/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "esfbma/errors.hpp"
#include "esfbma/gal.hpp"
#include "esfbma/io_util.hpp"
#include "esfbma/rng.hpp"

namespace esfbma {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Removes everything written unless commit() was reached.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (committed_) return;
    for (const std::string& path : files_) {
      std::error_code ec;
      fs::remove(path, ec);
    }
  }

  void write(const std::string& path, const std::string& content) {
    write_text_file(path, content);
    files_.push_back(path);
  }

  std::vector<std::string> commit() {
    committed_ = true;
    return files_;
  }

 private:
  std::vector<std::string> files_;
  bool committed_ = false;
};

std::string resolve_path(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_absolute()) return path.string();
  return (base / path).lexically_normal().string();
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path))
    throw ValidationError(what + " does not exist: " + path);
}

std::vector<IslandPatch> parse_patch_file(const std::string& text,
                                          const std::string& path) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("patch file " + path + ": " + e.what());
  }
  if (!j.is_array())
    throw ValidationError("patch file " + path + ": expected a JSON array");
  std::vector<IslandPatch> patches;
  for (const auto& entry : j) {
    IslandPatch p;
    p.island = entry.at("island").get<std::string>();
    const std::string rule = entry.value("rule", "binary");
    if (rule == "binary")
      p.rule = IslandPatch::Rule::Binary;
    else if (rule == "inverse")
      p.rule = IslandPatch::Rule::InverseDistance;
    else
      throw ValidationError("patch file " + path + ": unknown rule '" + rule +
                            "'");
    if (!entry.contains("add") || !entry.at("add").is_array())
      throw ValidationError("patch file " + path +
                            ": every entry needs an 'add' array");
    for (const auto& add : entry.at("add")) {
      IslandPatch::Added a;
      if (add.is_string()) {
        a.unit_id = add.get<std::string>();
      } else {
        a.unit_id = add.at("id").get<std::string>();
        a.km = add.value("km", 0.0);
      }
      p.neighbors.push_back(std::move(a));
    }
    patches.push_back(std::move(p));
  }
  return patches;
}

std::string weights_stats_csv(const BuiltWeights& weights) {
  std::string out = "matrix,min_links,max_links,avg_links,pct_nonzero\n";
  for (std::size_t z = 0; z < weights.lists.size(); ++z) {
    const MatrixStats s = matrix_stats(weights.lists[z]);
    out += weights.names[z];
    out += ',' + std::to_string(s.min_links);
    out += ',' + std::to_string(s.max_links);
    out += ',' + format_fixed(s.avg_links, 2);
    out += ',' + format_fixed(s.pct_nonzero, 2);
    out += '\n';
  }
  return out;
}

ordered_json manifest_echo(const RunManifest& m) {
  ordered_json j;
  j["dataset"] = {{"panel", m.panel_path},
                  {"coordinates", m.coordinates_path},
                  {"variables", m.variables_path},
                  {"year_range", {m.year_from, m.year_to}}};
  if (m.outcome_year.has_value()) j["dataset"]["outcome_year"] = *m.outcome_year;
  ordered_json ws = ordered_json::array();
  for (const auto& w : m.weights) {
    ordered_json e;
    e["name"] = w.name;
    e["builder"] = w.builder;
    if (w.builder == "knn") e["k"] = w.k;
    if (w.builder == "band" || w.builder == "inverse-band")
      e["d_max_km"] = w.d_max_km;
    if (!w.gal_path.empty()) e["gal"] = w.gal_path;
    if (!w.sidecar_path.empty()) e["sidecar"] = w.sidecar_path;
    if (!w.patches_path.empty()) e["patches"] = w.patches_path;
    ws.push_back(e);
  }
  j["weights"] = ws;
  j["gprior"] = m.gprior == GPrior::Kind::UIP ? "uip" : "bric";
  j["model_prior"] =
      m.model_prior.kind == ModelPrior::Kind::Uniform
          ? ordered_json{{"kind", "uniform"}}
          : ordered_json{{"kind", "binomial"}, {"theta", m.model_prior.theta}};
  j["filtering"] = {{"coherence_threshold", m.filtering.coherence_threshold},
                    {"stop_p", m.filtering.stop_p},
                    {"selection_covariates",
                     m.filtering.select_against_full ? "full"
                                                     : "intercept-only"}};
  j["chain"] = {{"iterations", m.chain.iterations},
                {"burn_in", m.chain.burn_in},
                {"seed", m.chain.seed},
                {"statistic", m.chain.statistic == StatisticMode::Frequency
                                  ? "frequency"
                                  : "renormalized-best"},
                {"best_cache", m.chain.best_cache},
                {"density_draws", m.chain.density_draws}};
  j["moran"] = {{"permutations", m.moran_permutations},
                {"top_models", m.moran_top_models}};
  j["enumeration_cap"] = m.enumeration_cap;
  j["output_dir"] = m.output_dir;
  return j;
}

std::string sanitize_filename(const std::string& name) {
  std::string out;
  for (char c : name)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
            c == '-' || c == '.')
               ? c
               : '_';
  return out;
}

}  // namespace

RunManifest load_run_manifest(const std::string& path) {
  require_file(path, "manifest");
  ordered_json j;
  try {
    j = ordered_json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  const fs::path base = fs::path(path).parent_path();

  RunManifest m;
  const auto& ds = j.at("dataset");
  m.panel_path = resolve_path(base, ds.at("panel").get<std::string>());
  m.coordinates_path =
      resolve_path(base, ds.at("coordinates").get<std::string>());
  m.variables_path = resolve_path(base, ds.at("variables").get<std::string>());
  const auto& range = ds.at("year_range");
  if (!range.is_array() || range.size() != 2)
    throw ValidationError("manifest: dataset.year_range must be [from, to]");
  m.year_from = range[0].get<int>();
  m.year_to = range[1].get<int>();
  if (ds.contains("outcome_year")) m.outcome_year = ds.at("outcome_year").get<int>();

  require_file(m.panel_path, "panel CSV");
  require_file(m.coordinates_path, "coordinates CSV");
  require_file(m.variables_path, "variable manifest");

  if (j.contains("weights")) {
    std::set<std::string> names;
    for (const auto& w : j.at("weights")) {
      WeightSpecConfig spec;
      spec.name = w.at("name").get<std::string>();
      if (!valid_identifier(spec.name))
        throw ValidationError("manifest: invalid weight matrix name '" +
                              spec.name + "'");
      if (!names.insert(spec.name).second)
        throw ValidationError("manifest: duplicate weight matrix name '" +
                              spec.name + "'");
      spec.builder = w.at("builder").get<std::string>();
      if (spec.builder == "knn") {
        spec.k = w.at("k").get<int>();
      } else if (spec.builder == "band" || spec.builder == "inverse-band") {
        spec.d_max_km = w.at("d_max_km").get<double>();
      } else if (spec.builder == "queen-file") {
        spec.gal_path = resolve_path(base, w.at("gal").get<std::string>());
        require_file(spec.gal_path, "GAL file");
        if (w.contains("sidecar")) {
          spec.sidecar_path =
              resolve_path(base, w.at("sidecar").get<std::string>());
          require_file(spec.sidecar_path, "weight sidecar");
        }
      } else {
        throw ValidationError("manifest: unknown builder '" + spec.builder +
                              "'");
      }
      if (w.contains("patches")) {
        spec.patches_path =
            resolve_path(base, w.at("patches").get<std::string>());
        require_file(spec.patches_path, "patch file");
      }
      m.weights.push_back(std::move(spec));
    }
  }

  if (j.contains("gprior")) {
    const std::string g = j.at("gprior").get<std::string>();
    if (g == "uip")
      m.gprior = GPrior::Kind::UIP;
    else if (g == "bric")
      m.gprior = GPrior::Kind::BRIC;
    else
      throw ValidationError("manifest: gprior must be 'uip' or 'bric'");
  }

  if (j.contains("model_prior")) {
    const auto& mp = j.at("model_prior");
    const std::string kind = mp.value("kind", "uniform");
    if (kind == "uniform") {
      m.model_prior.kind = ModelPrior::Kind::Uniform;
    } else if (kind == "binomial") {
      m.model_prior.kind = ModelPrior::Kind::Binomial;
      m.model_prior.theta = mp.at("theta").get<double>();
    } else {
      throw ValidationError("manifest: unknown model prior '" + kind + "'");
    }
  }

  if (j.contains("filtering")) {
    const auto& f = j.at("filtering");
    m.filtering.coherence_threshold =
        f.value("coherence_threshold", m.filtering.coherence_threshold);
    m.filtering.stop_p = f.value("stop_p", m.filtering.stop_p);
    const std::string sel = f.value("selection_covariates", "full");
    if (sel == "full")
      m.filtering.select_against_full = true;
    else if (sel == "intercept-only")
      m.filtering.select_against_full = false;
    else
      throw ValidationError(
          "manifest: filtering.selection_covariates must be 'full' or "
          "'intercept-only'");
  }

  if (j.contains("chain")) {
    const auto& c = j.at("chain");
    m.chain.iterations = c.value("iterations", m.chain.iterations);
    m.chain.burn_in = c.value("burn_in", m.chain.burn_in);
    m.chain.seed = c.value("seed", m.chain.seed);
    m.chain.best_cache = c.value("best_cache", m.chain.best_cache);
    m.chain.density_draws = c.value("density_draws", m.chain.density_draws);
    const std::string stat = c.value("statistic", "frequency");
    if (stat == "frequency")
      m.chain.statistic = StatisticMode::Frequency;
    else if (stat == "renormalized-best")
      m.chain.statistic = StatisticMode::RenormalizedBest;
    else
      throw ValidationError("manifest: unknown chain statistic '" + stat +
                            "'");
  }
  m.chain.validate();

  if (j.contains("moran")) {
    m.moran_permutations =
        j.at("moran").value("permutations", m.moran_permutations);
    m.moran_top_models = j.at("moran").value("top_models", m.moran_top_models);
  }
  m.enumeration_cap = j.value("enumeration_cap", m.enumeration_cap);

  if (!j.contains("output_dir"))
    throw ValidationError("manifest: output_dir is required");
  m.output_dir = resolve_path(base, j.at("output_dir").get<std::string>());
  return m;
}

Dataset load_dataset(const RunManifest& manifest) {
  const std::vector<PanelRow> rows =
      parse_panel_csv(read_text_file(manifest.panel_path));
  const VariableManifest vars =
      parse_variable_manifest_json(read_text_file(manifest.variables_path));
  const std::vector<GeoPoint> coords =
      parse_coordinates_csv(read_text_file(manifest.coordinates_path));
  return build_dataset(rows, vars, coords, manifest.year_from,
                       manifest.year_to, manifest.outcome_year);
}

BuiltWeights build_weights(const RunManifest& manifest,
                           std::span<const GeoPoint> points, int threads,
                           std::ostream& diag) {
  BuiltWeights out;
  std::vector<std::string> unit_order;
  for (const GeoPoint& p : points) unit_order.push_back(p.unit_id);

  for (const WeightSpecConfig& spec : manifest.weights) {
    NeighborList nl;
    if (spec.builder == "knn") {
      nl = build_knn(points, spec.k, threads);
    } else if (spec.builder == "band") {
      nl = build_distance_band(points, spec.d_max_km, false, threads);
    } else if (spec.builder == "inverse-band") {
      nl = build_distance_band(points, spec.d_max_km, true, threads);
    } else {
      std::optional<std::string> sidecar;
      if (!spec.sidecar_path.empty())
        sidecar = read_text_file(spec.sidecar_path);
      nl = parse_neighbor_file(read_text_file(spec.gal_path), sidecar);
      nl = align_to_units(nl, unit_order);
    }
    if (!spec.patches_path.empty()) {
      const auto patches =
          parse_patch_file(read_text_file(spec.patches_path),
                           spec.patches_path);
      nl = apply_island_patches(nl, patches, points);
    }
    const std::vector<int> islands = find_islands(nl);
    if (!islands.empty()) {
      std::vector<std::string> ids;
      std::string msg = "matrix '" + spec.name + "' has neighborless units:";
      for (int i : islands) {
        ids.push_back(nl.unit_ids[i]);
        msg += " " + nl.unit_ids[i];
      }
      diag << msg << "\n"
           << "hint: add an island patch file ('patches' key for matrix '"
           << spec.name << "') linking each island to its nearest neighbor\n";
      throw IslandError(msg, std::move(ids));
    }
    out.names.push_back(spec.name);
    out.matrices.push_back(row_standardize(nl));
    out.lists.push_back(std::move(nl));
  }
  return out;
}

FilterOutputs build_filters(const RunManifest& manifest, const Dataset& ds,
                            const BuiltWeights& weights, int threads) {
  FilterOutputs out;
  const Eigen::MatrixXd empty(ds.y.size(), 0);
  const Eigen::MatrixXd& selection_x =
      manifest.filtering.select_against_full ? ds.X : empty;
  for (std::size_t z = 0; z < weights.matrices.size(); ++z) {
    EigenCandidates cand =
        eigen_candidates(center_transform(weights.matrices[z]),
                         manifest.filtering.coherence_threshold,
                         static_cast<int>(z));
    EigenFilterSet set =
        select_filters(ds.y, selection_x, cand, weights.matrices[z],
                       manifest.filtering.stop_p, threads);
    out.vectors.push_back(selected_vectors(cand, set));
    out.candidates.push_back(std::move(cand));
    out.sets.push_back(std::move(set));
  }
  return out;
}

namespace {

void ensure_output_dir(const RunManifest& manifest) {
  std::error_code ec;
  fs::create_directories(manifest.output_dir, ec);
  if (ec)
    throw ValidationError("cannot create output directory: " +
                          manifest.output_dir);
}

std::string out_path(const RunManifest& m, const std::string& name) {
  return (fs::path(m.output_dir) / name).string();
}

}  // namespace

std::vector<std::string> cmd_weights(const RunManifest& manifest, int threads,
                                     std::ostream& diag) {
  ensure_output_dir(manifest);
  if (manifest.weights.empty())
    throw ValidationError("weights: the manifest configures no weight matrices");
  const std::vector<GeoPoint> coords =
      parse_coordinates_csv(read_text_file(manifest.coordinates_path));
  const BuiltWeights weights = build_weights(manifest, coords, threads, diag);

  OutputGuard guard;
  guard.write(out_path(manifest, "weights_stats.csv"),
              weights_stats_csv(weights));
  for (std::size_t z = 0; z < weights.lists.size(); ++z) {
    std::string sidecar;
    const std::string gal =
        serialize_neighbor_file(weights.lists[z], &sidecar, weights.names[z]);
    guard.write(out_path(manifest, weights.names[z] + ".gal"), gal);
    if (!sidecar.empty())
      guard.write(out_path(manifest, weights.names[z] + "_weights.csv"),
                  sidecar);
  }
  return guard.commit();
}

std::vector<std::string> cmd_filter(const RunManifest& manifest, int threads,
                                    std::ostream& diag) {
  ensure_output_dir(manifest);
  if (manifest.weights.empty())
    throw ValidationError("filter: the manifest configures no weight matrices");
  const Dataset ds = load_dataset(manifest);
  const BuiltWeights weights =
      build_weights(manifest, ds.points, threads, diag);
  const FilterOutputs filters =
      build_filters(manifest, ds, weights, threads);

  ordered_json all = ordered_json::array();
  for (std::size_t z = 0; z < filters.sets.size(); ++z) {
    all.push_back(ordered_json::parse(filter_set_to_json(
        filters.candidates[z], filters.sets[z], weights.names[z])));
  }
  OutputGuard guard;
  guard.write(out_path(manifest, "filters.json"), all.dump(2) + "\n");
  return guard.commit();
}

namespace {

// Shared evaluation context for run/oracle.
struct EvalContext {
  Dataset ds;
  BuiltWeights weights;
  FilterOutputs filters;
  double g = 0.0;
};

EvalContext make_context(const RunManifest& manifest, int threads,
                         std::ostream& diag) {
  EvalContext ctx;
  ctx.ds = load_dataset(manifest);
  if (!manifest.weights.empty()) {
    ctx.weights = build_weights(manifest, ctx.ds.points, threads, diag);
    ctx.filters = build_filters(manifest, ctx.ds, ctx.weights, threads);
  }
  const GPrior gp =
      GPrior::resolve(manifest.gprior, static_cast<int>(ctx.ds.y.size()),
                      static_cast<int>(ctx.ds.X.cols()));
  ctx.g = gp.g;
  return ctx;
}

std::string density_csv(const std::string& variable, double pip,
                        const std::vector<double>& draws) {
  std::string out = "variable,pip,draw_index,value\n";
  for (std::size_t i = 0; i < draws.size(); ++i) {
    out += variable;
    out += ',' + format_fixed(pip, 6);
    out += ',' + std::to_string(i);
    out += ',' + format_double(draws[i]);
    out += '\n';
  }
  return out;
}

// Figure 5-6 style data: for the top posterior models, the permutation Moran
// p-value of the plain OLS residuals and of the residuals after adding the
// model's selected eigenvectors. The reference W is the posterior-best
// matrix.
std::string moran_panel_csv(const RunManifest& manifest, EvalContext& ctx,
                            const std::vector<std::pair<ModelKey, double>>&
                                best_models,
                            const PosteriorSummary& summary, int threads) {
  std::string out = "model_id,stage,I,p\n";
  if (ctx.weights.matrices.empty()) return out;

  int best_z = 0;
  for (std::size_t z = 1; z < summary.matrix_share.size(); ++z)
    if (summary.matrix_share[z] > summary.matrix_share[best_z])
      best_z = static_cast<int>(z);
  const WeightMatrix& w_ref = ctx.weights.matrices[best_z];

  const int top = std::min<int>(manifest.moran_top_models,
                                static_cast<int>(best_models.size()));
  for (int rank = 0; rank < top; ++rank) {
    const ModelKey key = best_models[rank].first;
    std::vector<int> cols;
    for (int j = 0; j < ctx.ds.X.cols(); ++j)
      if (key.mask >> j & 1ull) cols.push_back(j);

    Eigen::MatrixXd x_mask(ctx.ds.y.size(), cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c)
      x_mask.col(static_cast<int>(c)) = ctx.ds.X.col(cols[c]);

    const Eigen::MatrixXd& eig = ctx.filters.vectors[key.z];
    Eigen::MatrixXd x_filtered(ctx.ds.y.size(),
                               x_mask.cols() + eig.cols());
    x_filtered.leftCols(x_mask.cols()) = x_mask;
    x_filtered.rightCols(eig.cols()) = eig;

    const std::uint64_t seed_ols =
        SplitMix64::derive(manifest.chain.seed, 0x6d6f72616e00ull + rank);
    const std::uint64_t seed_filtered =
        SplitMix64::derive(manifest.chain.seed, 0x6d6f72616e01ull + rank);
    const MoranResult ols = moran_test_residuals(
        ctx.ds.y, x_mask, w_ref, MoranMethod::Permutation,
        MoranAlternative::Greater, manifest.moran_permutations, seed_ols,
        threads);
    const MoranResult filtered = moran_test_residuals(
        ctx.ds.y, x_filtered, w_ref, MoranMethod::Permutation,
        MoranAlternative::Greater, manifest.moran_permutations, seed_filtered,
        threads);

    out += std::to_string(rank + 1) + ",ols," + format_fixed(ols.I, 6) + ',' +
           format_fixed(ols.p, 6) + '\n';
    out += std::to_string(rank + 1) + ",filtered," +
           format_fixed(filtered.I, 6) + ',' + format_fixed(filtered.p, 6) +
           '\n';
  }
  return out;
}

std::vector<int> top_variables_by_pip(const PosteriorSummary& summary,
                                      int count) {
  std::vector<int> order(summary.variables.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = static_cast<int>(j);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (summary.variables[a].pip != summary.variables[b].pip)
      return summary.variables[a].pip > summary.variables[b].pip;
    return summary.variables[a].name < summary.variables[b].name;
  });
  if (static_cast<int>(order.size()) > count) order.resize(count);
  return order;
}

}  // namespace

std::vector<std::string> cmd_run(const RunManifest& manifest, int threads,
                                 std::ostream& diag) {
  ensure_output_dir(manifest);
  EvalContext ctx = make_context(manifest, threads, diag);

  ModelEvaluator evaluator(ctx.ds.y, ctx.ds.X, ctx.filters.vectors, ctx.g);
  ChainConfig chain = manifest.chain;
  chain.diagnostics = &diag;
  const ChainResult result = run_chain(evaluator, manifest.model_prior, chain,
                                       ctx.ds.covariate_names);

  OutputGuard guard;
  guard.write(out_path(manifest, "pips.csv"),
              posterior_to_csv(result.summary));
  guard.write(out_path(manifest, "wmatrix_posterior.csv"),
              matrix_share_to_csv(result.summary, ctx.weights.names));

  for (int j : top_variables_by_pip(result.summary, 5)) {
    // The summary variable order matches the covariate order, so index j
    // addresses both the summary entry and the draw bucket.
    guard.write(
        out_path(manifest, "density_" +
                               sanitize_filename(
                                   result.summary.variables[j].name) +
                               ".csv"),
        density_csv(result.summary.variables[j].name,
                    result.summary.variables[j].pip, result.density_draws[j]));
  }

  guard.write(out_path(manifest, "moran_pvalues.csv"),
              moran_panel_csv(manifest, ctx, result.trace.best_models,
                              result.summary, threads));

  ordered_json echo = manifest_echo(manifest);
  echo["resolved"] = {{"seed", manifest.chain.seed},
                      {"g", ctx.g},
                      {"n", ctx.ds.y.size()},
                      {"covariates", ctx.ds.covariate_names.size()},
                      {"matrices", ctx.weights.names.size()},
                      {"tallied", result.trace.tallied},
                      {"accept_rate_covariate",
                       result.trace.accept_rate_covariate()},
                      {"accept_rate_matrix", result.trace.accept_rate_matrix()},
                      {"distinct_models", result.trace.visits.size()}};
  ordered_json selected = ordered_json::array();
  for (std::size_t z = 0; z < ctx.filters.sets.size(); ++z)
    selected.push_back({{"matrix", ctx.weights.names[z]},
                        {"selected_eigenvectors",
                         ctx.filters.sets[z].selected.size()},
                        {"stop_p_value", ctx.filters.sets[z].stop_p_value},
                        {"exhausted", ctx.filters.sets[z].exhausted}});
  echo["resolved"]["filters"] = selected;
  guard.write(out_path(manifest, "run_manifest.json"), echo.dump(2) + "\n");
  return guard.commit();
}

std::vector<std::string> cmd_oracle(const RunManifest& manifest, int threads,
                                    std::ostream& diag) {
  ensure_output_dir(manifest);
  EvalContext ctx = make_context(manifest, threads, diag);
  ModelEvaluator evaluator(ctx.ds.y, ctx.ds.X, ctx.filters.vectors, ctx.g);
  const PosteriorSummary summary =
      exact_bma(evaluator, manifest.model_prior, ctx.ds.covariate_names,
                manifest.enumeration_cap, threads);
  OutputGuard guard;
  guard.write(out_path(manifest, "pips.csv"), posterior_to_csv(summary));
  guard.write(out_path(manifest, "wmatrix_posterior.csv"),
              matrix_share_to_csv(summary, ctx.weights.names));
  return guard.commit();
}

std::vector<std::string> cmd_moran(const RunManifest& manifest,
                                   MoranMethod method, int permutations,
                                   int threads, std::ostream& diag) {
  ensure_output_dir(manifest);
  if (manifest.weights.empty())
    throw ValidationError("moran: the manifest configures no weight matrices");
  const Dataset ds = load_dataset(manifest);
  const BuiltWeights weights =
      build_weights(manifest, ds.points, threads, diag);

  std::string csv = "matrix,I,expected_I,z,p,method,alternative,permutations\n";
  for (std::size_t z = 0; z < weights.matrices.size(); ++z) {
    const MoranResult r = moran_test_residuals(
        ds.y, ds.X, weights.matrices[z], method, MoranAlternative::Greater,
        permutations, SplitMix64::derive(manifest.chain.seed, z), threads);
    csv += weights.names[z];
    csv += ',' + format_fixed(r.I, 6);
    csv += ',' + format_fixed(r.expected_I, 6);
    csv += ',' + format_fixed(r.z, 6);
    csv += ',' + format_fixed(r.p, 6);
    csv += method == MoranMethod::Permutation ? ",permutation" : ",normal";
    csv += ",greater," + std::to_string(r.permutations);
    csv += '\n';
  }
  OutputGuard guard;
  guard.write(out_path(manifest, "moran_test.csv"), csv);
  return guard.commit();
}

}  // namespace esfbma
