#include "esfbma/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "esfbma/errors.hpp"
#include "esfbma/rng.hpp"

namespace esfbma {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

ModelKey unpack_key(std::uint64_t packed) {
  ModelKey key;
  key.mask = packed & ((1ull << 48) - 1ull);
  key.z = static_cast<int>(packed >> 48) - 1;
  return key;
}

double log_posterior(ModelEvaluator& ev, const ModelPrior& prior,
                     const ModelKey& key) {
  const double lml = ev.log_ml(key);
  if (lml == kNegInf) return kNegInf;
  return lml + prior.log_prior_mask(key.mask, ev.k());
}

}  // namespace

void ChainConfig::validate() const {
  if (iterations == 0) throw ValidationError("chain: iterations must be > 0");
  if (burn_in >= iterations)
    throw ValidationError("chain: burn_in must be smaller than iterations");
  if (best_cache == 0) throw ValidationError("chain: best_cache must be > 0");
  if (density_draws < 0)
    throw ValidationError("chain: density_draws must be >= 0");
}

double ChainTrace::accept_rate_covariate() const {
  return covariate_proposals == 0
             ? 0.0
             : static_cast<double>(covariate_accepts) / covariate_proposals;
}

double ChainTrace::accept_rate_matrix() const {
  return matrix_proposals == 0
             ? 0.0
             : static_cast<double>(matrix_accepts) / matrix_proposals;
}

void ChainTrace::merge(const ChainTrace& other, std::size_t best_cache) {
  for (const auto& [key, count] : other.visits) visits[key] += count;
  if (covariate_tally.size() < other.covariate_tally.size())
    covariate_tally.resize(other.covariate_tally.size(), 0);
  for (std::size_t j = 0; j < other.covariate_tally.size(); ++j)
    covariate_tally[j] += other.covariate_tally[j];
  if (z_tally.size() < other.z_tally.size())
    z_tally.resize(other.z_tally.size(), 0);
  for (std::size_t z = 0; z < other.z_tally.size(); ++z)
    z_tally[z] += other.z_tally[z];
  tallied += other.tallied;
  covariate_proposals += other.covariate_proposals;
  covariate_accepts += other.covariate_accepts;
  matrix_proposals += other.matrix_proposals;
  matrix_accepts += other.matrix_accepts;

  std::map<std::uint64_t, double> merged;
  for (const auto& [key, lml] : best_models) merged[key.pack()] = lml;
  for (const auto& [key, lml] : other.best_models) merged[key.pack()] = lml;
  best_models.clear();
  best_models.reserve(merged.size());
  for (const auto& [packed, lml] : merged)
    best_models.emplace_back(unpack_key(packed), lml);
  std::stable_sort(best_models.begin(), best_models.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first.pack() < b.first.pack();
                   });
  if (best_models.size() > best_cache) best_models.resize(best_cache);
}

ModelKey step_covariate(const ModelKey& state, SplitMix64& rng,
                        ModelEvaluator& evaluator, const ModelPrior& prior,
                        bool* accepted) {
  const int k = evaluator.k();
  ModelKey proposal = state;
  const int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k)));
  proposal.mask ^= (1ull << j);
  const double delta = log_posterior(evaluator, prior, proposal) -
                       log_posterior(evaluator, prior, state);
  const double u = rng.next_double();
  const bool accept = std::log(u) < delta;
  if (accepted != nullptr) *accepted = accept;
  return accept ? proposal : state;
}

ModelKey step_matrix(const ModelKey& state, SplitMix64& rng,
                     ModelEvaluator& evaluator, const ModelPrior& prior,
                     bool* accepted) {
  const int zc = evaluator.num_matrices();
  if (zc < 2)
    throw ValidationError("step_matrix requires at least two weight matrices");
  ModelKey proposal = state;
  const int r =
      static_cast<int>(rng.next_below(static_cast<std::uint64_t>(zc - 1)));
  proposal.z = (r >= state.z) ? r + 1 : r;
  const double delta = log_posterior(evaluator, prior, proposal) -
                       log_posterior(evaluator, prior, state);
  const double u = rng.next_double();
  const bool accept = std::log(u) < delta;
  if (accepted != nullptr) *accepted = accept;
  return accept ? proposal : state;
}

namespace {

struct MomentAccumulator {
  double mass = 0.0;
  std::vector<double> pip, mean, second, z_mass;

  MomentAccumulator(int k, int zc)
      : pip(k, 0.0), mean(k, 0.0), second(k, 0.0),
        z_mass(std::max(zc, 0), 0.0) {}

  void add(const ModelKey& key, const FittedModel& fit, double w, int k) {
    mass += w;
    if (key.z >= 0) z_mass[key.z] += w;
    int pos = 0;
    for (int j = 0; j < k; ++j) {
      if (!(key.mask >> j & 1ull)) continue;
      const double m = fit.mean(pos);
      const double s = fit.sd(pos);
      pip[j] += w;
      mean[j] += w * m;
      second[j] += w * (s * s + m * m);
      ++pos;
    }
  }
};

PosteriorSummary summary_from_accumulator(const MomentAccumulator& acc, int k,
                                          int zc,
                                          const std::vector<std::string>&
                                              names) {
  if (!(acc.mass > 0.0))
    throw NumericalError("chain summary: no posterior mass accumulated");
  PosteriorSummary out;
  out.variables.resize(k);
  for (int j = 0; j < k; ++j) {
    VariableSummary& v = out.variables[j];
    v.name = names[j];
    v.pip = acc.pip[j] / acc.mass;
    v.post_mean = acc.mean[j] / acc.mass;
    const double second = acc.second[j] / acc.mass;
    v.post_sd = std::sqrt(std::max(0.0, second - v.post_mean * v.post_mean));
    if (acc.pip[j] > 0.0) {
      v.cond_mean = acc.mean[j] / acc.pip[j];
      const double cs = acc.second[j] / acc.pip[j];
      v.cond_sd =
          std::sqrt(std::max(0.0, cs - v.cond_mean * v.cond_mean));
    }
  }
  out.matrix_share.assign(zc, 0.0);
  for (int z = 0; z < zc; ++z) out.matrix_share[z] = acc.z_mass[z] / acc.mass;
  return out;
}

}  // namespace

PosteriorSummary summary_from_trace(ModelEvaluator& evaluator,
                                    const ModelPrior& prior,
                                    const ChainTrace& trace,
                                    StatisticMode mode,
                                    const std::vector<std::string>&
                                        covariate_names) {
  const int k = evaluator.k();
  const int zc = evaluator.num_matrices();
  if (static_cast<int>(covariate_names.size()) != k)
    throw ValidationError("covariate name count mismatch");

  MomentAccumulator acc(k, zc);
  if (mode == StatisticMode::Frequency) {
    if (trace.tallied == 0)
      throw ValidationError("chain summary: empty trace");
    for (const auto& [packed, count] : trace.visits) {
      const ModelKey key = unpack_key(packed);
      const double w =
          static_cast<double>(count) / static_cast<double>(trace.tallied);
      acc.add(key, evaluator.fitted(key), w, k);
    }
  } else {
    if (trace.best_models.empty())
      throw ValidationError("chain summary: empty best-model cache");
    double max_lp = kNegInf;
    for (const auto& [key, lml] : trace.best_models)
      max_lp = std::max(max_lp, lml + prior.log_prior_mask(key.mask, k));
    for (const auto& [key, lml] : trace.best_models) {
      const double w =
          std::exp(lml + prior.log_prior_mask(key.mask, k) - max_lp);
      acc.add(key, evaluator.fitted(key), w, k);
    }
  }
  PosteriorSummary out =
      summary_from_accumulator(acc, k, zc, covariate_names);
  out.models_evaluated = trace.visits.size();
  return out;
}

ChainResult run_chain(ModelEvaluator& evaluator, const ModelPrior& prior,
                      const ChainConfig& config,
                      const std::vector<std::string>& covariate_names) {
  config.validate();
  const int k = evaluator.k();
  const int zc = evaluator.num_matrices();
  if (static_cast<int>(covariate_names.size()) != k)
    throw ValidationError("covariate name count mismatch");

  SplitMix64 rng(config.seed);
  SplitMix64 density_rng(SplitMix64::derive(config.seed, 0x64656e73ull));

  ModelKey state;
  state.mask = 0;
  state.z = zc > 0 ? static_cast<int>(
                         rng.next_below(static_cast<std::uint64_t>(zc)))
                   : -1;
  if (evaluator.log_ml(state) == kNegInf)
    throw NumericalError("initial chain state is rank deficient");

  ChainResult result;
  ChainTrace& trace = result.trace;
  trace.covariate_tally.assign(k, 0);
  trace.z_tally.assign(std::max(zc, 0), 0);
  result.density_draws.assign(k, {});

  const std::uint64_t kept = config.iterations - config.burn_in;
  const std::uint64_t stride =
      config.density_draws > 0
          ? std::max<std::uint64_t>(
                1, kept / static_cast<std::uint64_t>(config.density_draws))
          : 0;
  const double dof = static_cast<double>(evaluator.n() - 1);
  const double t_scale = std::sqrt((dof - 2.0) / dof);

  for (std::uint64_t iter = 0; iter < config.iterations; ++iter) {
    if (k > 0) {
      bool accepted = false;
      state = step_covariate(state, rng, evaluator, prior, &accepted);
      ++trace.covariate_proposals;
      if (accepted) ++trace.covariate_accepts;
    }
    if (zc >= 2) {
      bool accepted = false;
      state = step_matrix(state, rng, evaluator, prior, &accepted);
      ++trace.matrix_proposals;
      if (accepted) ++trace.matrix_accepts;
    }

    if (iter >= config.burn_in) {
      ++trace.visits[state.pack()];
      ++trace.tallied;
      for (int j = 0; j < k; ++j)
        if (state.mask >> j & 1ull) ++trace.covariate_tally[j];
      if (state.z >= 0) ++trace.z_tally[state.z];

      if (stride > 0 && (iter - config.burn_in) % stride == 0) {
        const FittedModel& fit = evaluator.fitted(state);
        int pos = 0;
        for (int j = 0; j < k; ++j) {
          if (!(state.mask >> j & 1ull)) continue;
          const double t = density_rng.next_student_t(dof);
          result.density_draws[j].push_back(fit.mean(pos) +
                                            fit.sd(pos) * t_scale * t);
          ++pos;
        }
      }
    }

    if (config.diagnostics != nullptr && config.progress_every > 0 &&
        (iter + 1) % config.progress_every == 0) {
      *config.diagnostics << "iter=" << (iter + 1)
                          << " accept_cov=" << trace.accept_rate_covariate()
                          << " accept_mat=" << trace.accept_rate_matrix()
                          << " distinct=" << trace.visits.size() << "\n";
    }
  }

  // Best-model cache from every model the chain evaluated.
  {
    std::vector<std::pair<ModelKey, double>> all;
    all.reserve(evaluator.log_ml_cache().size());
    for (const auto& [packed, lml] : evaluator.log_ml_cache())
      if (lml != kNegInf) all.emplace_back(unpack_key(packed), lml);
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first.pack() < b.first.pack();
    });
    if (all.size() > config.best_cache) all.resize(config.best_cache);
    trace.best_models = std::move(all);
  }

  result.summary = summary_from_trace(evaluator, prior, trace,
                                      config.statistic, covariate_names);
  return result;
}

}  // namespace esfbma
