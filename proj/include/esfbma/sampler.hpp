#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "esfbma/bma.hpp"

namespace esfbma {

enum class StatisticMode { Frequency, RenormalizedBest };

struct ChainConfig {
  std::uint64_t iterations = 3'000'000;
  std::uint64_t burn_in = 300'000;
  std::uint64_t seed = 0;
  StatisticMode statistic = StatisticMode::Frequency;
  std::size_t best_cache = 10'000;  // distinct models kept for renormalization

  // Post-burn-in conditional coefficient draws per covariate; 0 disables.
  int density_draws = 0;

  std::ostream* diagnostics = nullptr;
  std::uint64_t progress_every = 100'000;

  void validate() const;
};

struct ChainTrace {
  // Packed ModelKey -> visit count (ordered map for deterministic iteration).
  std::map<std::uint64_t, std::uint64_t> visits;
  std::vector<std::uint64_t> covariate_tally;
  std::vector<std::uint64_t> z_tally;
  std::uint64_t tallied = 0;

  std::uint64_t covariate_proposals = 0;
  std::uint64_t covariate_accepts = 0;
  std::uint64_t matrix_proposals = 0;
  std::uint64_t matrix_accepts = 0;

  // Best distinct models, descending log marginal likelihood.
  std::vector<std::pair<ModelKey, double>> best_models;

  double accept_rate_covariate() const;
  double accept_rate_matrix() const;

  // Tally addition across independent chains; best lists are unioned and
  // re-truncated.
  void merge(const ChainTrace& other, std::size_t best_cache);
};

// One MH flip of a uniformly chosen covariate. Draws exactly two variates
// (index, acceptance uniform) per call.
ModelKey step_covariate(const ModelKey& state, class SplitMix64& rng,
                        ModelEvaluator& evaluator, const ModelPrior& prior,
                        bool* accepted = nullptr);

// One MH swap to a uniformly chosen other weight matrix; requires Z >= 2.
ModelKey step_matrix(const ModelKey& state, class SplitMix64& rng,
                     ModelEvaluator& evaluator, const ModelPrior& prior,
                     bool* accepted = nullptr);

struct ChainResult {
  ChainTrace trace;
  PosteriorSummary summary;
  // Per covariate, conditional posterior draws collected after burn-in.
  std::vector<std::vector<double>> density_draws;
};

// The two-sub-step chain: every iteration flips one covariate (sub-step a)
// then proposes a weight-matrix swap (sub-step b, skipped when Z < 2).
// Tallies start after burn_in; the likelihood memo warms from iteration 0.
ChainResult run_chain(ModelEvaluator& evaluator, const ModelPrior& prior,
                      const ChainConfig& config,
                      const std::vector<std::string>& covariate_names);

// Summary from a (possibly merged) trace. Frequency mode mixes visited models
// by visit share; renormalized mode renormalizes the exact posterior over the
// best-model cache.
PosteriorSummary summary_from_trace(ModelEvaluator& evaluator,
                                    const ModelPrior& prior,
                                    const ChainTrace& trace,
                                    StatisticMode mode,
                                    const std::vector<std::string>&
                                        covariate_names);

}  // namespace esfbma
