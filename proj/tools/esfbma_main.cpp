// esfbma: eigenvector-spatial-filtering Bayesian model averaging.
//
// Subcommands: weights, filter, run, oracle, moran. Every command takes a
// JSON manifest describing the dataset, the weight-matrix menu, priors and
// chain settings; command-line flags override the chain fields.
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "esfbma/errors.hpp"
#include "esfbma/moran.hpp"
#include "esfbma/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string manifest_path;
  int threads = 1;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> iterations;
  std::optional<std::uint64_t> burnin;
  std::optional<std::string> gprior;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool chain_flags) {
  cmd->add_option("--manifest", args.manifest_path, "run manifest JSON")
      ->required();
  cmd->add_option("--threads", args.threads,
                  "worker threads for the parallel kernels")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--output-dir", args.output_dir,
                  "overrides the manifest output_dir");
  if (chain_flags) {
    cmd->add_option("--seed", args.seed, "chain seed override");
    cmd->add_option("--iterations", args.iterations,
                    "chain iterations override");
    cmd->add_option("--burnin", args.burnin, "burn-in override");
    cmd->add_option("--gprior", args.gprior, "g prior: uip or bric")
        ->check(CLI::IsMember({"uip", "bric"}));
  }
}

esfbma::RunManifest load_with_overrides(const CommonArgs& args) {
  esfbma::RunManifest manifest = esfbma::load_run_manifest(args.manifest_path);
  if (!args.output_dir.empty()) manifest.output_dir = args.output_dir;
  if (args.seed) manifest.chain.seed = *args.seed;
  if (args.iterations) manifest.chain.iterations = *args.iterations;
  if (args.burnin) manifest.chain.burn_in = *args.burnin;
  if (args.gprior)
    manifest.gprior = (*args.gprior == "uip") ? esfbma::GPrior::Kind::UIP
                                              : esfbma::GPrior::Kind::BRIC;
  manifest.chain.validate();
  return manifest;
}

void report(const std::vector<std::string>& files) {
  for (const std::string& f : files) std::cout << f << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatial-filtering Bayesian model averaging"};
  app.require_subcommand(1);

  CommonArgs weights_args, filter_args, run_args, oracle_args, moran_args;
  std::string moran_method = "permutation";
  int moran_permutations = 999;

  CLI::App* weights = app.add_subcommand(
      "weights", "build, patch and standardize the weight matrices");
  add_common(weights, weights_args, false);

  CLI::App* filter = app.add_subcommand(
      "filter", "select spatial-filter eigenvectors per weight matrix");
  add_common(filter, filter_args, false);

  CLI::App* run = app.add_subcommand(
      "run", "run the MC3 chain and write the posterior tables");
  add_common(run, run_args, true);

  CLI::App* oracle = app.add_subcommand(
      "oracle", "exact enumeration in the same output format as run");
  add_common(oracle, oracle_args, true);

  CLI::App* moran = app.add_subcommand(
      "moran", "Moran's I test of the OLS residuals per weight matrix");
  add_common(moran, moran_args, true);
  moran->add_option("--method", moran_method, "permutation or normal")
      ->check(CLI::IsMember({"permutation", "normal"}));
  moran->add_option("--permutations", moran_permutations,
                    "number of permutations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (weights->parsed()) {
      report(esfbma::cmd_weights(load_with_overrides(weights_args),
                                 weights_args.threads, std::cerr));
    } else if (filter->parsed()) {
      report(esfbma::cmd_filter(load_with_overrides(filter_args),
                                filter_args.threads, std::cerr));
    } else if (run->parsed()) {
      report(esfbma::cmd_run(load_with_overrides(run_args), run_args.threads,
                             std::cerr));
    } else if (oracle->parsed()) {
      report(esfbma::cmd_oracle(load_with_overrides(oracle_args),
                                oracle_args.threads, std::cerr));
    } else if (moran->parsed()) {
      report(esfbma::cmd_moran(
          load_with_overrides(moran_args),
          moran_method == "permutation" ? esfbma::MoranMethod::Permutation
                                        : esfbma::MoranMethod::NormalApprox,
          moran_permutations, moran_args.threads, std::cerr));
    }
  } catch (const esfbma::IslandError& e) {
    std::cerr << "island error: " << e.what() << "\n";
    return 4;
  } catch (const esfbma::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const esfbma::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
