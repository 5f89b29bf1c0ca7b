#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace esfbma {

// Zellner g-prior. UIP: g = n. BRIC: g = max(n, K^2) where K counts the
// candidate covariates (eigenvectors excluded).
struct GPrior {
  enum class Kind { UIP, BRIC };
  Kind kind = Kind::UIP;
  double g = 0.0;

  static GPrior uip(int n);
  static GPrior bric(int n, int num_covariates);
  static GPrior resolve(Kind kind, int n, int num_covariates);
};

// Prior over covariate-inclusion masks; the weight-matrix index z is always
// uniform. Binomial(0.5) coincides with the uniform mask prior.
struct ModelPrior {
  enum class Kind { Uniform, Binomial };
  Kind kind = Kind::Uniform;
  double theta = 0.5;

  double log_prior_mask(std::uint64_t mask, int k) const;
};

// One point of the model space: covariate-inclusion mask plus the active
// weight-matrix index. z == -1 means the non-spatial (no eigenvector) path.
struct ModelKey {
  std::uint64_t mask = 0;
  int z = -1;

  std::uint64_t pack() const {
    return mask | (static_cast<std::uint64_t>(z + 1) << 48);
  }
  friend bool operator==(const ModelKey&, const ModelKey&) = default;
};

struct FittedModel {
  double log_ml = -std::numeric_limits<double>::infinity();
  // Posterior moments per non-intercept design column (covariates first in
  // ascending index order, then the active eigenvectors).
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  double r2 = 0.0;
  double sigma2 = 0.0;  // posterior mean of sigma^2
};

// Log marginal likelihood of y on [1, columns] under the g-prior, up to the
// model-independent constant (the null model scores exactly 0):
//   -(p/2) log(1+g) - ((n-1)/2) log(1 - g/(1+g) R^2).
// Rank-deficient designs and p >= n-2 yield -inf.
double log_marginal_likelihood(const Eigen::VectorXd& y,
                               const Eigen::MatrixXd& columns, double g);

// Full posterior summary for one model: shrinkage means
// E[coef] = g/(1+g) * least-squares, conditional SDs from the (n-1)-dof
// t posterior, plus the marginal likelihood.
FittedModel fit_model(const Eigen::VectorXd& y, const Eigen::MatrixXd& columns,
                      double g);

// Evaluates models over a fixed dataset: covariate matrix X (n x k) and one
// eigenvector block per weight matrix. Designs are assembled as
// [X[mask], E_z]; the intercept is handled by centering. log_ml()/fitted()
// memoize; evaluate() is const and safe to call concurrently.
class ModelEvaluator {
 public:
  ModelEvaluator(Eigen::VectorXd y, Eigen::MatrixXd X,
                 std::vector<Eigen::MatrixXd> eigenvector_blocks, double g);

  int n() const { return static_cast<int>(y_.size()); }
  int k() const { return static_cast<int>(x_.cols()); }
  int num_matrices() const { return static_cast<int>(eig_.size()); }
  double g() const { return g_; }
  std::uint64_t model_space_size() const;

  FittedModel evaluate(const ModelKey& key) const;
  double log_ml_only(const ModelKey& key) const;  // no memo, thread-safe
  double log_ml(const ModelKey& key);
  const FittedModel& fitted(const ModelKey& key);

  Eigen::MatrixXd design_for(const ModelKey& key) const;

  // Every model evaluated so far (packed key -> log marginal likelihood).
  const std::unordered_map<std::uint64_t, double>& log_ml_cache() const {
    return log_ml_cache_;
  }

 private:
  Eigen::VectorXd y_;
  Eigen::MatrixXd x_;
  std::vector<Eigen::MatrixXd> eig_;
  double g_;
  std::unordered_map<std::uint64_t, double> log_ml_cache_;
  std::unordered_map<std::uint64_t, FittedModel> fit_cache_;
};

struct VariableSummary {
  std::string name;
  double pip = 0.0;
  double post_mean = 0.0;  // unconditional (zero mass from exclusion)
  double post_sd = 0.0;
  double cond_mean = 0.0;  // conditional on inclusion
  double cond_sd = 0.0;
};

struct PosteriorSummary {
  std::vector<VariableSummary> variables;  // input covariate order
  std::vector<double> matrix_share;        // per weight matrix
  double log_normalizer = 0.0;
  std::uint64_t models_evaluated = 0;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 1ull << 20;

// Exact enumeration over every (mask, z). The parallel path sums in fixed
// 4096-model blocks combined in block order, so results are bit-identical at
// any thread count. Throws when 2^k * max(Z,1) exceeds the cap.
PosteriorSummary exact_bma(const ModelEvaluator& evaluator,
                           const ModelPrior& prior,
                           const std::vector<std::string>& covariate_names,
                           std::uint64_t cap = kDefaultEnumerationCap,
                           int threads = 1);

namespace reference {
// Straight-loop serial enumeration kept as the testing reference.
PosteriorSummary exact_bma(const ModelEvaluator& evaluator,
                           const ModelPrior& prior,
                           const std::vector<std::string>& covariate_names,
                           std::uint64_t cap = kDefaultEnumerationCap);
}

// pips.csv payload: variables sorted by descending PIP (ties by name).
std::string posterior_to_csv(const PosteriorSummary& summary);
// wmatrix_posterior.csv payload.
std::string matrix_share_to_csv(const PosteriorSummary& summary,
                                const std::vector<std::string>& matrix_names);

}  // namespace esfbma
