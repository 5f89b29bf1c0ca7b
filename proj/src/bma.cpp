#include "esfbma/bma.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "esfbma/errors.hpp"
#include "esfbma/io_util.hpp"

namespace esfbma {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct CenteredFit {
  bool ok = false;
  int p = 0;
  double r2 = 0.0;
  Eigen::VectorXd beta_ls;
  Eigen::VectorXd gram_inv_diag;
  double sst = 0.0;
};

// Least squares of centered y on centered columns; rank-deficient designs are
// reported via ok = false.
CenteredFit centered_least_squares(const Eigen::VectorXd& y,
                                   const Eigen::MatrixXd& columns) {
  CenteredFit fit;
  const int n = static_cast<int>(y.size());
  const int p = static_cast<int>(columns.cols());
  fit.p = p;

  Eigen::VectorXd yc = y.array() - y.mean();
  fit.sst = yc.squaredNorm();
  if (fit.sst <= 0.0)
    throw ValidationError("outcome vector has zero variance");

  if (p == 0) {
    fit.ok = true;
    return fit;
  }
  if (p >= n - 2) return fit;  // excluded by dimension

  Eigen::MatrixXd dc = columns.rowwise() - columns.colwise().mean();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dc);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) return fit;

  const Eigen::MatrixXd thin_q =
      qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  const Eigen::VectorXd qty = thin_q.transpose() * yc;
  fit.r2 = qty.squaredNorm() / fit.sst;
  if (fit.r2 > 1.0) fit.r2 = 1.0;
  fit.beta_ls = qr.solve(yc);

  // diag of (Dc'Dc)^{-1} through the permuted R factor.
  const Eigen::MatrixXd r =
      qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd rinv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::VectorXd diag_permuted(p);
  for (int j = 0; j < p; ++j) diag_permuted(j) = rinv.row(j).squaredNorm();
  fit.gram_inv_diag.resize(p);
  const auto& perm = qr.colsPermutation();
  for (int j = 0; j < p; ++j)
    fit.gram_inv_diag(perm.indices()(j)) = diag_permuted(j);

  fit.ok = true;
  return fit;
}

double log_ml_from(const CenteredFit& fit, int n, double g) {
  if (!fit.ok) return kNegInf;
  if (fit.p == 0) return 0.0;
  const double shrink = g / (1.0 + g);
  double bracket = 1.0 - shrink * fit.r2;
  if (bracket < 1e-300) bracket = 1e-300;
  return -0.5 * fit.p * std::log1p(g) - 0.5 * (n - 1) * std::log(bracket);
}

}  // namespace

GPrior GPrior::uip(int n) { return {Kind::UIP, static_cast<double>(n)}; }

GPrior GPrior::bric(int n, int num_covariates) {
  const double k2 = static_cast<double>(num_covariates) * num_covariates;
  return {Kind::BRIC, std::max(static_cast<double>(n), k2)};
}

GPrior GPrior::resolve(Kind kind, int n, int num_covariates) {
  return kind == Kind::UIP ? uip(n) : bric(n, num_covariates);
}

double ModelPrior::log_prior_mask(std::uint64_t mask, int k) const {
  if (kind == Kind::Uniform) return -k * std::log(2.0);
  if (!(theta > 0.0 && theta < 1.0))
    throw ValidationError("binomial prior: theta must be in (0, 1)");
  const int incl = static_cast<int>(__builtin_popcountll(mask));
  return incl * std::log(theta) + (k - incl) * std::log(1.0 - theta);
}

double log_marginal_likelihood(const Eigen::VectorXd& y,
                               const Eigen::MatrixXd& columns, double g) {
  if (!(g > 0.0)) throw ValidationError("g must be positive");
  return log_ml_from(centered_least_squares(y, columns),
                     static_cast<int>(y.size()), g);
}

FittedModel fit_model(const Eigen::VectorXd& y, const Eigen::MatrixXd& columns,
                      double g) {
  if (!(g > 0.0)) throw ValidationError("g must be positive");
  const int n = static_cast<int>(y.size());
  if (n < 5) throw ValidationError("need at least 5 observations");
  const CenteredFit fit = centered_least_squares(y, columns);

  FittedModel out;
  out.log_ml = log_ml_from(fit, n, g);
  if (!fit.ok) return out;

  const double shrink = g / (1.0 + g);
  out.r2 = fit.r2;
  const double ssb = fit.sst * (1.0 - shrink * fit.r2);
  out.sigma2 = ssb / (n - 3);
  if (fit.p > 0) {
    out.mean = shrink * fit.beta_ls;
    // t posterior with n-1 dof: Var = shrink * SSB / (n-3) * diag((X'X)^-1).
    out.sd = (shrink * ssb / (n - 3) * fit.gram_inv_diag.array())
                 .sqrt()
                 .matrix();
  } else {
    out.mean.resize(0);
    out.sd.resize(0);
  }
  return out;
}

ModelEvaluator::ModelEvaluator(Eigen::VectorXd y, Eigen::MatrixXd X,
                               std::vector<Eigen::MatrixXd> eigenvector_blocks,
                               double g)
    : y_(std::move(y)), x_(std::move(X)), eig_(std::move(eigenvector_blocks)),
      g_(g) {
  if (!(g_ > 0.0)) throw ValidationError("g must be positive");
  if (x_.cols() > 48) throw ValidationError("at most 48 covariates supported");
  if (x_.cols() > 0 && x_.rows() != y_.size())
    throw ValidationError("covariate matrix row count mismatch");
  for (const auto& e : eig_)
    if (e.rows() != y_.size())
      throw ValidationError("eigenvector block row count mismatch");
  if (static_cast<int>(eig_.size()) > 32000)
    throw ValidationError("too many weight matrices");
}

std::uint64_t ModelEvaluator::model_space_size() const {
  return (1ull << k()) * static_cast<std::uint64_t>(std::max(1, num_matrices()));
}

Eigen::MatrixXd ModelEvaluator::design_for(const ModelKey& key) const {
  const int kk = k();
  std::vector<int> cols;
  for (int j = 0; j < kk; ++j)
    if (key.mask >> j & 1ull) cols.push_back(j);
  const int ecols =
      (key.z >= 0) ? static_cast<int>(eig_[key.z].cols()) : 0;
  Eigen::MatrixXd design(n(), static_cast<int>(cols.size()) + ecols);
  for (std::size_t i = 0; i < cols.size(); ++i)
    design.col(static_cast<int>(i)) = x_.col(cols[i]);
  if (ecols > 0) design.rightCols(ecols) = eig_[key.z];
  return design;
}

FittedModel ModelEvaluator::evaluate(const ModelKey& key) const {
  if (key.z < -1 || key.z >= num_matrices())
    throw ValidationError("model key: invalid weight-matrix index");
  if (num_matrices() > 0 && key.z < 0)
    throw ValidationError("model key: z required when matrices are present");
  return fit_model(y_, design_for(key), g_);
}

double ModelEvaluator::log_ml_only(const ModelKey& key) const {
  if (key.z < -1 || key.z >= num_matrices())
    throw ValidationError("model key: invalid weight-matrix index");
  if (num_matrices() > 0 && key.z < 0)
    throw ValidationError("model key: z required when matrices are present");
  return log_marginal_likelihood(y_, design_for(key), g_);
}

double ModelEvaluator::log_ml(const ModelKey& key) {
  const auto packed = key.pack();
  auto it = log_ml_cache_.find(packed);
  if (it != log_ml_cache_.end()) return it->second;
  const double v = log_ml_only(key);
  log_ml_cache_.emplace(packed, v);
  return v;
}

const FittedModel& ModelEvaluator::fitted(const ModelKey& key) {
  const auto packed = key.pack();
  auto it = fit_cache_.find(packed);
  if (it != fit_cache_.end()) return it->second;
  auto [ins, _] = fit_cache_.emplace(packed, evaluate(key));
  log_ml_cache_.emplace(packed, ins->second.log_ml);
  return ins->second;
}

namespace {

struct Accumulator {
  double mass = 0.0;
  std::vector<double> pip;
  std::vector<double> mean;
  std::vector<double> second;  // E[coef^2 | M] mixed: var + mean^2
  std::vector<double> z_mass;

  explicit Accumulator(int k, int z_count)
      : pip(k, 0.0), mean(k, 0.0), second(k, 0.0),
        z_mass(std::max(z_count, 0), 0.0) {}

  void add(const Accumulator& o) {
    mass += o.mass;
    for (std::size_t i = 0; i < pip.size(); ++i) {
      pip[i] += o.pip[i];
      mean[i] += o.mean[i];
      second[i] += o.second[i];
    }
    for (std::size_t i = 0; i < z_mass.size(); ++i) z_mass[i] += o.z_mass[i];
  }
};

ModelKey key_of(std::uint64_t index, int k, int z_count) {
  const std::uint64_t mask = index & ((1ull << k) - 1ull);
  const int z = z_count > 0 ? static_cast<int>(index >> k) : -1;
  return {mask, z};
}

// Models with relative log weight below this contribute nothing detectable;
// skipping them avoids the moment computation.
constexpr double kDropLogWeight = -46.0;  // exp(-46) ~ 1e-20

void accumulate_fit(const FittedModel& fit, const ModelKey& key, double w,
                    int k, Accumulator& acc) {
  acc.mass += w;
  if (key.z >= 0) acc.z_mass[key.z] += w;
  int pos = 0;
  for (int j = 0; j < k; ++j) {
    if (!(key.mask >> j & 1ull)) continue;
    const double m = fit.mean(pos);
    const double s = fit.sd(pos);
    acc.pip[j] += w;
    acc.mean[j] += w * m;
    acc.second[j] += w * (s * s + m * m);
    ++pos;
  }
}

PosteriorSummary summarize(const ModelEvaluator& evaluator,
                           const std::vector<std::string>& covariate_names,
                           const Accumulator& acc, double max_log_post,
                           std::uint64_t total) {
  const int k = evaluator.k();
  if (static_cast<int>(covariate_names.size()) != k)
    throw ValidationError("covariate name count mismatch");
  if (!(acc.mass > 0.0))
    throw NumericalError("no model has positive posterior mass");

  PosteriorSummary out;
  out.models_evaluated = total;
  out.log_normalizer = max_log_post + std::log(acc.mass);
  out.variables.resize(k);
  for (int j = 0; j < k; ++j) {
    VariableSummary& v = out.variables[j];
    v.name = covariate_names[j];
    v.pip = acc.pip[j] / acc.mass;
    v.post_mean = acc.mean[j] / acc.mass;
    const double second = acc.second[j] / acc.mass;
    v.post_sd = std::sqrt(std::max(0.0, second - v.post_mean * v.post_mean));
    if (acc.pip[j] > 0.0) {
      v.cond_mean = acc.mean[j] / acc.pip[j];
      const double cond_second = acc.second[j] / acc.pip[j];
      v.cond_sd = std::sqrt(
          std::max(0.0, cond_second - v.cond_mean * v.cond_mean));
    }
  }
  out.matrix_share.resize(evaluator.num_matrices());
  for (int z = 0; z < evaluator.num_matrices(); ++z)
    out.matrix_share[z] = acc.z_mass[z] / acc.mass;
  return out;
}

void check_cap(const ModelEvaluator& evaluator, std::uint64_t cap) {
  const std::uint64_t total = evaluator.model_space_size();
  if (total > cap)
    throw ValidationError(
        "exact enumeration needs " + std::to_string(total) +
        " models which exceeds the cap of " + std::to_string(cap) +
        "; raise the cap to at least " + std::to_string(total) +
        " or use the sampler");
}

}  // namespace

PosteriorSummary exact_bma(const ModelEvaluator& evaluator,
                           const ModelPrior& prior,
                           const std::vector<std::string>& covariate_names,
                           std::uint64_t cap, int threads) {
  check_cap(evaluator, cap);
  const std::uint64_t total = evaluator.model_space_size();
  const int k = evaluator.k();
  const int zc = evaluator.num_matrices();

  // Fixed 4096-model blocks: threads pick up whole blocks, each block sums in
  // index order and block partials combine in block order, so the result does
  // not depend on the thread count.
  constexpr std::uint64_t kBlock = 4096;
  const std::int64_t nblocks =
      static_cast<std::int64_t>((total + kBlock - 1) / kBlock);

  std::vector<double> log_post(total, kNegInf);
  double max_log_post = kNegInf;
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads > 0 ? threads : 1) \
    schedule(dynamic) reduction(max : max_log_post)
#endif
  for (std::int64_t b = 0; b < nblocks; ++b) {
    const std::uint64_t lo = static_cast<std::uint64_t>(b) * kBlock;
    const std::uint64_t hi = std::min(total, lo + kBlock);
    double local = kNegInf;
    for (std::uint64_t i = lo; i < hi; ++i) {
      const ModelKey key = key_of(i, k, zc);
      const double lml = evaluator.log_ml_only(key);
      if (lml == kNegInf) continue;
      const double lp = lml + prior.log_prior_mask(key.mask, k);
      log_post[i] = lp;
      local = std::max(local, lp);
    }
    max_log_post = std::max(max_log_post, local);
  }
  if (max_log_post == kNegInf)
    throw NumericalError("every model is rank deficient");

  std::vector<Accumulator> partial(static_cast<std::size_t>(nblocks),
                                   Accumulator(k, zc));
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads > 0 ? threads : 1) \
    schedule(dynamic)
#endif
  for (std::int64_t b = 0; b < nblocks; ++b) {
    const std::uint64_t lo = static_cast<std::uint64_t>(b) * kBlock;
    const std::uint64_t hi = std::min(total, lo + kBlock);
    Accumulator& acc = partial[static_cast<std::size_t>(b)];
    for (std::uint64_t i = lo; i < hi; ++i) {
      const double rel = log_post[i] - max_log_post;
      if (!(rel >= kDropLogWeight)) continue;
      const ModelKey key = key_of(i, k, zc);
      accumulate_fit(evaluator.evaluate(key), key, std::exp(rel), k, acc);
    }
  }
  Accumulator acc(k, zc);
  for (std::int64_t b = 0; b < nblocks; ++b)
    acc.add(partial[static_cast<std::size_t>(b)]);
  return summarize(evaluator, covariate_names, acc, max_log_post, total);
}

namespace reference {

PosteriorSummary exact_bma(const ModelEvaluator& evaluator,
                           const ModelPrior& prior,
                           const std::vector<std::string>& covariate_names,
                           std::uint64_t cap) {
  check_cap(evaluator, cap);
  const std::uint64_t total = evaluator.model_space_size();
  const int k = evaluator.k();
  const int zc = evaluator.num_matrices();

  double max_log_post = kNegInf;
  for (std::uint64_t i = 0; i < total; ++i) {
    const ModelKey key = key_of(i, k, zc);
    const double lml = evaluator.log_ml_only(key);
    if (lml == kNegInf) continue;
    max_log_post =
        std::max(max_log_post, lml + prior.log_prior_mask(key.mask, k));
  }
  if (max_log_post == kNegInf)
    throw NumericalError("every model is rank deficient");

  Accumulator acc(k, zc);
  for (std::uint64_t i = 0; i < total; ++i) {
    const ModelKey key = key_of(i, k, zc);
    const double lml = evaluator.log_ml_only(key);
    if (lml == kNegInf) continue;
    const double rel =
        lml + prior.log_prior_mask(key.mask, k) - max_log_post;
    if (!(rel >= kDropLogWeight)) continue;
    accumulate_fit(evaluator.evaluate(key), key, std::exp(rel), k, acc);
  }
  return summarize(evaluator, covariate_names, acc, max_log_post, total);
}

}  // namespace reference

std::string posterior_to_csv(const PosteriorSummary& summary) {
  std::vector<const VariableSummary*> order;
  order.reserve(summary.variables.size());
  for (const auto& v : summary.variables) order.push_back(&v);
  std::sort(order.begin(), order.end(),
            [](const VariableSummary* a, const VariableSummary* b) {
              if (a->pip != b->pip) return a->pip > b->pip;
              return a->name < b->name;
            });
  std::string out = "variable,pip,post_mean,post_sd,cond_mean,cond_sd\n";
  for (const VariableSummary* v : order) {
    out += v->name;
    out += ',' + format_fixed(v->pip, 6);
    out += ',' + format_fixed(v->post_mean, 6);
    out += ',' + format_fixed(v->post_sd, 6);
    out += ',' + format_fixed(v->cond_mean, 6);
    out += ',' + format_fixed(v->cond_sd, 6);
    out += '\n';
  }
  return out;
}

std::string matrix_share_to_csv(const PosteriorSummary& summary,
                                const std::vector<std::string>& matrix_names) {
  if (matrix_names.size() != summary.matrix_share.size())
    throw ValidationError("matrix name count mismatch");
  std::string out = "matrix,posterior_share\n";
  for (std::size_t z = 0; z < matrix_names.size(); ++z)
    out += matrix_names[z] + ',' + format_fixed(summary.matrix_share[z], 6) +
           '\n';
  return out;
}

}  // namespace esfbma
