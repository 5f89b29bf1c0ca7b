#include "esfbma/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "esfbma/errors.hpp"
#include "esfbma/io_util.hpp"

namespace esfbma {

Eigen::MatrixXd center_transform(const WeightMatrix& W) {
  const int n = W.n();
  Eigen::MatrixXd S = W.dense();
  S = 0.5 * (S + S.transpose()).eval();
  // C S C with C = I - J/n, expanded to avoid forming C.
  const Eigen::VectorXd rm = S.rowwise().mean();
  const Eigen::VectorXd cm = S.colwise().mean();
  const double gm = S.mean();
  Eigen::MatrixXd omega = S;
  omega.colwise() -= rm;
  omega.rowwise() -= cm.transpose();
  omega.array() += gm;
  // Force exact symmetry against rounding.
  omega = 0.5 * (omega + omega.transpose()).eval();
  (void)n;
  return omega;
}

EigenCandidates eigen_candidates(const Eigen::MatrixXd& omega,
                                 double coherence_threshold, int matrix_id) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(omega);
  if (solver.info() != Eigen::Success)
    throw NumericalError("eigendecomposition failed for matrix id " +
                         std::to_string(matrix_id));
  const int n = static_cast<int>(omega.rows());
  // Eigen returns ascending eigenvalues; walk from the top.
  const Eigen::VectorXd& vals = solver.eigenvalues();
  const Eigen::MatrixXd& vecs = solver.eigenvectors();
  const double max_val = vals(n - 1);
  // Eigenvalues at the scale of rounding noise (the centered constant
  // direction in particular) count as non-positive.
  const double floor = 1e-10 * vals.cwiseAbs().maxCoeff();

  EigenCandidates out;
  out.matrix_id = matrix_id;
  if (!(max_val > floor)) return out;  // no positive autocorrelation side

  std::vector<int> keep;
  for (int i = n - 1; i >= 0; --i) {
    if (vals(i) > floor && vals(i) / max_val >= coherence_threshold)
      keep.push_back(i);
    else
      break;
  }
  out.eigenvalues.resize(keep.size());
  out.vectors.resize(n, static_cast<int>(keep.size()));
  out.moran_coherence.reserve(keep.size());
  for (std::size_t c = 0; c < keep.size(); ++c) {
    out.eigenvalues(static_cast<int>(c)) = vals(keep[c]);
    Eigen::VectorXd v = vecs.col(keep[c]);
    // Sign convention: first component of non-negligible magnitude positive.
    const double scale = v.cwiseAbs().maxCoeff();
    for (int i = 0; i < n; ++i) {
      if (std::abs(v(i)) > 1e-12 * scale) {
        if (v(i) < 0.0) v = -v;
        break;
      }
    }
    out.vectors.col(static_cast<int>(c)) = v;
    out.moran_coherence.push_back(vals(keep[c]) / max_val);
  }
  return out;
}

namespace {

struct CandidateFit {
  bool ok = false;
  double abs_z = std::numeric_limits<double>::infinity();
  double z = 0.0;
  double p_greater = 1.0;
};

// Residual Moran z of y on [1, X, vectors] where "vectors" are the currently
// selected columns plus optionally one trial candidate.
CandidateFit fit_with(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                      const WeightMatrix& W) {
  CandidateFit out;
  const int n = W.n();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) return out;  // rank deficient -> skip
  const Eigen::MatrixXd Q =
      qr.householderQ() * Eigen::MatrixXd::Identity(n, design.cols());
  const Eigen::VectorXd resid = y - Q * (Q.transpose() * y);
  if (resid.squaredNorm() <= 1e-24 * y.squaredNorm()) return out;
  const ResidualMoranStats s = residual_moran_normal(resid, Q, W);
  out.ok = true;
  out.z = s.z;
  out.abs_z = std::abs(s.z);
  out.p_greater = s.p_greater;
  return out;
}

}  // namespace

EigenFilterSet select_filters(const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& X,
                              const EigenCandidates& candidates,
                              const WeightMatrix& W, double stop_p,
                              int threads) {
  const int n = W.n();
  const int k = static_cast<int>(X.cols());
  const int m = static_cast<int>(candidates.vectors.cols());

  EigenFilterSet out;
  out.matrix_id = candidates.matrix_id;

  // Base design: intercept + covariates.
  Eigen::MatrixXd design(n, 1 + k);
  design.col(0).setOnes();
  if (k > 0) design.rightCols(k) = X;

  CandidateFit current = fit_with(y, design, W);
  if (!current.ok)
    throw ValidationError("select_filters: base design is rank deficient");
  out.stop_p_value = current.p_greater;
  if (current.p_greater > stop_p) return out;  // nothing to remove

  std::vector<bool> used(m, false);
  std::vector<bool> skipped(m, false);

  for (;;) {
    int best = -1;
    CandidateFit best_fit;
    Eigen::MatrixXd trial(n, design.cols() + 1);
    trial.leftCols(design.cols()) = design;

    std::vector<CandidateFit> fits(m);
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads > 0 ? threads : 1) \
    schedule(dynamic) firstprivate(trial)
#endif
    for (int c = 0; c < m; ++c) {
      if (used[c] || skipped[c]) continue;
      trial.rightCols(1) = candidates.vectors.col(c);
      fits[c] = fit_with(y, trial, W);
    }
    for (int c = 0; c < m; ++c) {
      if (used[c] || skipped[c]) continue;
      if (!fits[c].ok) {
        skipped[c] = true;
        out.skipped.push_back(c);
        continue;
      }
      if (best < 0 || fits[c].abs_z < best_fit.abs_z) {
        best = c;
        best_fit = fits[c];
      }
    }

    if (best < 0) {
      out.exhausted = true;  // candidates ran out
      break;
    }
    if (best_fit.abs_z >= current.abs_z) {
      out.exhausted = true;  // no candidate improves |z|
      break;
    }

    used[best] = true;
    out.selected.push_back(best);
    out.trace.push_back({best, best_fit.z, best_fit.p_greater});
    Eigen::MatrixXd grown(n, design.cols() + 1);
    grown.leftCols(design.cols()) = design;
    grown.rightCols(1) = candidates.vectors.col(best);
    design.swap(grown);
    current = best_fit;
    out.stop_p_value = current.p_greater;
    if (current.p_greater > stop_p) break;  // residuals look clean
  }
  return out;
}

Eigen::MatrixXd selected_vectors(const EigenCandidates& candidates,
                                 const EigenFilterSet& set) {
  Eigen::MatrixXd out(candidates.vectors.rows(),
                      static_cast<int>(set.selected.size()));
  for (std::size_t i = 0; i < set.selected.size(); ++i)
    out.col(static_cast<int>(i)) = candidates.vectors.col(set.selected[i]);
  return out;
}

std::string filter_set_to_json(const EigenCandidates& candidates,
                               const EigenFilterSet& set,
                               const std::string& matrix_name) {
  nlohmann::ordered_json j;
  j["matrix_id"] = set.matrix_id;
  j["matrix"] = matrix_name;
  j["selected"] = set.selected;
  j["stop_p_value"] = set.stop_p_value;
  j["exhausted"] = set.exhausted;
  j["skipped"] = set.skipped;
  j["eigenvalues"] = std::vector<double>(
      candidates.eigenvalues.data(),
      candidates.eigenvalues.data() + candidates.eigenvalues.size());
  nlohmann::ordered_json trace = nlohmann::ordered_json::array();
  for (const SelectionStep& s : set.trace) {
    trace.push_back({{"candidate", s.candidate},
                     {"moran_z", s.moran_z},
                     {"moran_p", s.moran_p}});
  }
  j["trace"] = trace;
  return j.dump(2) + "\n";
}

}  // namespace esfbma
