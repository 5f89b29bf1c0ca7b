#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "esfbma/moran.hpp"
#include "esfbma/weights.hpp"

namespace esfbma {

// Candidate eigenvectors of the doubly-centered, symmetrized weight matrix.
// Vectors are orthonormal columns ordered by descending eigenvalue; only the
// positive-autocorrelation side passing the coherence screen is retained.
struct EigenCandidates {
  int matrix_id = 0;
  Eigen::VectorXd eigenvalues;   // descending, retained candidates only
  Eigen::MatrixXd vectors;       // n x m, orthonormal
  std::vector<double> moran_coherence;  // MI_i / MI_max = eigenvalue ratio
};

struct SelectionStep {
  int candidate = -1;   // index into EigenCandidates columns
  double moran_z = 0.0; // residual Moran z after adding the candidate
  double moran_p = 0.0; // one-sided (greater) p after adding the candidate
};

struct EigenFilterSet {
  int matrix_id = 0;
  std::vector<int> selected;        // candidate indices in selection order
  double stop_p_value = 1.0;        // residual Moran p at the stop
  std::vector<SelectionStep> trace;
  std::vector<int> skipped;         // candidates dropped for rank deficiency
  bool exhausted = false;           // stopped without reaching stop_p
};

// Omega = C * (W + W')/2 * C with C = I - ones/n. Symmetric by construction;
// the constant vector is in its null space.
Eigen::MatrixXd center_transform(const WeightMatrix& W);

// Full symmetric eigendecomposition of Omega; keeps eigenvectors whose
// eigenvalue ratio to the largest positive eigenvalue is >= the coherence
// threshold. For centered orthonormal vectors MI_i is proportional to the
// eigenvalue, so the ratio equals MI_i / MI_max. Sign convention: first
// component of non-negligible magnitude is positive.
EigenCandidates eigen_candidates(const Eigen::MatrixXd& omega,
                                 double coherence_threshold = 0.25,
                                 int matrix_id = 0);

// Greedy forward selection: at each step add the candidate minimizing the
// absolute residual-Moran z of y on [1, X, selected]; stop once the residual
// Moran p (one-sided, normal approximation) exceeds stop_p, no candidate
// improves |z|, or candidates run out (the latter two flag exhaustion).
EigenFilterSet select_filters(const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& X,
                              const EigenCandidates& candidates,
                              const WeightMatrix& W, double stop_p = 0.10,
                              int threads = 1);

// The selected columns, in selection order.
Eigen::MatrixXd selected_vectors(const EigenCandidates& candidates,
                                 const EigenFilterSet& set);

std::string filter_set_to_json(const EigenCandidates& candidates,
                               const EigenFilterSet& set,
                               const std::string& matrix_name);

}  // namespace esfbma
