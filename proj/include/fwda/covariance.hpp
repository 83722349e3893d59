#pragma once

#include <Eigen/Dense>

#include "fwda/symmetric_matrix.hpp"

namespace fwda {

struct PrecisionEstimate {
    SymmetricMatrix theta;
    double lambda = 0.0;
    int outer_iterations = 0;
    double kkt_residual = 0.0;
    bool converged = false;
};

// Sample covariance of the rows of `data` (n x p), centered at the column
// means, normalized by n-1. Rows are consumed in the order given; callers
// that need permutation-invariant output pass rows in a canonical order.
// Throws InsufficientSamples for n < 2, ShapeError for p < 1.
SymmetricMatrix sample_covariance(const Eigen::MatrixXd& data);

// L1-penalized precision estimation:
//   minimize  tr(sigma_bar * theta) - log det(theta) + lambda * sum_{j!=k} |theta_jk|
// over positive definite theta; the diagonal is unpenalized. Solved by block
// coordinate descent on the working covariance W (one lasso per column, warm
// started across sweeps). Outer convergence: mean absolute change of W's
// off-diagonal entries over a sweep <= tol * mean |off-diagonal sigma_bar|.
//
// Diagonal handling: strictly negative variance is an error
// (DegenerateCovariance); variances below 1e-12 get a 1e-8 ridge so constant
// columns stay solvable. p = 1 short-circuits to theta = 1 / sigma_bar.
//
// converged is true only when the stopping rule fired and the final KKT
// residual is <= tol; hitting max_iter reports converged = false rather than
// throwing.
PrecisionEstimate graphical_lasso(const SymmetricMatrix& sigma_bar, double lambda,
                                  double tol = 1e-4, int max_iter = 100);

// Max subgradient-stationarity violation of the objective above at theta:
//   off-diagonal, theta_jk != 0: |sigma_jk - inv(theta)_jk + lambda*sign(theta_jk)|
//   off-diagonal, theta_jk == 0: max(0, |sigma_jk - inv(theta)_jk| - lambda)
//   diagonal:                    |sigma_jj - inv(theta)_jj|
double kkt_residual(const SymmetricMatrix& theta, const SymmetricMatrix& sigma_bar,
                    double lambda);

// Objective value at theta (theta must be positive definite).
double glasso_objective(const SymmetricMatrix& theta, const SymmetricMatrix& sigma_bar,
                        double lambda);

// Bias-corrected (de-sparsified) precision: 2*theta - theta*sigma_bar*theta,
// symmetrized. Throws ShapeError on dimension mismatch.
SymmetricMatrix desparsify(const SymmetricMatrix& theta, const SymmetricMatrix& sigma_bar);

// Eigenvalue floor: eigenvalues below floor_ratio * max(lambda_max, 1) are
// clipped up to that floor and the matrix is reassembled. This is the
// Frobenius-nearest repair among symmetric matrices with that eigenvalue
// floor. Throws InvalidParameter unless floor_ratio > 0.
SymmetricMatrix project_pd(const SymmetricMatrix& m, double floor_ratio = 1e-6);

// Convex blend (1-gamma)*m + gamma*(tr(m)/p)*I, gamma in [0,1].
SymmetricMatrix shrinkage_covariance(const SymmetricMatrix& m, double gamma);

// Moore-Penrose pseudo-inverse via the symmetric eigendecomposition:
// eigenvalues with |value| > rank_tol * max|value| are inverted, the rest
// are zeroed. Throws InvalidParameter unless rank_tol > 0.
SymmetricMatrix pseudo_inverse(const SymmetricMatrix& m, double rank_tol = 1e-12);

}  // namespace fwda
