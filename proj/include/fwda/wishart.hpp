#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fwda/symmetric_matrix.hpp"

namespace fwda {

// Wishart distribution over precision matrices, parameterized by a positive
// definite scale and a degrees-of-freedom count. Construction clamps the
// requested dof up to the dimension so the density stays proper and every
// draw is almost surely nonsingular; the request is kept alongside for
// reporting and persistence.
class WishartModel {
public:
    // Placeholder state (1x1 identity, dof 1) so aggregates holding a model
    // stay default-constructible.
    WishartModel() : WishartModel(SymmetricMatrix::identity(1), 1.0, 1.0) {}

    // dof = max(dof_requested, dim). Throws NotPositiveDefinite if the scale
    // has no Cholesky factorization, InvalidParameter if dof_requested <= 0.
    static WishartModel create(const SymmetricMatrix& scale, double dof_requested);

    // Trusts dof as stored (persistence path). Throws DomainError unless
    // dof >= dim.
    static WishartModel with_dof(const SymmetricMatrix& scale, double dof,
                                 double dof_requested);

    const SymmetricMatrix& scale() const { return scale_; }
    double dof() const { return dof_; }
    double dof_requested() const { return dof_requested_; }
    Eigen::Index dim() const { return scale_.dim(); }

    // Lower Cholesky factor of the scale.
    const Eigen::MatrixXd& scale_chol() const { return scale_chol_; }
    double log_det_scale() const { return log_det_scale_; }

private:
    WishartModel(SymmetricMatrix scale, double dof, double dof_requested);

    SymmetricMatrix scale_;
    double dof_;
    double dof_requested_;
    Eigen::MatrixXd scale_chol_;
    double log_det_scale_;
};

// One draw: the precision matrix together with its Cholesky factor and log
// determinant, cached because scoring consumes them for every input.
struct PrecisionSample {
    SymmetricMatrix theta{Eigen::MatrixXd::Identity(1, 1)};
    Eigen::MatrixXd chol;  // lower, theta = chol * chol^T
    double log_det_theta = 0.0;
};

// log Gamma_p(a) = p(p-1)/4 * log(pi) + sum_{j=1..p} lgamma(a + (1-j)/2).
// Throws DomainError unless a > (p-1)/2.
double log_multivariate_gamma(int p, double a);

// Log density of the Wishart(scale, dof) at a positive definite theta:
//   (dof-p-1)/2 * log|theta| - tr(scale^-1 theta)/2
//   - dof*p/2 * log 2 - dof/2 * log|scale| - log Gamma_p(dof/2)
// evaluated through Cholesky factors only. Throws NotPositiveDefinite if
// theta has no Cholesky factorization.
double log_density(const SymmetricMatrix& theta, const WishartModel& model);

// Same, reusing the factor cached in a draw.
double log_density(const PrecisionSample& sample, const WishartModel& model);

// Ensemble of `count` draws by the Bartlett decomposition. Draw i consumes
// the dedicated substream (seed, i), so the ensemble is reproducible
// draw-by-draw and identical however the loop is scheduled. Parallel over
// draws (OpenMP); fwda::reference::sample is the serial loop and produces
// bitwise-identical output.
std::vector<PrecisionSample> sample(const WishartModel& model, std::uint64_t seed, int count);

namespace reference {
std::vector<PrecisionSample> sample(const WishartModel& model, std::uint64_t seed, int count);
}

namespace detail {
PrecisionSample bartlett_draw(const WishartModel& model, std::uint64_t seed,
                              std::uint64_t draw_index);
}

}  // namespace fwda
