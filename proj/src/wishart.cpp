#include "fwda/wishart.hpp"

#include <cmath>
#include <string>

#include "fwda/parallel.hpp"
#include "fwda/rng.hpp"

namespace fwda {
namespace {

constexpr double kLogPi = 1.1447298858494001741434273513531;
constexpr double kLog2 = 0.69314718055994530941723212145818;

Eigen::MatrixXd cholesky_or_throw(const SymmetricMatrix& m, const char* who) {
    Eigen::LLT<Eigen::MatrixXd> llt(m.mat());
    if (llt.info() != Eigen::Success) {
        throw NotPositiveDefinite(std::string(who) + ": matrix is not positive definite");
    }
    return llt.matrixL();
}

}  // namespace

WishartModel::WishartModel(SymmetricMatrix scale, double dof, double dof_requested)
    : scale_(std::move(scale)),
      dof_(dof),
      dof_requested_(dof_requested),
      scale_chol_(cholesky_or_throw(scale_, "WishartModel")),
      log_det_scale_(2.0 * scale_chol_.diagonal().array().log().sum()) {}

WishartModel WishartModel::create(const SymmetricMatrix& scale, double dof_requested) {
    if (!(dof_requested > 0.0)) {
        throw InvalidParameter("Wishart dof_requested must be positive, got " +
                               std::to_string(dof_requested));
    }
    const double dof = std::max(dof_requested, static_cast<double>(scale.dim()));
    return WishartModel(scale, dof, dof_requested);
}

WishartModel WishartModel::with_dof(const SymmetricMatrix& scale, double dof,
                                    double dof_requested) {
    if (!(dof >= static_cast<double>(scale.dim()))) {
        throw DomainError("Wishart dof must be >= dimension " + std::to_string(scale.dim()) +
                          ", got " + std::to_string(dof));
    }
    return WishartModel(scale, dof, dof_requested);
}

double log_multivariate_gamma(int p, double a) {
    if (p < 1) throw InvalidParameter("log_multivariate_gamma needs p >= 1");
    if (!(a > 0.5 * (p - 1))) {
        throw DomainError("log_multivariate_gamma needs a > (p-1)/2, got a = " +
                          std::to_string(a) + " with p = " + std::to_string(p));
    }
    double result = 0.25 * p * (p - 1) * kLogPi;
    for (int j = 1; j <= p; ++j) result += std::lgamma(a + 0.5 * (1 - j));
    return result;
}

namespace {

double log_density_from_factor(const Eigen::MatrixXd& theta_chol, double log_det_theta,
                               const WishartModel& model) {
    const double p = static_cast<double>(model.dim());
    const double v = model.dof();
    // tr(scale^-1 theta) = ||L_scale^-1 C_theta||_F^2 with theta = C C^T.
    const Eigen::MatrixXd x = model.scale_chol()
                                  .triangularView<Eigen::Lower>()
                                  .solve(theta_chol);
    const double trace_term = x.squaredNorm();
    return 0.5 * (v - p - 1.0) * log_det_theta - 0.5 * trace_term -
           0.5 * v * p * kLog2 - 0.5 * v * model.log_det_scale() -
           log_multivariate_gamma(static_cast<int>(model.dim()), 0.5 * v);
}

}  // namespace

double log_density(const SymmetricMatrix& theta, const WishartModel& model) {
    if (theta.dim() != model.dim()) {
        throw ShapeError("log_density: theta dimension " + std::to_string(theta.dim()) +
                         " does not match model dimension " + std::to_string(model.dim()));
    }
    if (!(model.dof() > model.dim() - 1)) {
        throw DomainError("log_density needs dof > dim - 1");
    }
    const Eigen::MatrixXd chol = cholesky_or_throw(theta, "log_density");
    const double log_det = 2.0 * chol.diagonal().array().log().sum();
    return log_density_from_factor(chol, log_det, model);
}

double log_density(const PrecisionSample& sample, const WishartModel& model) {
    if (sample.theta.dim() != model.dim()) {
        throw ShapeError("log_density: sample dimension does not match model");
    }
    return log_density_from_factor(sample.chol, sample.log_det_theta, model);
}

namespace detail {

PrecisionSample bartlett_draw(const WishartModel& model, std::uint64_t seed,
                              std::uint64_t draw_index) {
    const Eigen::Index p = model.dim();
    const double v = model.dof();
    Philox rng(seed, draw_index);

    // Bartlett factor: lower triangular, chi-square diagonal with dof
    // shrinking by one per row, standard normal strict lower part.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index k = 0; k < j; ++k) a(j, k) = rng.normal();
        a(j, j) = std::sqrt(rng.chi_square(v - static_cast<double>(j)));
    }

    PrecisionSample out;
    out.chol = model.scale_chol().triangularView<Eigen::Lower>() * a;
    out.log_det_theta = 2.0 * out.chol.diagonal().array().log().sum();
    out.theta = SymmetricMatrix(out.chol * out.chol.transpose());
    return out;
}

}  // namespace detail

std::vector<PrecisionSample> sample(const WishartModel& model, std::uint64_t seed, int count) {
    if (count < 1) throw InvalidParameter("sample count must be >= 1");
    std::vector<PrecisionSample> draws(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static) num_threads(parallel::max_threads())
    for (int i = 0; i < count; ++i) {
        draws[static_cast<std::size_t>(i)] =
            detail::bartlett_draw(model, seed, static_cast<std::uint64_t>(i));
    }
    return draws;
}

namespace reference {

std::vector<PrecisionSample> sample(const WishartModel& model, std::uint64_t seed, int count) {
    if (count < 1) throw InvalidParameter("sample count must be >= 1");
    std::vector<PrecisionSample> draws;
    draws.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        draws.push_back(detail::bartlett_draw(model, seed, static_cast<std::uint64_t>(i)));
    }
    return draws;
}

}  // namespace reference

}  // namespace fwda
