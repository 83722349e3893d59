#include "fwda/covariance.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace fwda {
namespace {

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

// Mean |off-diagonal| of a square matrix, 0 for p == 1.
double mean_abs_offdiag(const Eigen::MatrixXd& m) {
    const Eigen::Index p = m.rows();
    if (p < 2) return 0.0;
    double sum = 0.0;
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index k = 0; k < p; ++k)
            if (j != k) sum += std::abs(m(j, k));
    return sum / static_cast<double>(p * (p - 1));
}

Eigen::MatrixXd pd_inverse(const Eigen::MatrixXd& m, const char* who) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        throw NotPositiveDefinite(std::string(who) + " needs a positive definite matrix");
    }
    return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

}  // namespace

SymmetricMatrix sample_covariance(const Eigen::MatrixXd& data) {
    if (data.cols() < 1) throw ShapeError("sample_covariance needs at least one feature column");
    if (data.rows() < 2) {
        throw InsufficientSamples("sample_covariance needs n >= 2, got n = " +
                                  std::to_string(data.rows()));
    }
    const double n = static_cast<double>(data.rows());
    const Eigen::RowVectorXd mean = data.colwise().sum() / n;
    const Eigen::MatrixXd centered = data.rowwise() - mean;
    Eigen::MatrixXd cov = (centered.transpose() * centered) / (n - 1.0);
    return SymmetricMatrix(cov);
}

double kkt_residual(const SymmetricMatrix& theta, const SymmetricMatrix& sigma_bar,
                    double lambda) {
    if (theta.dim() != sigma_bar.dim()) {
        throw ShapeError("kkt_residual: theta and sigma_bar dimensions differ");
    }
    const Eigen::MatrixXd inv = pd_inverse(theta.mat(), "kkt_residual");
    const Eigen::Index p = theta.dim();
    double worst = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index k = 0; k < p; ++k) {
            const double grad = sigma_bar(j, k) - inv(j, k);
            double violation;
            if (j == k) {
                violation = std::abs(grad);
            } else if (theta(j, k) != 0.0) {
                violation = std::abs(grad + lambda * (theta(j, k) > 0.0 ? 1.0 : -1.0));
            } else {
                violation = std::max(0.0, std::abs(grad) - lambda);
            }
            worst = std::max(worst, violation);
        }
    }
    return worst;
}

double glasso_objective(const SymmetricMatrix& theta, const SymmetricMatrix& sigma_bar,
                        double lambda) {
    if (theta.dim() != sigma_bar.dim()) {
        throw ShapeError("glasso_objective: theta and sigma_bar dimensions differ");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(theta.mat());
    if (llt.info() != Eigen::Success) {
        throw NotPositiveDefinite("glasso_objective needs positive definite theta");
    }
    const double logdet =
        2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    const double trace_term = (sigma_bar.mat().cwiseProduct(theta.mat())).sum();
    double penalty = 0.0;
    const Eigen::Index p = theta.dim();
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index k = 0; k < p; ++k)
            if (j != k) penalty += std::abs(theta(j, k));
    return trace_term - logdet + lambda * penalty;
}

PrecisionEstimate graphical_lasso(const SymmetricMatrix& sigma_bar, double lambda,
                                  double tol, int max_iter) {
    if (lambda < 0.0) throw InvalidParameter("graphical_lasso lambda must be >= 0");
    if (!(tol > 0.0)) throw InvalidParameter("graphical_lasso tol must be > 0");
    if (max_iter < 1) throw InvalidParameter("graphical_lasso max_iter must be >= 1");

    const Eigen::Index p = sigma_bar.dim();
    Eigen::MatrixXd s = sigma_bar.mat();
    for (Eigen::Index j = 0; j < p; ++j) {
        if (s(j, j) < 0.0) {
            throw DegenerateCovariance("negative variance at diagonal index " +
                                       std::to_string(j));
        }
        if (s(j, j) < 1e-12) s(j, j) += 1e-8;  // constant column repair
    }
    const SymmetricMatrix s_solved(s);

    if (p == 1) {
        SymmetricMatrix theta(Eigen::MatrixXd::Constant(1, 1, 1.0 / s(0, 0)));
        return {theta, lambda, 0, kkt_residual(theta, s_solved, lambda), true};
    }

    const double change_threshold = tol * mean_abs_offdiag(s);
    // Inner lasso tolerance in coefficient units; one unit of beta moves W by
    // roughly one diagonal's worth of covariance.
    const double diag_scale = std::max(s.diagonal().cwiseAbs().mean(), 1e-12);
    const double inner_tol = 0.01 * tol / diag_scale;
    constexpr int kInnerMax = 1000;

    Eigen::MatrixXd w = s;
    Eigen::MatrixXd betas = Eigen::MatrixXd::Zero(p, p);  // column j: coefficients, row j unused

    std::vector<std::vector<Eigen::Index>> others(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        others[j].reserve(p - 1);
        for (Eigen::Index k = 0; k < p; ++k)
            if (k != j) others[j].push_back(k);
    }

    int iterations = 0;
    bool rule_fired = false;
    Eigen::MatrixXd w_before(p, p);
    Eigen::VectorXd beta(p - 1), s12(p - 1), r(p - 1), w12(p - 1);
    Eigen::MatrixXd w11(p - 1, p - 1);

    for (int it = 0; it < max_iter; ++it) {
        w_before = w;
        for (Eigen::Index j = 0; j < p; ++j) {
            const auto& idx = others[j];
            for (Eigen::Index a = 0; a < p - 1; ++a) {
                s12(a) = s(idx[a], j);
                beta(a) = betas(idx[a], j);
                for (Eigen::Index b = 0; b < p - 1; ++b) w11(a, b) = w(idx[a], idx[b]);
            }
            r.noalias() = w11 * beta;
            for (int sweep = 0; sweep < kInnerMax; ++sweep) {
                double max_move = 0.0;
                for (Eigen::Index k = 0; k < p - 1; ++k) {
                    const double wkk = w11(k, k);
                    const double z = s12(k) - (r(k) - wkk * beta(k));
                    const double candidate = soft_threshold(z, lambda) / wkk;
                    const double move = candidate - beta(k);
                    if (move != 0.0) {
                        r += move * w11.col(k);
                        beta(k) = candidate;
                        max_move = std::max(max_move, std::abs(move));
                    }
                }
                if (max_move <= inner_tol) break;
            }
            w12.noalias() = w11 * beta;
            for (Eigen::Index a = 0; a < p - 1; ++a) {
                w(idx[a], j) = w12(a);
                w(j, idx[a]) = w12(a);
                betas(idx[a], j) = beta(a);
            }
        }
        ++iterations;
        double change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j)
            for (Eigen::Index k = j + 1; k < p; ++k) change += std::abs(w(j, k) - w_before(j, k));
        change /= static_cast<double>(p * (p - 1) / 2);
        if (change <= change_threshold) {
            rule_fired = true;
            break;
        }
    }

    // Recover theta column by column from the final working covariance.
    Eigen::MatrixXd theta_raw(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto& idx = others[j];
        double dot = 0.0;
        for (Eigen::Index a = 0; a < p - 1; ++a) dot += w(idx[a], j) * betas(idx[a], j);
        double denom = w(j, j) - dot;
        const double tiny = 1e-12 * std::max(w(j, j), 1.0);
        if (denom < tiny) denom = tiny;
        const double theta_jj = 1.0 / denom;
        theta_raw(j, j) = theta_jj;
        for (Eigen::Index a = 0; a < p - 1; ++a) theta_raw(idx[a], j) = -betas(idx[a], j) * theta_jj;
    }
    SymmetricMatrix theta(theta_raw);

    bool pd_ok = Eigen::LLT<Eigen::MatrixXd>(theta.mat()).info() == Eigen::Success;
    if (!pd_ok) theta = project_pd(theta, 1e-10);

    const double kkt = kkt_residual(theta, s_solved, lambda);
    const bool converged = rule_fired && pd_ok && kkt <= tol;
    return {theta, lambda, iterations, kkt, converged};
}

SymmetricMatrix desparsify(const SymmetricMatrix& theta, const SymmetricMatrix& sigma_bar) {
    if (theta.dim() != sigma_bar.dim()) {
        throw ShapeError("desparsify: theta is " + std::to_string(theta.dim()) +
                         "-dimensional but sigma_bar is " + std::to_string(sigma_bar.dim()));
    }
    const Eigen::MatrixXd& t = theta.mat();
    Eigen::MatrixXd corrected = 2.0 * t - t * sigma_bar.mat() * t;
    return SymmetricMatrix(corrected);
}

SymmetricMatrix project_pd(const SymmetricMatrix& m, double floor_ratio) {
    if (!(floor_ratio > 0.0)) throw InvalidParameter("project_pd floor_ratio must be > 0");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.mat());
    Eigen::VectorXd values = eig.eigenvalues();
    const double floor = floor_ratio * std::max(values.maxCoeff(), 1.0);
    for (Eigen::Index i = 0; i < values.size(); ++i) values(i) = std::max(values(i), floor);
    Eigen::MatrixXd rebuilt =
        eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
    return SymmetricMatrix(rebuilt);
}

SymmetricMatrix shrinkage_covariance(const SymmetricMatrix& m, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw InvalidParameter("shrinkage gamma must lie in [0, 1], got " + std::to_string(gamma));
    }
    const double mean_var = m.mat().trace() / static_cast<double>(m.dim());
    Eigen::MatrixXd blended = (1.0 - gamma) * m.mat();
    blended.diagonal().array() += gamma * mean_var;
    return SymmetricMatrix(blended);
}

SymmetricMatrix pseudo_inverse(const SymmetricMatrix& m, double rank_tol) {
    if (!(rank_tol > 0.0)) throw InvalidParameter("pseudo_inverse rank_tol must be > 0");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.mat());
    const Eigen::VectorXd& values = eig.eigenvalues();
    const double scale = values.cwiseAbs().maxCoeff();
    Eigen::VectorXd inverted = Eigen::VectorXd::Zero(values.size());
    if (scale > 0.0) {
        const double threshold = rank_tol * scale;
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            if (std::abs(values(i)) > threshold) inverted(i) = 1.0 / values(i);
        }
    }
    Eigen::MatrixXd rebuilt =
        eig.eigenvectors() * inverted.asDiagonal() * eig.eigenvectors().transpose();
    return SymmetricMatrix(rebuilt);
}

}  // namespace fwda
