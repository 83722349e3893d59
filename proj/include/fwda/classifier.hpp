#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fwda/data_io.hpp"
#include "fwda/symmetric_matrix.hpp"
#include "fwda/wishart.hpp"

namespace fwda {

enum class Variant { Fwda, DiscreteFwda, SampleFwda };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// Fitted ensemble classifier. The Wishart draws themselves are never stored:
// (wishart, seed, ensemble_size) regenerates them on demand, which keeps the
// model a few KB and makes persisted predictions bitwise reproducible.
struct FwdaModel {
    Variant variant = Variant::Fwda;
    Eigen::Index dim = 0;
    Eigen::VectorXd global_mean;
    Eigen::VectorXd pos_mean;
    Eigen::VectorXd neg_mean;
    WishartModel wishart;
    double lambda = 1.0;
    int ensemble_size = 200;
    std::uint64_t seed = 42;
};

struct FitConfig {
    Variant variant = Variant::Fwda;
    double lambda = 1.0;
    int ensemble_size = 200;
    std::uint64_t seed = 42;
    double solver_tol = 1e-4;
    int solver_max_iter = 100;
    double floor_ratio = 1e-6;   // eigenvalue floor for the scale repair
    double rank_tol = 1e-12;     // pseudo-inverse cutoff (SampleFwda)
};

struct FitInfo {
    Eigen::Index n = 0;
    Eigen::Index p = 0;
    double kkt_residual = 0.0;
    int solver_iterations = 0;
    bool solver_converged = true;
};

struct Prediction {
    int label = 1;  // +1 or -1; nonnegative score maps to +1
    double score = 0.0;
};

// Pipeline: class and global means; sample covariance; scale estimate
// (graphical lasso + bias correction for Fwda/DiscreteFwda, pseudo-inverse
// for SampleFwda); eigenvalue floor; Wishart with dof = max(n-1, p).
//
// Rows are consumed in a canonical order (lexicographic by feature bytes,
// then label), so shuffling the training rows leaves the fitted model
// bitwise identical.
FwdaModel fit(const LabeledDataset& data, const FitConfig& config = {}, FitInfo* info = nullptr);

// Linear discriminant (x - global_mean)' theta (pos_mean - neg_mean).
double lda_discriminant(const Eigen::VectorXd& x, const Eigen::VectorXd& global_mean,
                        const Eigen::VectorXd& pos_mean, const Eigen::VectorXd& neg_mean,
                        const SymmetricMatrix& theta);

// Gaussian log density of x under N(mean, theta^-1):
//   -p/2 log(2 pi) + 1/2 log|theta| - 1/2 (x-mean)' theta (x-mean).
double gaussian_log_weight(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                           const SymmetricMatrix& theta);

// Likelihood-weighted vote over the ensemble:
//   score = 1/m * sum_i sign(d_i) * exp(w_i - max_j w_j)
// with d_i the member discriminant and w_i its Gaussian log weight at x.
// The shift by the max is a positive rescaling, so the returned label is
// unchanged by it. label = +1 iff score >= 0.
Prediction fwda_score(const Eigen::VectorXd& x, const FwdaModel& model,
                      const std::vector<PrecisionSample>& samples);

// Variant that also weights each member by its Wishart density under the
// fitted model: score = sum_i sign(d_i) * exp(w_i + l_i - max_j(w_j + l_j)).
Prediction discrete_fwda_score(const Eigen::VectorXd& x, const FwdaModel& model,
                               const std::vector<PrecisionSample>& samples);

// Unshifted ensemble mean 1/m * sum_i sign(d_i) * exp(w_i). This is the raw
// Monte Carlo estimate the convergence analysis tracks; safe for small p
// where exp(w) stays in range.
double raw_ensemble_score(const Eigen::VectorXd& x, const FwdaModel& model,
                          const std::vector<PrecisionSample>& samples);

// Regenerates the ensemble from the model and scores every row of xs.
// Parallel over rows; fwda::reference::predict is the serial loop and
// produces bitwise-identical output. Each row's result equals the
// single-point scorer's result bitwise.
std::vector<Prediction> predict(const FwdaModel& model, const Eigen::MatrixXd& xs);

namespace reference {
std::vector<Prediction> predict(const FwdaModel& model, const Eigen::MatrixXd& xs);
}

// Deterministic row order that makes fit permutation-invariant.
std::vector<Eigen::Index> canonical_row_order(const LabeledDataset& data);

// Classic LDA baseline sharing the discriminant above, with the precision
// taken as a pseudo-inverse or a shrinkage-regularized inverse of the sample
// covariance.
struct CovarianceMode {
    enum class Kind { PseudoInverse, Shrinkage } kind = Kind::PseudoInverse;
    double gamma = 0.5;      // shrinkage weight
    double rank_tol = 1e-12;
};
std::vector<Prediction> plain_lda_predict(const LabeledDataset& train, const Eigen::MatrixXd& xs,
                                          const CovarianceMode& mode);

// Model persistence: single JSON object, format_version 1, numbers written
// shortest round-trip so save/load/predict is bitwise stable.
void save_model(const FwdaModel& model, const std::string& path);
FwdaModel load_model(const std::string& path);

namespace detail {

// Member scores for one input: discriminants and log weights under the rule
// in use. Exposed for tests and for the evaluation module.
enum class WeightRule { Likelihood, LikelihoodTimesDensity, Uniform };

// Stabilized vote over explicit member values. normalize means divide by the
// member count (the plain ensemble mean).
Prediction stabilized_vote(const std::vector<double>& discriminants,
                           const std::vector<double>& log_weights, bool normalize);

// Per-ensemble precomputation shared by every input: theta_i * (pos - neg)
// and, for the density-weighted rule, each member's Wishart log density.
struct EnsembleContext {
    const FwdaModel* model = nullptr;
    const std::vector<PrecisionSample>* samples = nullptr;
    std::vector<Eigen::VectorXd> projected_delta;
    std::vector<double> member_log_density;  // only for LikelihoodTimesDensity
    WeightRule rule = WeightRule::Likelihood;
};
EnsembleContext make_context(const FwdaModel& model, const std::vector<PrecisionSample>& samples,
                             WeightRule rule);
Prediction score_one(const Eigen::VectorXd& x, const EnsembleContext& ctx);

// Discriminant and log weight of every member at x under the context's rule.
void member_scores(const Eigen::VectorXd& x, const EnsembleContext& ctx, std::vector<double>& d,
                   std::vector<double>& w);

// Unshifted ensemble mean with an optional per-contribution transform (the
// convergence analysis clamps contributions through this hook).
double raw_score_one(const Eigen::VectorXd& x, const EnsembleContext& ctx,
                     const std::function<double(double)>& transform = {});

}  // namespace detail

}  // namespace fwda
