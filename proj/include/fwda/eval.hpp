#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fwda/classifier.hpp"
#include "fwda/data_io.hpp"

namespace fwda {

// Positive class is +1 throughout.
struct Metrics {
    double accuracy = 0.0;
    double f1 = 0.0;  // 0 when the 0/0 case arises
    long tp = 0, fp = 0, tn = 0, fn = 0;
};

Metrics score_metrics(const std::vector<Prediction>& predicted, const std::vector<int>& actual);

// Self-normalized importance-style reference: a fresh ensemble of oracle_m
// draws scored as sum_i sign(d_i) w_i / sum_i w_i, always in [-1, 1]. Used
// as the high-effort baseline the fast scorer is compared against.
double adaptive_reference_score(const Eigen::VectorXd& x, const FwdaModel& model, int oracle_m,
                                std::uint64_t seed);

// Monte Carlo error decay of the raw ensemble score against a large
// reference ensemble. For every grid size m and every seed s the study
// regenerates the ensemble sample(wishart, s, m) and records the mean
// absolute score error over the test points; the reference uses
// (model.seed, reference_m). contribution_transform, when set, is applied to
// every member contribution on both sides (the tail-bound check clamps to
// [0,1] through it).
struct ConvergenceReport {
    std::vector<int> m_grid;
    std::vector<double> errors;                     // per m, mean over seeds
    std::vector<std::vector<double>> cell_errors;   // [m index][seed index]
    double fitted_slope = 0.0;                      // least-squares log-log slope
    double empirical_variance = 0.0;  // member contribution variance under the reference
    int reference_m = 0;
    std::vector<std::uint64_t> seeds;
};

ConvergenceReport convergence_study(const FwdaModel& model, const Eigen::MatrixXd& test_points,
                                    const std::vector<int>& m_grid, int reference_m,
                                    const std::vector<std::uint64_t>& seeds,
                                    const std::function<double(double)>& contribution_transform = {});

// Wall-clock comparison: scoring all rows once through the lazy ensemble
// path versus re-deriving a fresh oracle_m-draw reference per row.
struct TimingComparison {
    double lazy_total_seconds = 0.0;
    double adaptive_total_seconds = 0.0;
    double ratio = 0.0;  // adaptive / lazy
    std::vector<Prediction> lazy_predictions;
};

TimingComparison timing_comparison(const FwdaModel& model, const Eigen::MatrixXd& xs,
                                   int oracle_m);

// Repeated-split benchmark protocol: a fixed pool is split per (train size,
// repeat) with seeds derived from the master seed, every method is fitted on
// the train rows and scored on the shared test rows.
enum class Method { Fwda, DiscreteFwda, SampleFwda, LdaPseudoInverse, LdaShrinkage };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct ExperimentConfig {
    std::optional<SyntheticSpec> synthetic;  // exactly one source must be set
    std::optional<LabeledDataset> dataset;
    std::vector<int> train_sizes_per_class = {50};
    int test_per_class = 200;
    std::vector<Method> methods = {Method::Fwda};
    double lambda = 1.0;
    int ensemble_size = 200;
    double shrinkage_gamma = 0.5;
    int repeats = 30;
    std::uint64_t master_seed = 42;
    double solver_tol = 1e-4;
    int solver_max_iter = 100;
};

struct ExperimentCell {
    int train_size = 0;
    Method method = Method::Fwda;
    std::vector<Metrics> repeats;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    double f1_mean = 0.0;
    double f1_std = 0.0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<ExperimentCell> cells;
};

ExperimentReport run_experiment(const ExperimentConfig& config);

// Report emitters for external plotting: a JSON document embedding the full
// config, and a flat CSV with one row per repeat x method x train size.
void write_report_json(const ExperimentReport& report, const std::string& path);
void write_report_csv(const ExperimentReport& report, const std::string& path);
std::string report_to_json(const ExperimentReport& report);

}  // namespace fwda
