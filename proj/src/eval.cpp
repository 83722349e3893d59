#include "fwda/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "fwda/rng.hpp"

namespace fwda {
namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Sample standard deviation (n-1), 0 for a single value.
double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

Metrics score_metrics(const std::vector<Prediction>& predicted, const std::vector<int>& actual) {
    if (predicted.size() != actual.size()) {
        throw ShapeError("score_metrics: " + std::to_string(predicted.size()) +
                         " predictions vs " + std::to_string(actual.size()) + " labels");
    }
    if (predicted.empty()) throw EmptyInput("score_metrics got no predictions");

    Metrics m;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (actual[i] != 1 && actual[i] != -1) {
            throw LabelError("actual label at index " + std::to_string(i) + " is not +1 or -1");
        }
        const bool predicted_pos = predicted[i].label == 1;
        const bool actual_pos = actual[i] == 1;
        if (predicted_pos && actual_pos) ++m.tp;
        else if (predicted_pos && !actual_pos) ++m.fp;
        else if (!predicted_pos && actual_pos) ++m.fn;
        else ++m.tn;
    }
    const double total = static_cast<double>(predicted.size());
    m.accuracy = static_cast<double>(m.tp + m.tn) / total;
    const double denom = static_cast<double>(2 * m.tp + m.fp + m.fn);
    m.f1 = denom > 0.0 ? 2.0 * static_cast<double>(m.tp) / denom : 0.0;
    return m;
}

double adaptive_reference_score(const Eigen::VectorXd& x, const FwdaModel& model, int oracle_m,
                                std::uint64_t seed) {
    if (oracle_m < 1) throw InvalidParameter("oracle_m must be >= 1");
    const std::vector<PrecisionSample> samples = sample(model.wishart, seed, oracle_m);
    const detail::EnsembleContext ctx =
        detail::make_context(model, samples, detail::WeightRule::Likelihood);
    std::vector<double> d, w;
    detail::member_scores(x, ctx, d, w);
    const double w_max = *std::max_element(w.begin(), w.end());
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double weight = std::exp(w[i] - w_max);
        num += (d[i] >= 0.0 ? weight : -weight);
        den += weight;
    }
    return num / den;
}

ConvergenceReport convergence_study(const FwdaModel& model, const Eigen::MatrixXd& test_points,
                                    const std::vector<int>& m_grid, int reference_m,
                                    const std::vector<std::uint64_t>& seeds,
                                    const std::function<double(double)>& contribution_transform) {
    if (m_grid.empty()) throw InvalidParameter("m_grid must not be empty");
    for (std::size_t i = 0; i < m_grid.size(); ++i) {
        if (m_grid[i] < 1) throw InvalidParameter("m_grid entries must be >= 1");
        if (i > 0 && m_grid[i] <= m_grid[i - 1]) {
            throw InvalidParameter("m_grid must be strictly increasing");
        }
    }
    if (reference_m < m_grid.back()) {
        throw InvalidParameter("reference_m must be >= the largest grid size");
    }
    if (seeds.empty()) throw InvalidParameter("at least one seed is required");
    if (test_points.rows() < 1) throw EmptyInput("convergence_study got no test points");
    if (test_points.cols() != model.dim) {
        throw ShapeError("test points have dimension " + std::to_string(test_points.cols()) +
                         " but model has dimension " + std::to_string(model.dim));
    }

    ConvergenceReport report;
    report.m_grid = m_grid;
    report.reference_m = reference_m;
    report.seeds = seeds;

    const Eigen::Index n_points = test_points.rows();

    // Reference scores, one pass; also the member-contribution variance.
    std::vector<double> reference_scores(static_cast<std::size_t>(n_points));
    {
        const std::vector<PrecisionSample> ref = sample(model.wishart, model.seed, reference_m);
        const detail::EnsembleContext ctx =
            detail::make_context(model, ref, detail::WeightRule::Likelihood);
        std::vector<double> d, w;
        double variance_sum = 0.0;
        for (Eigen::Index t = 0; t < n_points; ++t) {
            detail::member_scores(test_points.row(t).transpose(), ctx, d, w);
            double acc = 0.0;
            std::vector<double> contributions(d.size());
            for (std::size_t i = 0; i < d.size(); ++i) {
                double c = (d[i] >= 0.0 ? 1.0 : -1.0) * std::exp(w[i]);
                if (contribution_transform) c = contribution_transform(c);
                contributions[i] = c;
                acc += c;
            }
            reference_scores[static_cast<std::size_t>(t)] =
                acc / static_cast<double>(d.size());
            variance_sum += std_of(contributions) * std_of(contributions);
        }
        report.empirical_variance = variance_sum / static_cast<double>(n_points);
    }

    report.cell_errors.assign(m_grid.size(), std::vector<double>(seeds.size(), 0.0));
    report.errors.assign(m_grid.size(), 0.0);
    for (std::size_t mi = 0; mi < m_grid.size(); ++mi) {
        for (std::size_t si = 0; si < seeds.size(); ++si) {
            const std::vector<PrecisionSample> draws =
                sample(model.wishart, seeds[si], m_grid[mi]);
            const detail::EnsembleContext ctx =
                detail::make_context(model, draws, detail::WeightRule::Likelihood);
            double err = 0.0;
            for (Eigen::Index t = 0; t < n_points; ++t) {
                const double score =
                    detail::raw_score_one(test_points.row(t).transpose(), ctx,
                                          contribution_transform);
                err += std::abs(score - reference_scores[static_cast<std::size_t>(t)]);
            }
            report.cell_errors[mi][si] = err / static_cast<double>(n_points);
        }
        report.errors[mi] = mean_of(report.cell_errors[mi]);
    }

    // Log-log slope over the grid points with positive error (a zero error,
    // e.g. scoring the reference against itself, carries no slope
    // information). Fewer than two usable points leaves the slope at 0.
    std::vector<double> lx, ly;
    for (std::size_t mi = 0; mi < m_grid.size(); ++mi) {
        if (report.errors[mi] > 0.0) {
            lx.push_back(std::log(static_cast<double>(m_grid[mi])));
            ly.push_back(std::log(report.errors[mi]));
        }
    }
    if (lx.size() >= 2) {
        const double mx = mean_of(lx);
        const double my = mean_of(ly);
        double sxy = 0.0;
        double sxx = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxy += (lx[i] - mx) * (ly[i] - my);
            sxx += (lx[i] - mx) * (lx[i] - mx);
        }
        report.fitted_slope = sxy / sxx;
    }
    return report;
}

TimingComparison timing_comparison(const FwdaModel& model, const Eigen::MatrixXd& xs,
                                   int oracle_m) {
    if (xs.rows() < 1) throw EmptyInput("timing_comparison got no inputs");
    if (oracle_m < 1) throw InvalidParameter("oracle_m must be >= 1");
    using clock = std::chrono::steady_clock;

    TimingComparison out;
    const auto t0 = clock::now();
    out.lazy_predictions = predict(model, xs);
    const auto t1 = clock::now();
    for (Eigen::Index r = 0; r < xs.rows(); ++r) {
        volatile double sink = adaptive_reference_score(
            xs.row(r).transpose(), model, oracle_m,
            derive_seed(model.seed, 0xADA7, static_cast<std::uint64_t>(r)));
        (void)sink;
    }
    const auto t2 = clock::now();

    out.lazy_total_seconds = std::chrono::duration<double>(t1 - t0).count();
    out.adaptive_total_seconds = std::chrono::duration<double>(t2 - t1).count();
    out.ratio = out.adaptive_total_seconds / std::max(out.lazy_total_seconds, 1e-12);
    return out;
}

std::string method_name(Method m) {
    switch (m) {
        case Method::Fwda: return "fwda";
        case Method::DiscreteFwda: return "discrete_fwda";
        case Method::SampleFwda: return "sample_fwda";
        case Method::LdaPseudoInverse: return "lda_pinv";
        case Method::LdaShrinkage: return "lda_shrinkage";
    }
    throw InvalidParameter("unknown method");
}

Method method_from_name(const std::string& name) {
    if (name == "fwda") return Method::Fwda;
    if (name == "discrete_fwda") return Method::DiscreteFwda;
    if (name == "sample_fwda") return Method::SampleFwda;
    if (name == "lda_pinv") return Method::LdaPseudoInverse;
    if (name == "lda_shrinkage") return Method::LdaShrinkage;
    throw InvalidParameter("unknown method '" + name + "'");
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    if (config.synthetic.has_value() == config.dataset.has_value()) {
        throw InvalidSpec("exactly one of synthetic or dataset must be set");
    }
    if (config.train_sizes_per_class.empty()) throw InvalidSpec("no train sizes given");
    for (int ts : config.train_sizes_per_class) {
        if (ts < 1) throw InvalidSpec("train sizes must be >= 1");
    }
    if (config.test_per_class < 1) throw InvalidSpec("test_per_class must be >= 1");
    if (config.methods.empty()) throw InvalidSpec("no methods given");
    if (config.repeats < 1) throw InvalidSpec("repeats must be >= 1");

    const LabeledDataset pool =
        config.synthetic ? generate_synthetic(*config.synthetic).data : *config.dataset;

    ExperimentReport report;
    report.config = config;
    report.cells.reserve(config.train_sizes_per_class.size() * config.methods.size());

    for (std::size_t si = 0; si < config.train_sizes_per_class.size(); ++si) {
        const int train_size = config.train_sizes_per_class[si];
        std::vector<ExperimentCell> row_cells(config.methods.size());
        for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
            row_cells[mi].train_size = train_size;
            row_cells[mi].method = config.methods[mi];
            row_cells[mi].repeats.reserve(static_cast<std::size_t>(config.repeats));
        }

        for (int rep = 0; rep < config.repeats; ++rep) {
            const std::uint64_t split_seed =
                derive_seed(config.master_seed, 1000 + si, static_cast<std::uint64_t>(rep));
            const auto [train, test] = train_test_split(pool, train_size, config.test_per_class,
                                                        split_seed);
            for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
                const Method method = config.methods[mi];
                try {
                    std::vector<Prediction> preds;
                    if (method == Method::LdaPseudoInverse) {
                        preds = plain_lda_predict(train, test.features,
                                                  {CovarianceMode::Kind::PseudoInverse});
                    } else if (method == Method::LdaShrinkage) {
                        preds = plain_lda_predict(
                            train, test.features,
                            {CovarianceMode::Kind::Shrinkage, config.shrinkage_gamma});
                    } else {
                        FitConfig fc;
                        fc.variant = method == Method::Fwda ? Variant::Fwda
                                     : method == Method::DiscreteFwda ? Variant::DiscreteFwda
                                                                      : Variant::SampleFwda;
                        fc.lambda = config.lambda;
                        fc.ensemble_size = config.ensemble_size;
                        fc.seed = derive_seed(split_seed, 2000 + mi);
                        fc.solver_tol = config.solver_tol;
                        fc.solver_max_iter = config.solver_max_iter;
                        const FwdaModel model = fit(train, fc);
                        preds = predict(model, test.features);
                    }
                    row_cells[mi].repeats.push_back(score_metrics(preds, test.labels));
                } catch (const Error& e) {
                    throw Error(e.kind(), e.detail() + " [train_size=" +
                                              std::to_string(train_size) + ", repeat=" +
                                              std::to_string(rep) + ", method=" +
                                              method_name(method) + "]");
                }
            }
        }

        for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
            std::vector<double> acc, f1;
            for (const Metrics& m : row_cells[mi].repeats) {
                acc.push_back(m.accuracy);
                f1.push_back(m.f1);
            }
            row_cells[mi].accuracy_mean = mean_of(acc);
            row_cells[mi].accuracy_std = std_of(acc);
            row_cells[mi].f1_mean = mean_of(f1);
            row_cells[mi].f1_std = std_of(f1);
            report.cells.push_back(std::move(row_cells[mi]));
        }
    }
    return report;
}

namespace {

nlohmann::json config_to_json(const ExperimentConfig& config) {
    nlohmann::json j;
    if (config.synthetic) {
        const SyntheticSpec& s = *config.synthetic;
        nlohmann::json sj;
        sj["dim"] = s.dim;
        sj["n_per_class"] = s.n_per_class;
        sj["mean_separation"] = s.mean_separation;
        sj["seed"] = s.seed;
        const SymmetricMatrix precision =
            s.true_precision ? *s.true_precision : banded_precision(s.dim);
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(s.dim * s.dim));
        for (int r = 0; r < s.dim; ++r)
            for (int c = 0; c < s.dim; ++c) flat.push_back(precision(r, c));
        sj["true_precision"] = flat;
        j["source"] = nlohmann::json{{"synthetic", sj}};
    } else if (config.dataset) {
        j["source"] = nlohmann::json{
            {"dataset", {{"rows", config.dataset->n()}, {"dim", config.dataset->p()}}}};
    }
    j["train_sizes_per_class"] = config.train_sizes_per_class;
    j["test_per_class"] = config.test_per_class;
    std::vector<std::string> names;
    for (Method m : config.methods) names.push_back(method_name(m));
    j["methods"] = names;
    j["lambda"] = config.lambda;
    j["ensemble_size"] = config.ensemble_size;
    j["shrinkage_gamma"] = config.shrinkage_gamma;
    j["repeats"] = config.repeats;
    j["master_seed"] = config.master_seed;
    j["solver_tol"] = config.solver_tol;
    j["solver_max_iter"] = config.solver_max_iter;
    return j;
}

}  // namespace

std::string report_to_json(const ExperimentReport& report) {
    nlohmann::json j;
    j["config"] = config_to_json(report.config);
    nlohmann::json cells = nlohmann::json::array();
    for (const ExperimentCell& cell : report.cells) {
        nlohmann::json cj;
        cj["train_size"] = cell.train_size;
        cj["method"] = method_name(cell.method);
        cj["accuracy_mean"] = cell.accuracy_mean;
        cj["accuracy_std"] = cell.accuracy_std;
        cj["f1_mean"] = cell.f1_mean;
        cj["f1_std"] = cell.f1_std;
        nlohmann::json reps = nlohmann::json::array();
        for (const Metrics& m : cell.repeats) {
            reps.push_back({{"accuracy", m.accuracy},
                            {"f1", m.f1},
                            {"tp", m.tp},
                            {"fp", m.fp},
                            {"tn", m.tn},
                            {"fn", m.fn}});
        }
        cj["repeats"] = reps;
        cells.push_back(cj);
    }
    j["results"] = cells;
    return j.dump();
}

void write_report_json(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << report_to_json(report) << '\n';
    if (!out) throw IoError("failed writing '" + path + "'");
}

void write_report_csv(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "train_size,method,repeat,accuracy,f1,tp,fp,tn,fn\n";
    for (const ExperimentCell& cell : report.cells) {
        for (std::size_t r = 0; r < cell.repeats.size(); ++r) {
            const Metrics& m = cell.repeats[r];
            out << cell.train_size << ',' << method_name(cell.method) << ',' << r << ','
                << format_double(m.accuracy) << ',' << format_double(m.f1) << ',' << m.tp << ','
                << m.fp << ',' << m.tn << ',' << m.fn << '\n';
        }
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace fwda
