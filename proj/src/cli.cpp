#include "fwda/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>

#include "fwda/classifier.hpp"
#include "fwda/data_io.hpp"
#include "fwda/eval.hpp"
#include "fwda/rng.hpp"

namespace fwda::cli {
namespace {

using nlohmann::json;

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<double> to_flat(const SymmetricMatrix& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.dim() * m.dim()));
    for (Eigen::Index r = 0; r < m.dim(); ++r)
        for (Eigen::Index c = 0; c < m.dim(); ++c) flat.push_back(m(r, c));
    return flat;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("failed writing '" + path + "'");
}

struct FitArgs {
    std::string input;
    std::string label_column = "label";
    std::string variant = "fwda";
    std::string out;
    double lambda = 1.0;
    int samples = 200;
    std::uint64_t seed = 42;
    double tol = 1e-4;
    int max_iter = 100;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    const LabeledDataset data = load_csv(a.input, a.label_column);

    FitConfig config;
    config.variant = variant_from_name(a.variant);
    config.lambda = a.lambda;
    config.ensemble_size = a.samples;
    config.seed = a.seed;
    config.solver_tol = a.tol;
    config.solver_max_iter = a.max_iter;

    FitInfo info;
    const FwdaModel model = fit(data, config, &info);
    save_model(model, a.out);

    json summary;
    summary["n"] = info.n;
    summary["p"] = info.p;
    summary["dof"] = model.wishart.dof();
    summary["dof_requested"] = model.wishart.dof_requested();
    summary["kkt_residual"] = info.kkt_residual;
    summary["solver_iterations"] = info.solver_iterations;
    summary["solver_converged"] = info.solver_converged;
    summary["lambda"] = model.lambda;
    summary["ensemble_size"] = model.ensemble_size;
    summary["seed"] = model.seed;
    summary["variant"] = variant_name(model.variant);
    summary["model_path"] = a.out;
    summary["wall_seconds"] = seconds_since(start);
    out << summary.dump() << '\n';
    return 0;
}

struct PredictArgs {
    std::string model;
    std::string input;
    std::optional<std::string> label_column;
    std::string out;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, bool quiet) {
    const FwdaModel model = load_model(a.model);
    const FeatureMatrix features = load_features_csv(a.input, a.label_column);
    const std::vector<Prediction> predictions = predict(model, features.features);

    std::ofstream file(a.out);
    if (!file) throw IoError("cannot open '" + a.out + "' for writing");
    file << "row_index,score,label\n";
    for (std::size_t r = 0; r < predictions.size(); ++r) {
        file << r << ',' << format_double(predictions[r].score) << ',' << predictions[r].label
             << '\n';
    }
    if (!file) throw IoError("failed writing '" + a.out + "'");
    if (!quiet) out << "wrote " << predictions.size() << " predictions to " << a.out << '\n';
    return 0;
}

struct SynthArgs {
    int dim = 50;
    int n_per_class = 120;
    double separation = 3.0;
    double rho = 0.4;
    std::uint64_t seed = 42;
    std::string out;
    std::string truth_out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, bool quiet) {
    SyntheticSpec spec;
    spec.dim = a.dim;
    spec.n_per_class = a.n_per_class;
    spec.mean_separation = a.separation;
    spec.seed = a.seed;
    spec.true_precision = banded_precision(a.dim, a.rho);
    const SyntheticData data = generate_synthetic(spec);
    save_csv(data.data, a.out);

    if (!a.truth_out.empty()) {
        json truth;
        truth["dim"] = a.dim;
        truth["n_per_class"] = a.n_per_class;
        truth["mean_separation"] = a.separation;
        truth["seed"] = a.seed;
        truth["true_precision"] = to_flat(data.true_precision);
        truth["pos_mean"] = std::vector<double>(data.pos_mean.begin(), data.pos_mean.end());
        truth["neg_mean"] = std::vector<double>(data.neg_mean.begin(), data.neg_mean.end());
        truth["bayes_ceiling"] = bayes_ceiling(data.true_precision, a.separation);
        write_text(a.truth_out, truth.dump() + "\n");
    }
    if (!quiet) {
        out << "wrote " << data.data.n() << " rows (" << a.dim << " features) to " << a.out
            << '\n';
    }
    return 0;
}

// Config-file schema mirrors ExperimentConfig field names.
ExperimentConfig parse_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InvalidSpec("config is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw InvalidSpec("config must be a JSON object");

    ExperimentConfig config;
    if (!j.contains("source") || !j["source"].is_object()) {
        throw InvalidSpec("config needs a 'source' object");
    }
    const json& source = j["source"];
    if (source.contains("synthetic")) {
        const json& s = source["synthetic"];
        SyntheticSpec spec;
        if (s.contains("dim")) spec.dim = s["dim"].get<int>();
        if (s.contains("n_per_class")) spec.n_per_class = s["n_per_class"].get<int>();
        if (s.contains("mean_separation")) spec.mean_separation = s["mean_separation"].get<double>();
        if (s.contains("seed")) spec.seed = s["seed"].get<std::uint64_t>();
        double rho = 0.4;
        if (s.contains("band_rho")) rho = s["band_rho"].get<double>();
        if (s.contains("true_precision")) {
            const auto flat = s["true_precision"].get<std::vector<double>>();
            if (flat.size() != static_cast<std::size_t>(spec.dim) * static_cast<std::size_t>(spec.dim)) {
                throw InvalidSpec("true_precision must have dim*dim entries");
            }
            Eigen::MatrixXd m(spec.dim, spec.dim);
            for (int r = 0; r < spec.dim; ++r)
                for (int c = 0; c < spec.dim; ++c)
                    m(r, c) = flat[static_cast<std::size_t>(r) * spec.dim + c];
            spec.true_precision = SymmetricMatrix(m);
        } else {
            spec.true_precision = banded_precision(spec.dim, rho);
        }
        config.synthetic = spec;
    } else if (source.contains("csv")) {
        const json& c = source["csv"];
        if (!c.contains("path")) throw InvalidSpec("source.csv needs a 'path'");
        const std::string label = c.contains("label_column")
                                      ? c["label_column"].get<std::string>()
                                      : std::string("label");
        config.dataset = load_csv(c["path"].get<std::string>(), label);
    } else {
        throw InvalidSpec("source must contain 'synthetic' or 'csv'");
    }

    if (j.contains("train_sizes_per_class")) {
        config.train_sizes_per_class = j["train_sizes_per_class"].get<std::vector<int>>();
    }
    if (j.contains("test_per_class")) config.test_per_class = j["test_per_class"].get<int>();
    if (j.contains("methods")) {
        config.methods.clear();
        for (const auto& name : j["methods"]) {
            config.methods.push_back(method_from_name(name.get<std::string>()));
        }
    }
    if (j.contains("lambda")) config.lambda = j["lambda"].get<double>();
    if (j.contains("ensemble_size")) config.ensemble_size = j["ensemble_size"].get<int>();
    if (j.contains("shrinkage_gamma")) config.shrinkage_gamma = j["shrinkage_gamma"].get<double>();
    if (j.contains("repeats")) config.repeats = j["repeats"].get<int>();
    if (j.contains("master_seed")) config.master_seed = j["master_seed"].get<std::uint64_t>();
    if (j.contains("solver_tol")) config.solver_tol = j["solver_tol"].get<double>();
    if (j.contains("solver_max_iter")) config.solver_max_iter = j["solver_max_iter"].get<int>();
    return config;
}

struct EvalArgs {
    std::string config;
    std::string out_json;
    std::string out_csv;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, bool quiet) {
    const ExperimentConfig config = parse_experiment_config(a.config);
    const ExperimentReport report = run_experiment(config);
    if (!a.out_json.empty()) write_report_json(report, a.out_json);
    if (!a.out_csv.empty()) write_report_csv(report, a.out_csv);
    if (!quiet) {
        for (const ExperimentCell& cell : report.cells) {
            out << "train_size=" << cell.train_size << " method=" << method_name(cell.method)
                << " accuracy=" << format_double(cell.accuracy_mean) << " (sd "
                << format_double(cell.accuracy_std) << ") f1=" << format_double(cell.f1_mean)
                << '\n';
        }
    }
    return 0;
}

struct ConvergeArgs {
    int dim = 5;
    int train_per_class = 100;
    int points = 50;
    int num_seeds = 20;
    int reference_multiple = 20;
    int samples = 200;
    double lambda = 1.0;
    double separation = 3.0;
    std::uint64_t seed = 42;
    std::vector<int> m_grid;
    std::string out;
};

int cmd_converge(const ConvergeArgs& a, std::ostream& out) {
    std::vector<int> m_grid = a.m_grid;
    if (m_grid.empty()) m_grid = {10, 40, 160, 640, 2560};

    SyntheticSpec spec;
    spec.dim = a.dim;
    spec.n_per_class = a.train_per_class + a.points;
    spec.mean_separation = a.separation;
    spec.seed = derive_seed(a.seed, 1);
    const SyntheticData pool = generate_synthetic(spec);
    const auto [train, test] =
        train_test_split(pool.data, a.train_per_class, a.points, derive_seed(a.seed, 2));
    const Eigen::MatrixXd points = test.features.topRows(a.points);

    FitConfig fc;
    fc.lambda = a.lambda;
    fc.ensemble_size = a.samples;
    fc.seed = derive_seed(a.seed, 3);
    const FwdaModel model = fit(train, fc);

    std::vector<std::uint64_t> seeds;
    seeds.reserve(static_cast<std::size_t>(a.num_seeds));
    for (int i = 0; i < a.num_seeds; ++i) seeds.push_back(derive_seed(a.seed, 4, i));

    const int reference_m = a.reference_multiple * m_grid.back();
    const ConvergenceReport report =
        convergence_study(model, points, m_grid, reference_m, seeds);

    json rj;
    rj["m_grid"] = report.m_grid;
    rj["errors"] = report.errors;
    rj["cell_errors"] = report.cell_errors;
    rj["fitted_slope"] = report.fitted_slope;
    rj["empirical_variance"] = report.empirical_variance;
    rj["reference_m"] = report.reference_m;
    rj["seeds"] = report.seeds;
    rj["dim"] = a.dim;
    rj["points"] = a.points;
    out << rj.dump() << '\n';
    if (!a.out.empty()) write_text(a.out, rj.dump() + "\n");
    return 0;
}

struct BenchArgs {
    int dim = 50;
    int train_per_class = 40;
    int points = 400;
    int samples = 200;
    int oracle_m = 0;  // 0: same as samples
    double lambda = 1.0;
    double separation = 3.0;
    std::uint64_t seed = 42;
    std::string out;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
    SyntheticSpec spec;
    spec.dim = a.dim;
    spec.n_per_class = a.train_per_class + (a.points + 1) / 2;
    spec.mean_separation = a.separation;
    spec.seed = derive_seed(a.seed, 1);
    const SyntheticData pool = generate_synthetic(spec);
    const auto [train, test] =
        train_test_split(pool.data, a.train_per_class, (a.points + 1) / 2, derive_seed(a.seed, 2));
    const Eigen::MatrixXd xs = test.features.topRows(a.points);

    FitConfig fc;
    fc.lambda = a.lambda;
    fc.ensemble_size = a.samples;
    fc.seed = derive_seed(a.seed, 3);
    const FwdaModel model = fit(train, fc);

    const int oracle_m = a.oracle_m > 0 ? a.oracle_m : a.samples;
    const TimingComparison timing = timing_comparison(model, xs, oracle_m);

    json bj;
    bj["lazy_total_seconds"] = timing.lazy_total_seconds;
    bj["adaptive_total_seconds"] = timing.adaptive_total_seconds;
    bj["ratio"] = timing.ratio;
    bj["points"] = a.points;
    bj["oracle_m"] = oracle_m;
    bj["ensemble_size"] = a.samples;
    bj["dim"] = a.dim;
    out << bj.dump() << '\n';
    if (!a.out.empty()) write_text(a.out, bj.dump() + "\n");
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Wishart-ensemble discriminant analysis"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("--quiet", quiet, "suppress progress output on stdout");

    FitArgs fit_args;
    CLI::App* fit_cmd = app.add_subcommand("fit", "fit a model from a labeled CSV");
    fit_cmd->add_option("--input", fit_args.input, "training CSV")->required();
    fit_cmd->add_option("--label-column", fit_args.label_column, "label column name or index");
    fit_cmd->add_option("--lambda", fit_args.lambda, "off-diagonal penalty")
        ->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("--samples", fit_args.samples, "ensemble size")
        ->check(CLI::PositiveNumber);
    fit_cmd->add_option("--seed", fit_args.seed, "sampling seed");
    fit_cmd->add_option("--variant", fit_args.variant, "fwda, discrete_fwda, or sample_fwda")
        ->check(CLI::IsMember({"fwda", "discrete_fwda", "sample_fwda"}));
    fit_cmd->add_option("--tol", fit_args.tol, "solver tolerance")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--max-iter", fit_args.max_iter, "solver iteration cap")
        ->check(CLI::PositiveNumber);
    fit_cmd->add_option("--out", fit_args.out, "model JSON path")->required();

    PredictArgs predict_args;
    std::string predict_label;
    CLI::App* predict_cmd = app.add_subcommand("predict", "score a feature CSV with a model");
    predict_cmd->add_option("--model", predict_args.model, "model JSON path")->required();
    predict_cmd->add_option("--input", predict_args.input, "feature CSV")->required();
    CLI::Option* predict_label_opt = predict_cmd->add_option(
        "--label-column", predict_label, "column to drop (defaults to a 'label' header)");
    predict_cmd->add_option("--out", predict_args.out, "prediction CSV path")->required();

    SynthArgs synth_args;
    CLI::App* synth_cmd = app.add_subcommand("synth", "emit a synthetic two-class CSV");
    synth_cmd->add_option("--dim", synth_args.dim, "feature count")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--n-per-class", synth_args.n_per_class, "rows per class")
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--separation", synth_args.separation, "class mean separation")
        ->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--rho", synth_args.rho, "banded precision off-diagonal");
    synth_cmd->add_option("--seed", synth_args.seed, "generator seed");
    synth_cmd->add_option("--out", synth_args.out, "output CSV path")->required();
    synth_cmd->add_option("--truth-out", synth_args.truth_out, "ground-truth JSON path");

    EvalArgs eval_args;
    CLI::App* eval_cmd = app.add_subcommand("eval", "run a repeated-split benchmark");
    eval_cmd->add_option("--config", eval_args.config, "experiment config JSON")->required();
    eval_cmd->add_option("--out-json", eval_args.out_json, "report JSON path");
    eval_cmd->add_option("--out-csv", eval_args.out_csv, "flat report CSV path");

    ConvergeArgs converge_args;
    CLI::App* converge_cmd =
        app.add_subcommand("converge", "measure ensemble-size error decay");
    converge_cmd->add_option("--dim", converge_args.dim, "feature count")
        ->check(CLI::PositiveNumber);
    converge_cmd->add_option("--train", converge_args.train_per_class, "train rows per class")
        ->check(CLI::PositiveNumber);
    converge_cmd->add_option("--points", converge_args.points, "test points")
        ->check(CLI::PositiveNumber);
    converge_cmd->add_option("--seeds", converge_args.num_seeds, "replicate seeds")
        ->check(CLI::PositiveNumber);
    converge_cmd->add_option("--reference-multiple", converge_args.reference_multiple,
                             "reference size as a multiple of the largest grid entry")
        ->check(CLI::PositiveNumber);
    converge_cmd->add_option("--samples", converge_args.samples, "fitted ensemble size")
        ->check(CLI::PositiveNumber);
    converge_cmd->add_option("--lambda", converge_args.lambda, "off-diagonal penalty")
        ->check(CLI::NonNegativeNumber);
    converge_cmd->add_option("--separation", converge_args.separation, "class mean separation")
        ->check(CLI::NonNegativeNumber);
    converge_cmd->add_option("--seed", converge_args.seed, "master seed");
    converge_cmd->add_option("--m-grid", converge_args.m_grid, "ensemble sizes to probe");
    converge_cmd->add_option("--out", converge_args.out, "report JSON path");

    BenchArgs bench_args;
    CLI::App* bench_cmd = app.add_subcommand("bench", "time lazy vs per-input reference scoring");
    bench_cmd->add_option("--dim", bench_args.dim, "feature count")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--train", bench_args.train_per_class, "train rows per class")
        ->check(CLI::PositiveNumber);
    bench_cmd->add_option("--points", bench_args.points, "prediction inputs")
        ->check(CLI::PositiveNumber);
    bench_cmd->add_option("--samples", bench_args.samples, "ensemble size")
        ->check(CLI::PositiveNumber);
    bench_cmd->add_option("--oracle-m", bench_args.oracle_m, "reference draws per input");
    bench_cmd->add_option("--lambda", bench_args.lambda, "off-diagonal penalty")
        ->check(CLI::NonNegativeNumber);
    bench_cmd->add_option("--separation", bench_args.separation, "class mean separation")
        ->check(CLI::NonNegativeNumber);
    bench_cmd->add_option("--seed", bench_args.seed, "master seed");
    bench_cmd->add_option("--out", bench_args.out, "report JSON path");

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("fwda");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        if (*fit_cmd) return cmd_fit(fit_args, out);
        if (*predict_cmd) {
            if (*predict_label_opt) predict_args.label_column = predict_label;
            return cmd_predict(predict_args, out, quiet);
        }
        if (*synth_cmd) return cmd_synth(synth_args, out, quiet);
        if (*eval_cmd) return cmd_eval(eval_args, out, quiet);
        if (*converge_cmd) return cmd_converge(converge_args, out);
        if (*bench_cmd) return cmd_bench(bench_args, out);
    } catch (const Error& e) {
        err << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return 1;
    }
    err << "no subcommand selected\n";
    return 2;
}

}  // namespace fwda::cli
