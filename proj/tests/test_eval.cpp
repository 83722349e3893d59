#include <fwda/classifier.hpp>
#include <fwda/data_io.hpp>
#include <fwda/errors.hpp>
#include <fwda/eval.hpp>
#include <fwda/rng.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <doctest.h>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

using fwda::ExperimentConfig;
using fwda::ExperimentReport;
using fwda::FitConfig;
using fwda::FwdaModel;
using fwda::LabeledDataset;
using fwda::Method;
using fwda::Metrics;
using fwda::Prediction;

namespace {

LabeledDataset synthetic_set(int dim, int n_per_class, double sep, std::uint64_t seed) {
    fwda::SyntheticSpec spec;
    spec.dim = dim;
    spec.n_per_class = n_per_class;
    spec.mean_separation = sep;
    spec.seed = seed;
    return fwda::generate_synthetic(spec).data;
}

FwdaModel small_model(std::uint64_t seed) {
    FitConfig cfg;
    cfg.lambda = 0.1;
    cfg.ensemble_size = 50;
    cfg.seed = seed;
    return fwda::fit(synthetic_set(2, 80, 3.0, seed + 7), cfg);
}

std::vector<Prediction> as_predictions(const std::vector<int>& labels) {
    std::vector<Prediction> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out[i] = {labels[i], static_cast<double>(labels[i])};
    }
    return out;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/fwda_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("score_metrics counts a hand-worked confusion table") {
    // predicted: + + - -   actual: + - + -
    const auto preds = as_predictions({1, 1, -1, -1});
    const Metrics m = fwda::score_metrics(preds, {1, -1, 1, -1});
    CHECK(m.tp == 1);
    CHECK(m.fp == 1);
    CHECK(m.fn == 1);
    CHECK(m.tn == 1);
    CHECK(m.accuracy == doctest::Approx(0.5));
    CHECK(m.f1 == doctest::Approx(0.5).epsilon(1e-12));  // precision = recall = 1/2

    // Missed positive but no false alarm: F1 = 2tp / (2tp + fp + fn) = 2/3.
    const Metrics miss = fwda::score_metrics(as_predictions({1, -1, -1}), {1, 1, -1});
    CHECK(miss.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("score_metrics perfect and degenerate cases") {
    const Metrics perfect = fwda::score_metrics(as_predictions({1, -1, 1}), {1, -1, 1});
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.f1 == 1.0);

    // No positives anywhere: F1's 0/0 convention is 0, accuracy is still 1.
    const Metrics allneg = fwda::score_metrics(as_predictions({-1, -1}), {-1, -1});
    CHECK(allneg.accuracy == 1.0);
    CHECK(allneg.f1 == 0.0);
    CHECK(allneg.tn == 2);
}

TEST_CASE("score_metrics input validation") {
    CHECK_THROWS_AS((void)fwda::score_metrics(as_predictions({1}), {1, -1}), fwda::ShapeError);
    CHECK_THROWS_WITH_AS((void)fwda::score_metrics(as_predictions({}), {}),
                         doctest::Contains("no predictions"), fwda::EmptyInput);
    CHECK_THROWS_WITH_AS((void)fwda::score_metrics(as_predictions({1, 1}), {1, 0}),
                         doctest::Contains("index 1"), fwda::LabelError);
}

TEST_CASE("adaptive reference score is self-normalized") {
    const FwdaModel model = small_model(21);
    fwda::Philox gen(99, 0);
    for (int t = 0; t < 10; ++t) {
        Eigen::VectorXd x(2);
        x << 4.0 * gen.normal(), 4.0 * gen.normal();
        const double s = fwda::adaptive_reference_score(x, model, 400, 1234 + t);
        CHECK(s >= -1.0);
        CHECK(s <= 1.0);
    }

    // One draw: the weight cancels, leaving exactly the member's sign.
    Eigen::VectorXd x(2);
    x << 1.0, -0.5;
    const double one = fwda::adaptive_reference_score(x, model, 1, 77);
    CHECK(std::abs(one) == 1.0);

    CHECK_THROWS_AS((void)fwda::adaptive_reference_score(x, model, 0, 1),
                    fwda::InvalidParameter);
}

TEST_CASE("adaptive reference score is deterministic in the seed") {
    const FwdaModel model = small_model(22);
    // Probe on the fitted boundary: with x - gm orthogonal to T-hat * delta
    // the mean discriminant vanishes, members split on the sign, and the
    // score is strictly inside (-1, 1) and genuinely seed-dependent.
    const Eigen::VectorXd delta = model.pos_mean - model.neg_mean;
    const Eigen::VectorXd proj = model.wishart.scale().mat() * delta;
    Eigen::VectorXd x = model.global_mean;
    x(0) += -proj(1) / proj.norm();
    x(1) += proj(0) / proj.norm();
    const double a = fwda::adaptive_reference_score(x, model, 256, 5);
    const double b = fwda::adaptive_reference_score(x, model, 256, 5);
    const double c = fwda::adaptive_reference_score(x, model, 256, 6);
    CHECK(a == b);
    CHECK(std::abs(a) < 1.0);
    CHECK(a != c);
}

TEST_CASE("convergence study validations") {
    const FwdaModel model = small_model(23);
    const Eigen::MatrixXd pts = Eigen::MatrixXd::Random(4, 2);

    CHECK_THROWS_AS((void)fwda::convergence_study(model, pts, {}, 100, {1}),
                    fwda::InvalidParameter);
    CHECK_THROWS_AS((void)fwda::convergence_study(model, pts, {10, 10}, 100, {1}),
                    fwda::InvalidParameter);
    CHECK_THROWS_AS((void)fwda::convergence_study(model, pts, {0, 10}, 100, {1}),
                    fwda::InvalidParameter);
    CHECK_THROWS_AS((void)fwda::convergence_study(model, pts, {10, 40}, 39, {1}),
                    fwda::InvalidParameter);
    CHECK_THROWS_AS((void)fwda::convergence_study(model, pts, {10}, 100, {}),
                    fwda::InvalidParameter);
    CHECK_THROWS_AS(
        (void)fwda::convergence_study(model, Eigen::MatrixXd(0, 2), {10}, 100, {1}),
        fwda::EmptyInput);
    CHECK_THROWS_AS(
        (void)fwda::convergence_study(model, Eigen::MatrixXd::Random(3, 5), {10}, 100, {1}),
        fwda::ShapeError);
}

TEST_CASE("convergence study scoring the reference against itself is exact") {
    // Same seed and same size as the reference regenerates the identical
    // ensemble, so the error is exactly zero and no slope can be fitted.
    const FwdaModel model = small_model(24);
    const Eigen::MatrixXd pts = Eigen::MatrixXd::Random(6, 2) * 3.0;
    const auto report =
        fwda::convergence_study(model, pts, {512}, 512, {model.seed});
    REQUIRE(report.errors.size() == 1);
    CHECK(report.errors[0] == 0.0);
    CHECK(report.fitted_slope == 0.0);
    CHECK(report.reference_m == 512);
}

TEST_CASE("convergence study error shrinks with the ensemble size") {
    const FwdaModel model = small_model(25);
    fwda::Philox gen(4242, 0);
    Eigen::MatrixXd pts(12, 2);
    for (Eigen::Index r = 0; r < pts.rows(); ++r) {
        pts(r, 0) = 3.0 * gen.normal();
        pts(r, 1) = 3.0 * gen.normal();
    }
    const std::vector<std::uint64_t> seeds = {11, 12, 13, 14, 15, 16};
    const auto report = fwda::convergence_study(model, pts, {8, 64, 512}, 8192, seeds);

    REQUIRE(report.errors.size() == 3);
    REQUIRE(report.cell_errors.size() == 3);
    REQUIRE(report.cell_errors[0].size() == seeds.size());
    for (double e : report.errors) CHECK(e > 0.0);
    CHECK(report.errors[2] < report.errors[0]);
    CHECK(report.fitted_slope < -0.1);
    CHECK(report.fitted_slope > -1.2);
    CHECK(report.empirical_variance > 0.0);

    // Means are the average of the per-seed cells.
    for (std::size_t mi = 0; mi < report.errors.size(); ++mi) {
        double s = 0.0;
        for (double c : report.cell_errors[mi]) s += c;
        CHECK(report.errors[mi] ==
              doctest::Approx(s / static_cast<double>(seeds.size())).epsilon(1e-15));
    }
}

TEST_CASE("clamped contributions respect the Hoeffding tail bound") {
    // With every member contribution clamped to [0, 1] the ensemble mean is
    // an average of bounded draws, so deviations from the reference obey
    // P(|err| > t) <= 2 exp(-2 m t^2). At eta = 0.05 per cell almost every
    // cell must sit inside the bound (plus the reference's own slack).
    const FwdaModel model = small_model(26);
    Eigen::MatrixXd pt(1, 2);
    pt << 1.2, -0.4;
    const auto clamp01 = [](double c) { return std::clamp(c, 0.0, 1.0); };

    const std::vector<int> grid = {16, 64, 256};
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 31; s < 41; ++s) seeds.push_back(s);
    const auto report = fwda::convergence_study(model, pt, grid, 8192, seeds, clamp01);

    const double eta = 0.05;
    const double ref_slack = std::sqrt(std::log(2.0 / eta) / (2.0 * 8192.0));
    int inside = 0, total = 0;
    for (std::size_t mi = 0; mi < grid.size(); ++mi) {
        const double bound =
            std::sqrt(std::log(2.0 / eta) / (2.0 * static_cast<double>(grid[mi])));
        for (double err : report.cell_errors[mi]) {
            ++total;
            inside += (err <= bound + ref_slack);
        }
    }
    REQUIRE(total == 30);
    CHECK(inside >= static_cast<int>(std::ceil(0.9 * total)));
}

TEST_CASE("timing comparison reuses the model ensemble") {
    const FwdaModel model = small_model(27);
    Eigen::MatrixXd xs(20, 2);
    fwda::Philox gen(88, 0);
    for (Eigen::Index r = 0; r < xs.rows(); ++r) {
        xs(r, 0) = 2.0 * gen.normal();
        xs(r, 1) = 2.0 * gen.normal();
    }

    const auto timing = fwda::timing_comparison(model, xs, 200);
    CHECK(timing.lazy_total_seconds > 0.0);
    CHECK(timing.adaptive_total_seconds > 0.0);
    CHECK(timing.ratio > 0.0);
    REQUIRE(timing.lazy_predictions.size() == 20);

    // The lazy path is exactly predict(); timing must not perturb results.
    const auto direct = fwda::predict(model, xs);
    for (std::size_t i = 0; i < direct.size(); ++i) {
        CHECK(timing.lazy_predictions[i].label == direct[i].label);
        CHECK(timing.lazy_predictions[i].score == direct[i].score);
    }

    CHECK_THROWS_AS((void)fwda::timing_comparison(model, Eigen::MatrixXd(0, 2), 10),
                    fwda::EmptyInput);
    CHECK_THROWS_AS((void)fwda::timing_comparison(model, xs, 0), fwda::InvalidParameter);
}

TEST_CASE("method names round-trip") {
    const std::vector<Method> all = {Method::Fwda, Method::DiscreteFwda, Method::SampleFwda,
                                     Method::LdaPseudoInverse, Method::LdaShrinkage};
    const std::vector<std::string> names = {"fwda", "discrete_fwda", "sample_fwda", "lda_pinv",
                                            "lda_shrinkage"};
    for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK(fwda::method_name(all[i]) == names[i]);
        CHECK(fwda::method_from_name(names[i]) == all[i]);
    }
    CHECK_THROWS_WITH_AS((void)fwda::method_from_name("qda"), doctest::Contains("qda"),
                         fwda::InvalidParameter);
}

TEST_CASE("run_experiment validates its config") {
    ExperimentConfig config;
    // Neither source.
    CHECK_THROWS_WITH_AS((void)fwda::run_experiment(config), doctest::Contains("exactly one"),
                         fwda::InvalidSpec);

    fwda::SyntheticSpec spec;
    spec.dim = 2;
    spec.n_per_class = 50;
    config.synthetic = spec;
    config.dataset = synthetic_set(2, 10, 2.0, 1);
    CHECK_THROWS_AS((void)fwda::run_experiment(config), fwda::InvalidSpec);

    config.dataset.reset();
    config.train_sizes_per_class = {};
    CHECK_THROWS_AS((void)fwda::run_experiment(config), fwda::InvalidSpec);
    config.train_sizes_per_class = {0};
    CHECK_THROWS_AS((void)fwda::run_experiment(config), fwda::InvalidSpec);
    config.train_sizes_per_class = {10};
    config.test_per_class = 0;
    CHECK_THROWS_AS((void)fwda::run_experiment(config), fwda::InvalidSpec);
    config.test_per_class = 5;
    config.methods = {};
    CHECK_THROWS_AS((void)fwda::run_experiment(config), fwda::InvalidSpec);
    config.methods = {Method::Fwda};
    config.repeats = 0;
    CHECK_THROWS_AS((void)fwda::run_experiment(config), fwda::InvalidSpec);
}

TEST_CASE("run_experiment wraps method failures with cell context") {
    ExperimentConfig config;
    fwda::SyntheticSpec spec;
    spec.dim = 2;
    spec.n_per_class = 30;
    spec.seed = 9;
    config.synthetic = spec;
    config.train_sizes_per_class = {10};
    config.test_per_class = 5;
    config.methods = {Method::Fwda};
    config.lambda = -1.0;  // rejected by fit
    config.repeats = 2;

    try {
        (void)fwda::run_experiment(config);
        FAIL("expected a wrapped error");
    } catch (const fwda::Error& e) {
        CHECK(e.kind() == "InvalidParameter");
        CHECK(e.detail().find("[train_size=10, repeat=0, method=fwda]") != std::string::npos);
    }
}

TEST_CASE("run_experiment is deterministic and fills every cell") {
    ExperimentConfig config;
    fwda::SyntheticSpec spec;
    spec.dim = 3;
    spec.n_per_class = 60;
    spec.mean_separation = 2.5;
    spec.seed = 5;
    config.synthetic = spec;
    config.train_sizes_per_class = {15, 30};
    config.test_per_class = 20;
    config.methods = {Method::Fwda, Method::LdaPseudoInverse};
    config.lambda = 0.2;
    config.ensemble_size = 40;
    config.repeats = 3;
    config.master_seed = 77;

    const ExperimentReport a = fwda::run_experiment(config);
    const ExperimentReport b = fwda::run_experiment(config);
    CHECK(fwda::report_to_json(a) == fwda::report_to_json(b));

    REQUIRE(a.cells.size() == 4);  // 2 train sizes x 2 methods, train size major
    CHECK(a.cells[0].train_size == 15);
    CHECK(a.cells[0].method == Method::Fwda);
    CHECK(a.cells[1].train_size == 15);
    CHECK(a.cells[1].method == Method::LdaPseudoInverse);
    CHECK(a.cells[2].train_size == 30);
    CHECK(a.cells[3].train_size == 30);

    for (const auto& cell : a.cells) {
        REQUIRE(cell.repeats.size() == 3);
        double acc = 0.0;
        for (const Metrics& m : cell.repeats) {
            acc += m.accuracy;
            CHECK(m.tp + m.fp + m.tn + m.fn == 40);  // 20 per class
            CHECK(m.accuracy >= 0.0);
            CHECK(m.accuracy <= 1.0);
        }
        CHECK(cell.accuracy_mean == doctest::Approx(acc / 3.0).epsilon(1e-15));
    }

    // Well-separated 3-d classes: every method should beat chance clearly.
    for (const auto& cell : a.cells) CHECK(cell.accuracy_mean > 0.7);
}

TEST_CASE("experiment reports serialize to JSON and CSV") {
    ExperimentConfig config;
    fwda::SyntheticSpec spec;
    spec.dim = 2;
    spec.n_per_class = 40;
    spec.seed = 3;
    config.synthetic = spec;
    config.train_sizes_per_class = {12};
    config.test_per_class = 10;
    config.methods = {Method::Fwda, Method::LdaShrinkage};
    config.ensemble_size = 30;
    config.repeats = 2;

    const ExperimentReport report = fwda::run_experiment(config);

    const auto j = nlohmann::json::parse(fwda::report_to_json(report));
    CHECK(j["config"]["lambda"] == doctest::Approx(1.0));
    CHECK(j["config"]["methods"] == nlohmann::json({"fwda", "lda_shrinkage"}));
    CHECK(j["config"]["source"]["synthetic"]["dim"] == 2);
    REQUIRE(j["results"].size() == 2);
    CHECK(j["results"][0]["method"] == "fwda");
    CHECK(j["results"][0]["repeats"].size() == 2);
    CHECK(j["results"][0]["repeats"][0].contains("tp"));

    TempFile jf("report.json");
    TempFile cf("report.csv");
    fwda::write_report_json(report, jf.path);
    fwda::write_report_csv(report, cf.path);

    const auto parsed = nlohmann::json::parse(slurp(jf.path));
    CHECK(parsed == j);

    const std::string csv = slurp(cf.path);
    std::istringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "train_size,method,repeat,accuracy,f1,tp,fp,tn,fn");
    int rows = 0;
    std::string line;
    std::vector<std::string> first_fields;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        ++rows;
        if (rows == 1) {
            std::istringstream fs(line);
            std::string field;
            while (std::getline(fs, field, ',')) first_fields.push_back(field);
        }
    }
    CHECK(rows == 4);  // 2 methods x 2 repeats
    REQUIRE(first_fields.size() == 9);
    CHECK(first_fields[0] == "12");
    CHECK(first_fields[1] == "fwda");
    CHECK(first_fields[2] == "0");

    CHECK_THROWS_AS(fwda::write_report_json(report, "/nonexistent/dir/r.json"), fwda::IoError);
    CHECK_THROWS_AS(fwda::write_report_csv(report, "/nonexistent/dir/r.csv"), fwda::IoError);
}
