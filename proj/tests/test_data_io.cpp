#include <fwda/data_io.hpp>
#include <fwda/errors.hpp>
#include <fwda/rng.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <doctest.h>
#include <fstream>
#include <set>
#include <string>

#include "oracles.hpp"

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/fwda_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
    void write(const std::string& content) const {
        std::ofstream out(path);
        out << content;
    }
};

}  // namespace

TEST_CASE("format_double round-trips bitwise") {
    fwda::Philox g(515, 0);
    for (int i = 0; i < 2000; ++i) {
        double x = g.normal() * std::pow(10.0, static_cast<double>(g.bounded(61)) - 30.0);
        if (i == 0) x = 0.0;
        if (i == 1) x = -0.0;
        if (i == 2) x = 0.1;
        if (i == 3) x = 1e308;
        const std::string s = fwda::format_double(x);
        double back = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), back);
        REQUIRE(ec == std::errc());
        REQUIRE(ptr == s.data() + s.size());
        REQUIRE(std::memcmp(&back, &x, sizeof(double)) == 0);
    }
}

TEST_CASE("csv save/load round-trips bitwise") {
    fwda::SyntheticSpec spec;
    spec.dim = 4;
    spec.n_per_class = 25;
    spec.seed = 9;
    const fwda::LabeledDataset data = fwda::generate_synthetic(spec).data;

    TempFile f("roundtrip.csv");
    fwda::save_csv(data, f.path);
    const fwda::LabeledDataset back = fwda::load_csv(f.path, "label");

    REQUIRE(back.n() == data.n());
    REQUIRE(back.p() == data.p());
    CHECK(back.features == data.features);
    CHECK(back.labels == data.labels);
    CHECK(back.feature_names == std::vector<std::string>{"f0", "f1", "f2", "f3"});
}

TEST_CASE("header detection and label column resolution") {
    TempFile named("named.csv");
    named.write("a,label,b\n1.5,1,2.5\n3.5,-1,4.5\n");
    const auto by_name = fwda::load_csv(named.path, "label");
    REQUIRE(by_name.n() == 2);
    REQUIRE(by_name.p() == 2);
    CHECK(by_name.features(0, 0) == 1.5);
    CHECK(by_name.features(0, 1) == 2.5);
    CHECK(by_name.labels == std::vector<int>{1, -1});
    CHECK(by_name.feature_names == std::vector<std::string>{"a", "b"});

    // Headerless file: the label column is a 0-based index.
    TempFile bare("bare.csv");
    bare.write("7,0\n8,1\n\n9,0\n");  // blank line is skipped
    const auto by_index = fwda::load_csv(bare.path, "1");
    REQUIRE(by_index.n() == 3);
    CHECK(by_index.feature_names.empty());
    CHECK(by_index.labels == std::vector<int>{-1, 1, -1});  // 0/1 encoding maps down
    CHECK(by_index.features(2, 0) == 9.0);

    CHECK_THROWS_AS((void)fwda::load_csv(named.path, "nope"), fwda::InvalidParameter);
    CHECK_THROWS_AS((void)fwda::load_csv(named.path, "7"), fwda::InvalidParameter);
}

TEST_CASE("csv errors carry 1-based positions") {
    TempFile ragged("ragged.csv");
    ragged.write("a,b,label\n1,2,1\n3,4\n");
    CHECK_THROWS_WITH_AS((void)fwda::load_csv(ragged.path, "label"),
                         doctest::Contains("line 3"), fwda::CsvShapeError);

    TempFile bad("badcell.csv");
    bad.write("a,b,label\n1,2,1\n3,oops,-1\n");
    try {
        (void)fwda::load_csv(bad.path, "label");
        FAIL("expected CsvValueError");
    } catch (const fwda::CsvValueError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        CHECK(std::string(e.what()).find("column 2") != std::string::npos);
        CHECK(std::string(e.what()).find("oops") != std::string::npos);
    }

    TempFile label("badlabel.csv");
    label.write("a,label\n1,1\n2,3\n");
    CHECK_THROWS_WITH_AS((void)fwda::load_csv(label.path, "label"),
                         doctest::Contains("line 3"), fwda::LabelError);

    TempFile empty("empty.csv");
    empty.write("\n\n");
    CHECK_THROWS_AS((void)fwda::load_csv(empty.path, "label"), fwda::EmptyInput);

    CHECK_THROWS_AS((void)fwda::load_csv("/nonexistent/nowhere.csv", "label"), fwda::IoError);
}

TEST_CASE("windows line endings are accepted") {
    TempFile crlf("crlf.csv");
    crlf.write("a,label\r\n1.25,1\r\n2.5,-1\r\n");
    const auto data = fwda::load_csv(crlf.path, "label");
    REQUIRE(data.n() == 2);
    CHECK(data.features(1, 0) == 2.5);
}

TEST_CASE("feature-only loading drops the label column") {
    TempFile f("features.csv");
    f.write("x,label,y\n1,1,2\n3,-1,4\n");

    const auto dropped = fwda::load_features_csv(f.path);  // auto-drop by header name
    REQUIRE(dropped.features.cols() == 2);
    CHECK(dropped.features(0, 0) == 1.0);
    CHECK(dropped.features(0, 1) == 2.0);
    CHECK(dropped.feature_names == std::vector<std::string>{"x", "y"});

    const auto named = fwda::load_features_csv(f.path, std::string("y"));
    REQUIRE(named.features.cols() == 2);
    CHECK(named.features(1, 1) == -1.0);  // label column stays when another is dropped

    TempFile bare("features_bare.csv");
    bare.write("1.5,2.5\n3.5,4.5\n");
    const auto kept = fwda::load_features_csv(bare.path);  // nothing to drop
    REQUIRE(kept.features.cols() == 2);
    CHECK(kept.feature_names.empty());
}

TEST_CASE("banded precision structure") {
    const fwda::SymmetricMatrix m = fwda::banded_precision(5, 0.4);
    for (Eigen::Index j = 0; j < 5; ++j) {
        for (Eigen::Index k = 0; k < 5; ++k) {
            const double expect = j == k ? 1.0 : (std::abs(j - k) == 1 ? 0.4 : 0.0);
            CHECK(m(j, k) == expect);
        }
    }
    CHECK(oracle::min_eigenvalue(fwda::banded_precision(40, 0.4).mat()) > 0.0);
    CHECK_THROWS_AS((void)fwda::banded_precision(0), fwda::InvalidParameter);
}

TEST_CASE("normal cdf against quadrature") {
    for (double z : {-3.0, -1.0, 0.0, 0.5, 1.5, 3.0}) {
        CHECK(std::abs(fwda::normal_cdf(z) - oracle::normal_cdf_quadrature(z)) < 1e-10);
    }
    CHECK(fwda::normal_cdf(0.0) == 0.5);
}

TEST_CASE("accuracy ceiling of the synthetic task") {
    // Unit diagonal in the true precision puts the ceiling at
    // Phi(separation/2).
    const fwda::SymmetricMatrix prec = fwda::banded_precision(5, 0.4);
    CHECK(fwda::bayes_ceiling(prec, 3.0) == doctest::Approx(0.9331928).epsilon(1e-5));
    CHECK(fwda::bayes_ceiling(prec, 0.0) == 0.5);
    CHECK_THROWS_AS((void)fwda::bayes_ceiling(prec, -1.0), fwda::InvalidParameter);
}

TEST_CASE("synthetic generation is reproducible row by row") {
    fwda::SyntheticSpec spec;
    spec.dim = 3;
    spec.n_per_class = 50;
    spec.seed = 77;

    const auto a = fwda::generate_synthetic(spec);
    const auto b = fwda::generate_synthetic(spec);
    CHECK(a.data.features == b.data.features);

    // Row i consumes substream (seed, i): the first rows of the positive
    // class do not depend on how many rows follow them.
    fwda::SyntheticSpec wider = spec;
    wider.n_per_class = 80;
    const auto c = fwda::generate_synthetic(wider);
    CHECK(c.data.features.topRows(50) == a.data.features.topRows(50));

    fwda::SyntheticSpec reseeded = spec;
    reseeded.seed = 78;
    CHECK(fwda::generate_synthetic(reseeded).data.features != a.data.features);

    CHECK(a.pos_mean(0) == 1.5);
    CHECK(a.neg_mean(0) == -1.5);
    CHECK(a.data.labels.front() == 1);
    CHECK(a.data.labels.back() == -1);
}

TEST_CASE("synthetic class-conditional moments match the spec") {
    fwda::SyntheticSpec spec;
    spec.dim = 3;
    spec.n_per_class = 4000;
    spec.mean_separation = 3.0;
    spec.seed = 31;
    const auto synth = fwda::generate_synthetic(spec);

    const Eigen::MatrixXd pos = synth.data.features.topRows(4000);
    const Eigen::MatrixXd expected_cov = synth.true_precision.mat().inverse();
    const Eigen::MatrixXd cov = oracle::two_pass_covariance(pos);
    const Eigen::VectorXd mean = pos.colwise().mean().transpose();

    const int n = 4000;
    for (Eigen::Index j = 0; j < 3; ++j) {
        const double se_mean = std::sqrt(expected_cov(j, j) / n);
        CHECK(std::abs(mean(j) - synth.pos_mean(j)) < 4.0 * se_mean);
        for (Eigen::Index k = j; k < 3; ++k) {
            // Gaussian: Var(S_jk) = (cov_jk^2 + cov_jj cov_kk) / (n - 1).
            const double se = std::sqrt((expected_cov(j, k) * expected_cov(j, k) +
                                         expected_cov(j, j) * expected_cov(k, k)) /
                                        (n - 1));
            CHECK(std::abs(cov(j, k) - expected_cov(j, k)) < 4.0 * se);
        }
    }
}

TEST_CASE("zero separation is indistinguishable, wide separation is easy") {
    fwda::SyntheticSpec flat;
    flat.dim = 2;
    flat.n_per_class = 2000;
    flat.mean_separation = 0.0;
    flat.seed = 5;
    const auto mixed = fwda::generate_synthetic(flat);
    int hits = 0;
    for (Eigen::Index i = 0; i < mixed.data.n(); ++i) {
        const int guess = mixed.data.features(i, 0) >= 0.0 ? 1 : -1;
        if (guess == mixed.data.labels[static_cast<std::size_t>(i)]) ++hits;
    }
    const double acc0 = static_cast<double>(hits) / static_cast<double>(mixed.data.n());
    CHECK(std::abs(acc0 - 0.5) < 4.0 * 0.5 / std::sqrt(4000.0));

    fwda::SyntheticSpec wide;
    wide.dim = 1;
    wide.n_per_class = 1000;
    wide.mean_separation = 6.0;  // ceiling Phi(3) ~ 0.9987
    wide.seed = 6;
    const auto split_apart = fwda::generate_synthetic(wide);
    hits = 0;
    for (Eigen::Index i = 0; i < split_apart.data.n(); ++i) {
        const int guess = split_apart.data.features(i, 0) >= 0.0 ? 1 : -1;
        if (guess == split_apart.data.labels[static_cast<std::size_t>(i)]) ++hits;
    }
    CHECK(static_cast<double>(hits) / 2000.0 >= 0.99);
}

TEST_CASE("synthetic spec validation") {
    fwda::SyntheticSpec spec;
    spec.dim = 0;
    CHECK_THROWS_AS((void)fwda::generate_synthetic(spec), fwda::InvalidSpec);
    spec.dim = 2;
    spec.n_per_class = 0;
    CHECK_THROWS_AS((void)fwda::generate_synthetic(spec), fwda::InvalidSpec);
    spec.n_per_class = 10;
    spec.mean_separation = -1.0;
    CHECK_THROWS_AS((void)fwda::generate_synthetic(spec), fwda::InvalidSpec);
    spec.mean_separation = 1.0;
    spec.true_precision = fwda::banded_precision(3, 0.4);  // wrong dim
    CHECK_THROWS_AS((void)fwda::generate_synthetic(spec), fwda::InvalidSpec);
    Eigen::MatrixXd indefinite = Eigen::MatrixXd::Identity(2, 2);
    indefinite(1, 1) = -1.0;
    spec.true_precision = fwda::SymmetricMatrix(indefinite);
    CHECK_THROWS_AS((void)fwda::generate_synthetic(spec), fwda::InvalidSpec);
}

TEST_CASE("train/test splits are class balanced, disjoint, seeded") {
    // One feature whose value identifies the row, so membership is checkable.
    const int per_class = 30;
    fwda::LabeledDataset data;
    data.features.resize(2 * per_class, 1);
    for (int i = 0; i < 2 * per_class; ++i) {
        data.features(i, 0) = static_cast<double>(i);
        data.labels.push_back(i % 2 == 0 ? 1 : -1);
    }

    const auto [train, test] = fwda::train_test_split(data, 10, 5, 99);
    REQUIRE(train.n() == 20);
    REQUIRE(test.n() == 10);

    const auto count_pos = [](const fwda::LabeledDataset& d) {
        int c = 0;
        for (int l : d.labels) c += (l == 1);
        return c;
    };
    CHECK(count_pos(train) == 10);
    CHECK(count_pos(test) == 5);

    std::set<double> seen;
    for (Eigen::Index i = 0; i < train.n(); ++i) seen.insert(train.features(i, 0));
    REQUIRE(seen.size() == 20);  // no duplicates inside train
    for (Eigen::Index i = 0; i < test.n(); ++i) {
        CHECK(seen.count(test.features(i, 0)) == 0);  // disjoint from train
        seen.insert(test.features(i, 0));
    }
    CHECK(seen.size() == 30);

    // Labels still match the source rows.
    for (Eigen::Index i = 0; i < train.n(); ++i) {
        const int original = static_cast<int>(train.features(i, 0));
        CHECK(train.labels[static_cast<std::size_t>(i)] == (original % 2 == 0 ? 1 : -1));
    }

    const auto [train2, test2] = fwda::train_test_split(data, 10, 5, 99);
    CHECK(train2.features == train.features);
    CHECK(test2.features == test.features);

    const auto [train3, test3] = fwda::train_test_split(data, 10, 5, 100);
    CHECK(train3.features != train.features);
}

TEST_CASE("split reports which class ran short") {
    fwda::LabeledDataset data;
    data.features.resize(10, 1);
    for (int i = 0; i < 10; ++i) {
        data.features(i, 0) = i;
        data.labels.push_back(i < 8 ? 1 : -1);  // only two -1 rows
    }
    try {
        (void)fwda::train_test_split(data, 2, 1, 1);
        FAIL("expected InsufficientSamples");
    } catch (const fwda::InsufficientSamples& e) {
        const std::string msg = e.what();
        CHECK(msg.find("class -1") != std::string::npos);
        CHECK(msg.find("has 2") != std::string::npos);
        CHECK(msg.find("need 3") != std::string::npos);
    }
    CHECK_THROWS_AS((void)fwda::train_test_split(data, 0, 1, 1), fwda::InvalidParameter);
}
