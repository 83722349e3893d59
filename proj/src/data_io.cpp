#include "fwda/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "fwda/rng.hpp"

namespace fwda {
namespace {

std::string trimmed(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    std::size_t end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(trimmed(line.substr(start)));
            break;
        }
        cells.push_back(trimmed(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return cells;
}

bool parse_double(const std::string& cell, double& out) {
    if (cell.empty()) return false;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

struct RawTable {
    std::vector<std::string> header;  // empty when the file has none
    std::vector<std::vector<double>> rows;
    std::vector<int> line_numbers;  // 1-based, parallel to rows
    std::size_t cols = 0;
};

RawTable parse_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");

    RawTable table;
    std::string line;
    int line_number = 0;
    bool saw_first = false;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trimmed(line).empty()) continue;
        std::vector<std::string> cells = split_cells(line);

        if (!saw_first) {
            saw_first = true;
            table.cols = cells.size();
            bool all_numeric = true;
            std::vector<double> values(cells.size());
            for (std::size_t c = 0; c < cells.size(); ++c) {
                if (!parse_double(cells[c], values[c])) {
                    all_numeric = false;
                    break;
                }
            }
            if (all_numeric) {
                table.rows.push_back(std::move(values));
                table.line_numbers.push_back(line_number);
            } else {
                table.header = std::move(cells);
            }
            continue;
        }

        if (cells.size() != table.cols) {
            throw CsvShapeError("line " + std::to_string(line_number) + ": expected " +
                                std::to_string(table.cols) + " cells, got " +
                                std::to_string(cells.size()));
        }
        std::vector<double> values(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!parse_double(cells[c], values[c])) {
                throw CsvValueError("line " + std::to_string(line_number) + ", column " +
                                    std::to_string(c + 1) + ": '" + cells[c] +
                                    "' is not a number");
            }
        }
        table.rows.push_back(std::move(values));
        table.line_numbers.push_back(line_number);
    }
    if (!saw_first) throw EmptyInput("'" + path + "' has no rows");
    return table;
}

// Name match in the header wins; otherwise the string must be a 0-based
// column index.
std::size_t resolve_column(const RawTable& table, const std::string& label_column,
                           const std::string& path) {
    if (!table.header.empty()) {
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (table.header[c] == label_column) return c;
        }
    }
    int index = -1;
    const char* first = label_column.data();
    const char* last = label_column.data() + label_column.size();
    auto [ptr, ec] = std::from_chars(first, last, index);
    if (ec == std::errc() && ptr == last && index >= 0 &&
        static_cast<std::size_t>(index) < table.cols) {
        return static_cast<std::size_t>(index);
    }
    throw InvalidParameter("label column '" + label_column + "' not found in '" + path + "'");
}

int parse_label(double value, int line_number) {
    if (value == 1.0) return 1;
    if (value == -1.0) return -1;
    if (value == 0.0) return -1;  // 0/1 encoding
    throw LabelError("line " + std::to_string(line_number) + ": label " + format_double(value) +
                     " is outside {-1, 0, +1}");
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

LabeledDataset load_csv(const std::string& path, const std::string& label_column) {
    RawTable table = parse_csv_file(path);
    if (table.cols < 2) throw ShapeError("'" + path + "' has no feature columns");
    const std::size_t label_idx = resolve_column(table, label_column, path);

    LabeledDataset data;
    const std::size_t p = table.cols - 1;
    data.features.resize(static_cast<Eigen::Index>(table.rows.size()),
                         static_cast<Eigen::Index>(p));
    data.labels.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::size_t f = 0;
        for (std::size_t c = 0; c < table.cols; ++c) {
            if (c == label_idx) continue;
            data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f++)) =
                table.rows[r][c];
        }
        data.labels.push_back(parse_label(table.rows[r][label_idx], table.line_numbers[r]));
    }
    if (!table.header.empty()) {
        for (std::size_t c = 0; c < table.cols; ++c) {
            if (c != label_idx) data.feature_names.push_back(table.header[c]);
        }
    }
    return data;
}

FeatureMatrix load_features_csv(const std::string& path,
                                const std::optional<std::string>& label_column) {
    RawTable table = parse_csv_file(path);
    std::optional<std::size_t> drop;
    if (label_column) {
        drop = resolve_column(table, *label_column, path);
    } else if (!table.header.empty()) {
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (table.header[c] == "label") {
                drop = c;
                break;
            }
        }
    }
    const std::size_t p = table.cols - (drop ? 1 : 0);
    if (p < 1) throw ShapeError("'" + path + "' has no feature columns");

    FeatureMatrix out;
    out.features.resize(static_cast<Eigen::Index>(table.rows.size()),
                        static_cast<Eigen::Index>(p));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::size_t f = 0;
        for (std::size_t c = 0; c < table.cols; ++c) {
            if (drop && c == *drop) continue;
            out.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f++)) =
                table.rows[r][c];
        }
    }
    if (!table.header.empty()) {
        for (std::size_t c = 0; c < table.cols; ++c) {
            if (!(drop && c == *drop)) out.feature_names.push_back(table.header[c]);
        }
    }
    return out;
}

void save_csv(const LabeledDataset& data, const std::string& path) {
    if (data.labels.size() != static_cast<std::size_t>(data.n())) {
        throw ShapeError("dataset has " + std::to_string(data.n()) + " rows but " +
                         std::to_string(data.labels.size()) + " labels");
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");

    const Eigen::Index p = data.p();
    for (Eigen::Index c = 0; c < p; ++c) {
        if (!data.feature_names.empty()) {
            out << data.feature_names[static_cast<std::size_t>(c)];
        } else {
            out << "f" << c;
        }
        out << ',';
    }
    out << "label\n";
    for (Eigen::Index r = 0; r < data.n(); ++r) {
        for (Eigen::Index c = 0; c < p; ++c) out << format_double(data.features(r, c)) << ',';
        out << data.labels[static_cast<std::size_t>(r)] << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

SymmetricMatrix banded_precision(int dim, double rho) {
    if (dim < 1) throw InvalidParameter("banded_precision needs dim >= 1");
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim, dim);
    for (int j = 0; j + 1 < dim; ++j) {
        m(j, j + 1) = rho;
        m(j + 1, j) = rho;
    }
    return SymmetricMatrix(m);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double bayes_ceiling(const SymmetricMatrix& true_precision, double mean_separation) {
    if (mean_separation < 0.0) throw InvalidParameter("mean_separation must be >= 0");
    return normal_cdf(0.5 * mean_separation * std::sqrt(true_precision(0, 0)));
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.dim < 1) throw InvalidSpec("dim must be >= 1");
    if (spec.n_per_class < 1) throw InvalidSpec("n_per_class must be >= 1");
    if (spec.mean_separation < 0.0) throw InvalidSpec("mean_separation must be >= 0");

    SymmetricMatrix precision =
        spec.true_precision ? *spec.true_precision : banded_precision(spec.dim);
    if (precision.dim() != spec.dim) {
        throw InvalidSpec("true_precision is " + std::to_string(precision.dim()) +
                          "-dimensional but dim = " + std::to_string(spec.dim));
    }
    Eigen::LLT<Eigen::MatrixXd> prec_llt(precision.mat());
    if (prec_llt.info() != Eigen::Success) {
        throw InvalidSpec("true_precision is not positive definite");
    }
    const Eigen::MatrixXd covariance =
        prec_llt.solve(Eigen::MatrixXd::Identity(spec.dim, spec.dim));
    Eigen::LLT<Eigen::MatrixXd> cov_llt(0.5 * (covariance + covariance.transpose()));
    if (cov_llt.info() != Eigen::Success) {
        throw InvalidSpec("true_precision could not be inverted to a covariance");
    }
    const Eigen::MatrixXd cov_chol = cov_llt.matrixL();

    Eigen::VectorXd pos_mean = Eigen::VectorXd::Zero(spec.dim);
    pos_mean(0) = 0.5 * spec.mean_separation;
    const Eigen::VectorXd neg_mean = -pos_mean;

    const int n = spec.n_per_class;
    SyntheticData out{LabeledDataset{}, precision, pos_mean, neg_mean};
    out.data.features.resize(2 * n, spec.dim);
    out.data.labels.resize(static_cast<std::size_t>(2 * n));
    Eigen::VectorXd z(spec.dim);
    for (int i = 0; i < 2 * n; ++i) {
        Philox rng(spec.seed, static_cast<std::uint64_t>(i));
        for (int d = 0; d < spec.dim; ++d) z(d) = rng.normal();
        const Eigen::VectorXd& mean = (i < n) ? pos_mean : neg_mean;
        out.data.features.row(i) = (mean + cov_chol * z).transpose();
        out.data.labels[static_cast<std::size_t>(i)] = (i < n) ? 1 : -1;
    }
    return out;
}

std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& data,
                                                           int n_train_per_class,
                                                           int n_test_per_class,
                                                           std::uint64_t seed) {
    if (n_train_per_class < 1) throw InvalidParameter("n_train_per_class must be >= 1");
    if (n_test_per_class < 0) throw InvalidParameter("n_test_per_class must be >= 0");
    if (data.labels.size() != static_cast<std::size_t>(data.n())) {
        throw ShapeError("dataset rows and labels disagree");
    }

    std::vector<Eigen::Index> by_class[2];  // [0]: +1, [1]: -1
    for (Eigen::Index r = 0; r < data.n(); ++r) {
        by_class[data.labels[static_cast<std::size_t>(r)] == 1 ? 0 : 1].push_back(r);
    }
    const std::size_t need =
        static_cast<std::size_t>(n_train_per_class) + static_cast<std::size_t>(n_test_per_class);
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].size() < need) {
            throw InsufficientSamples("class " + std::string(c == 0 ? "+1" : "-1") + " has " +
                                      std::to_string(by_class[c].size()) + " rows, need " +
                                      std::to_string(need));
        }
        Philox rng(seed, static_cast<std::uint64_t>(c));
        for (std::size_t i = by_class[c].size() - 1; i >= 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.bounded(i + 1));
            std::swap(by_class[c][i], by_class[c][j]);
        }
    }

    auto take = [&](std::size_t offset, int count) {
        LabeledDataset subset;
        subset.feature_names = data.feature_names;
        subset.features.resize(2 * count, data.p());
        subset.labels.reserve(static_cast<std::size_t>(2 * count));
        Eigen::Index row = 0;
        for (int c = 0; c < 2; ++c) {
            for (int i = 0; i < count; ++i) {
                subset.features.row(row++) =
                    data.features.row(by_class[c][offset + static_cast<std::size_t>(i)]);
                subset.labels.push_back(c == 0 ? 1 : -1);
            }
        }
        return subset;
    };

    return {take(0, n_train_per_class),
            take(static_cast<std::size_t>(n_train_per_class), n_test_per_class)};
}

}  // namespace fwda
