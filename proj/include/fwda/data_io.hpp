#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fwda/covariance.hpp"
#include "fwda/symmetric_matrix.hpp"

namespace fwda {

// Rows of features with a +/-1 label per row. feature_names is empty when
// the source had no header.
struct LabeledDataset {
    Eigen::MatrixXd features;  // n x p
    std::vector<int> labels;   // each +1 or -1
    std::vector<std::string> feature_names;

    Eigen::Index n() const { return features.rows(); }
    Eigen::Index p() const { return features.cols(); }
};

inline SymmetricMatrix sample_covariance(const LabeledDataset& data) {
    return sample_covariance(data.features);
}

// Shortest decimal string that parses back to exactly v.
std::string format_double(double v);

// Comma-separated UTF-8, one row per line. A header is assumed when any cell
// of the first row fails to parse as a number. The label column is given by
// name (header required) or by 0-based index; it is resolved by name first.
// Labels must be exactly -1, 0, or +1; 0/1 files are mapped to -1/+1.
// Errors carry 1-based line numbers (CsvShapeError, CsvValueError,
// LabelError).
LabeledDataset load_csv(const std::string& path, const std::string& label_column);

// Feature-only load for prediction inputs. When label_column is set, that
// column is required and dropped; otherwise a header column named "label" is
// dropped when present.
struct FeatureMatrix {
    Eigen::MatrixXd features;
    std::vector<std::string> feature_names;
};
FeatureMatrix load_features_csv(const std::string& path,
                                const std::optional<std::string>& label_column = {});

// Writes header (feature names or f0..f{p-1}, then "label") and rows with
// shortest round-trip number formatting, so load(save(d)) reproduces the
// values bitwise. An empty dataset yields a header-only file.
void save_csv(const LabeledDataset& data, const std::string& path);

// Two-class Gaussian task: class +1 at +separation/2 * e1, class -1 at
// -separation/2 * e1, shared covariance inv(true_precision). Default
// precision is banded_precision(dim, 0.4). Row i consumes substream
// (seed, i), so the emitted dataset is reproducible row-by-row.
struct SyntheticSpec {
    int dim = 2;
    int n_per_class = 100;
    double mean_separation = 3.0;
    std::uint64_t seed = 42;
    std::optional<SymmetricMatrix> true_precision;  // must be positive definite
};

struct SyntheticData {
    LabeledDataset data;
    SymmetricMatrix true_precision;
    Eigen::VectorXd pos_mean;
    Eigen::VectorXd neg_mean;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Tridiagonal precision: unit diagonal, rho on the first off-diagonals.
// Positive definite for |rho| < 0.5.
SymmetricMatrix banded_precision(int dim, double rho = 0.4);

// Best achievable accuracy on the synthetic task: Phi(separation/2 *
// sqrt(e1' precision e1)), the two-Gaussian Bayes rate along the mean
// difference direction.
double bayes_ceiling(const SymmetricMatrix& true_precision, double mean_separation);

// Standard normal CDF.
double normal_cdf(double z);

// Class-balanced split: per class, a seeded shuffle assigns the first
// n_train rows to train and the next n_test to test (disjoint). Throws
// InsufficientSamples naming the class and the counts when a class is too
// small.
std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& data,
                                                           int n_train_per_class,
                                                           int n_test_per_class,
                                                           std::uint64_t seed);

}  // namespace fwda
