#pragma once

#include <Eigen/Dense>
#include <utility>

#include "fwda/errors.hpp"

namespace fwda {

// Square real matrix with symmetry enforced on construction by averaging
// with the transpose. IEEE addition is commutative, so after the averaging
// m(j,k) == m(k,j) holds bitwise, which downstream code (Cholesky, JSON
// round-trips, bitwise reproducibility checks) relies on.
class SymmetricMatrix {
public:
    explicit SymmetricMatrix(const Eigen::MatrixXd& m) {
        if (m.rows() != m.cols() || m.rows() < 1) {
            throw ShapeError("symmetric matrix must be square and non-empty, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
        }
        mat_ = 0.5 * (m + m.transpose());
    }

    static SymmetricMatrix identity(Eigen::Index dim) {
        return SymmetricMatrix(Eigen::MatrixXd::Identity(dim, dim));
    }

    static SymmetricMatrix diagonal(const Eigen::VectorXd& d) {
        return SymmetricMatrix(Eigen::MatrixXd(d.asDiagonal()));
    }

    Eigen::Index dim() const { return mat_.rows(); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return mat_(i, j); }
    const Eigen::MatrixXd& mat() const { return mat_; }

private:
    Eigen::MatrixXd mat_;
};

}  // namespace fwda
