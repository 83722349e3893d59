#include "fwda/classifier.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fwda/covariance.hpp"
#include "fwda/parallel.hpp"

namespace fwda {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline double sign_of(double d) { return d >= 0.0 ? 1.0 : -1.0; }

// Bit-pattern comparison gives a total order on doubles (NaN included), which
// is all canonical ordering needs.
inline bool bits_less(double a, double b) {
    return std::bit_cast<std::uint64_t>(a) < std::bit_cast<std::uint64_t>(b);
}

}  // namespace

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Fwda: return "fwda";
        case Variant::DiscreteFwda: return "discrete_fwda";
        case Variant::SampleFwda: return "sample_fwda";
    }
    throw InvalidParameter("unknown variant");
}

Variant variant_from_name(const std::string& name) {
    if (name == "fwda") return Variant::Fwda;
    if (name == "discrete_fwda") return Variant::DiscreteFwda;
    if (name == "sample_fwda") return Variant::SampleFwda;
    throw InvalidParameter("unknown variant '" + name + "'");
}

std::vector<Eigen::Index> canonical_row_order(const LabeledDataset& data) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.n()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const Eigen::Index p = data.p();
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index c = 0; c < p; ++c) {
            const double fa = data.features(a, c);
            const double fb = data.features(b, c);
            if (std::bit_cast<std::uint64_t>(fa) != std::bit_cast<std::uint64_t>(fb)) {
                return bits_less(fa, fb);
            }
        }
        return data.labels[static_cast<std::size_t>(a)] < data.labels[static_cast<std::size_t>(b)];
    });
    return order;
}

double lda_discriminant(const Eigen::VectorXd& x, const Eigen::VectorXd& global_mean,
                        const Eigen::VectorXd& pos_mean, const Eigen::VectorXd& neg_mean,
                        const SymmetricMatrix& theta) {
    if (x.size() != theta.dim() || global_mean.size() != theta.dim() ||
        pos_mean.size() != theta.dim() || neg_mean.size() != theta.dim()) {
        throw ShapeError("lda_discriminant: vector sizes do not match theta");
    }
    const Eigen::VectorXd projected = theta.mat() * (pos_mean - neg_mean);
    return (x - global_mean).dot(projected);
}

double gaussian_log_weight(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                           const SymmetricMatrix& theta) {
    if (x.size() != theta.dim() || mean.size() != theta.dim()) {
        throw ShapeError("gaussian_log_weight: vector sizes do not match theta");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(theta.mat());
    if (llt.info() != Eigen::Success) {
        throw NotPositiveDefinite("gaussian_log_weight needs positive definite theta");
    }
    const Eigen::MatrixXd l = llt.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    const double quad = (l.transpose() * (x - mean)).squaredNorm();
    return -0.5 * static_cast<double>(theta.dim()) * kLog2Pi + 0.5 * log_det - 0.5 * quad;
}

namespace detail {

Prediction stabilized_vote(const std::vector<double>& discriminants,
                           const std::vector<double>& log_weights, bool normalize) {
    if (discriminants.empty()) throw InvalidModel("ensemble is empty");
    if (discriminants.size() != log_weights.size()) {
        throw ShapeError("stabilized_vote: member arrays differ in length");
    }
    const double w_max = *std::max_element(log_weights.begin(), log_weights.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < discriminants.size(); ++i) {
        acc += sign_of(discriminants[i]) * std::exp(log_weights[i] - w_max);
    }
    const double score = normalize ? acc / static_cast<double>(discriminants.size()) : acc;
    return {score >= 0.0 ? 1 : -1, score};
}

EnsembleContext make_context(const FwdaModel& model, const std::vector<PrecisionSample>& samples,
                             WeightRule rule) {
    if (samples.empty()) throw InvalidModel("ensemble is empty");
    EnsembleContext ctx;
    ctx.model = &model;
    ctx.samples = &samples;
    ctx.rule = rule;
    const Eigen::VectorXd delta = model.pos_mean - model.neg_mean;
    ctx.projected_delta.reserve(samples.size());
    for (const PrecisionSample& s : samples) {
        if (s.theta.dim() != model.dim) throw ShapeError("sample dimension does not match model");
        ctx.projected_delta.emplace_back(s.theta.mat() * delta);
    }
    if (rule == WeightRule::LikelihoodTimesDensity) {
        ctx.member_log_density.reserve(samples.size());
        for (const PrecisionSample& s : samples) {
            ctx.member_log_density.push_back(log_density(s, model.wishart));
        }
    }
    return ctx;
}

// The log weight is the Gaussian log density at x under the member
// precision, plus the member's own Wishart log density under the
// density-weighted rule.
void member_scores(const Eigen::VectorXd& x, const EnsembleContext& ctx,
                   std::vector<double>& d, std::vector<double>& w) {
    const FwdaModel& model = *ctx.model;
    const std::vector<PrecisionSample>& samples = *ctx.samples;
    const Eigen::VectorXd xc = x - model.global_mean;
    const double base = -0.5 * static_cast<double>(model.dim) * kLog2Pi;
    const std::size_t m = samples.size();
    d.resize(m);
    w.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        d[i] = xc.dot(ctx.projected_delta[i]);
        if (ctx.rule == WeightRule::Uniform) {
            w[i] = 0.0;
            continue;
        }
        const double quad =
            (samples[i].chol.transpose().triangularView<Eigen::Upper>() * xc).squaredNorm();
        w[i] = base + 0.5 * samples[i].log_det_theta - 0.5 * quad;
        if (ctx.rule == WeightRule::LikelihoodTimesDensity) w[i] += ctx.member_log_density[i];
    }
}

Prediction score_one(const Eigen::VectorXd& x, const EnsembleContext& ctx) {
    if (x.size() != ctx.model->dim) {
        throw ShapeError("input has dimension " + std::to_string(x.size()) +
                         " but model has dimension " + std::to_string(ctx.model->dim));
    }
    thread_local std::vector<double> d, w;
    member_scores(x, ctx, d, w);
    const bool normalize = ctx.rule != WeightRule::LikelihoodTimesDensity;
    return stabilized_vote(d, w, normalize);
}

double raw_score_one(const Eigen::VectorXd& x, const EnsembleContext& ctx,
                     const std::function<double(double)>& transform) {
    if (x.size() != ctx.model->dim) throw ShapeError("input dimension does not match model");
    thread_local std::vector<double> d, w;
    member_scores(x, ctx, d, w);
    double acc = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double contribution = sign_of(d[i]) * std::exp(w[i]);
        acc += transform ? transform(contribution) : contribution;
    }
    return acc / static_cast<double>(d.size());
}

}  // namespace detail

Prediction fwda_score(const Eigen::VectorXd& x, const FwdaModel& model,
                      const std::vector<PrecisionSample>& samples) {
    return detail::score_one(x, detail::make_context(model, samples, detail::WeightRule::Likelihood));
}

Prediction discrete_fwda_score(const Eigen::VectorXd& x, const FwdaModel& model,
                               const std::vector<PrecisionSample>& samples) {
    return detail::score_one(
        x, detail::make_context(model, samples, detail::WeightRule::LikelihoodTimesDensity));
}

double raw_ensemble_score(const Eigen::VectorXd& x, const FwdaModel& model,
                          const std::vector<PrecisionSample>& samples) {
    return detail::raw_score_one(
        x, detail::make_context(model, samples, detail::WeightRule::Likelihood), {});
}

FwdaModel fit(const LabeledDataset& data, const FitConfig& config, FitInfo* info) {
    if (data.labels.size() != static_cast<std::size_t>(data.n())) {
        throw ShapeError("dataset rows and labels disagree");
    }
    if (data.n() < 2) {
        throw InsufficientSamples("fit needs at least 2 rows, got " + std::to_string(data.n()));
    }
    if (data.p() < 1) throw ShapeError("fit needs at least one feature");
    if (config.ensemble_size < 1) throw InvalidParameter("ensemble_size must be >= 1");

    const bool has_pos = std::find(data.labels.begin(), data.labels.end(), 1) != data.labels.end();
    const bool has_neg = std::find(data.labels.begin(), data.labels.end(), -1) != data.labels.end();
    if (!has_pos) throw MissingClass("training data has no +1 rows");
    if (!has_neg) throw MissingClass("training data has no -1 rows");

    const std::vector<Eigen::Index> order = canonical_row_order(data);
    const Eigen::Index n = data.n();
    const Eigen::Index p = data.p();
    Eigen::MatrixXd rows(n, p);
    Eigen::VectorXd pos_sum = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd neg_sum = Eigen::VectorXd::Zero(p);
    Eigen::Index n_pos = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
        rows.row(r) = data.features.row(order[static_cast<std::size_t>(r)]);
        if (data.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] == 1) {
            pos_sum += rows.row(r).transpose();
            ++n_pos;
        } else {
            neg_sum += rows.row(r).transpose();
        }
    }

    FwdaModel model;
    model.variant = config.variant;
    model.dim = p;
    model.global_mean = rows.colwise().sum().transpose() / static_cast<double>(n);
    model.pos_mean = pos_sum / static_cast<double>(n_pos);
    model.neg_mean = neg_sum / static_cast<double>(n - n_pos);
    model.lambda = config.lambda;
    model.ensemble_size = config.ensemble_size;
    model.seed = config.seed;

    const SymmetricMatrix sigma_bar = sample_covariance(rows);

    FitInfo local;
    local.n = n;
    local.p = p;
    SymmetricMatrix scale = SymmetricMatrix::identity(p);
    if (config.variant == Variant::SampleFwda) {
        scale = project_pd(pseudo_inverse(sigma_bar, config.rank_tol), config.floor_ratio);
    } else {
        const PrecisionEstimate est = graphical_lasso(sigma_bar, config.lambda, config.solver_tol,
                                                      config.solver_max_iter);
        local.kkt_residual = est.kkt_residual;
        local.solver_iterations = est.outer_iterations;
        local.solver_converged = est.converged;
        scale = project_pd(desparsify(est.theta, sigma_bar), config.floor_ratio);
    }
    model.wishart = WishartModel::create(scale, static_cast<double>(n - 1));
    if (info) *info = local;
    return model;
}

namespace {

std::vector<Prediction> predict_impl(const FwdaModel& model, const Eigen::MatrixXd& xs,
                                     bool parallel) {
    if (xs.rows() == 0) return {};
    if (xs.cols() != model.dim) {
        throw ShapeError("model has dimension " + std::to_string(model.dim) +
                         " but inputs have dimension " + std::to_string(xs.cols()));
    }
    const std::vector<PrecisionSample> samples =
        sample(model.wishart, model.seed, model.ensemble_size);
    const detail::WeightRule rule = model.variant == Variant::DiscreteFwda
                                        ? detail::WeightRule::LikelihoodTimesDensity
                                        : detail::WeightRule::Likelihood;
    const detail::EnsembleContext ctx = detail::make_context(model, samples, rule);

    std::vector<Prediction> out(static_cast<std::size_t>(xs.rows()));
    const Eigen::Index rows = xs.rows();
    if (parallel) {
#pragma omp parallel for schedule(static) num_threads(parallel::max_threads())
        for (Eigen::Index r = 0; r < rows; ++r) {
            out[static_cast<std::size_t>(r)] = detail::score_one(xs.row(r).transpose(), ctx);
        }
    } else {
        for (Eigen::Index r = 0; r < rows; ++r) {
            out[static_cast<std::size_t>(r)] = detail::score_one(xs.row(r).transpose(), ctx);
        }
    }
    return out;
}

}  // namespace

std::vector<Prediction> predict(const FwdaModel& model, const Eigen::MatrixXd& xs) {
    return predict_impl(model, xs, true);
}

namespace reference {
std::vector<Prediction> predict(const FwdaModel& model, const Eigen::MatrixXd& xs) {
    return predict_impl(model, xs, false);
}
}  // namespace reference

std::vector<Prediction> plain_lda_predict(const LabeledDataset& train, const Eigen::MatrixXd& xs,
                                          const CovarianceMode& mode) {
    if (train.n() < 2) {
        throw InsufficientSamples("plain_lda_predict needs at least 2 rows");
    }
    const bool has_pos =
        std::find(train.labels.begin(), train.labels.end(), 1) != train.labels.end();
    const bool has_neg =
        std::find(train.labels.begin(), train.labels.end(), -1) != train.labels.end();
    if (!has_pos) throw MissingClass("training data has no +1 rows");
    if (!has_neg) throw MissingClass("training data has no -1 rows");
    if (xs.rows() > 0 && xs.cols() != train.p()) {
        throw ShapeError("training data has dimension " + std::to_string(train.p()) +
                         " but inputs have dimension " + std::to_string(xs.cols()));
    }

    const std::vector<Eigen::Index> order = canonical_row_order(train);
    Eigen::MatrixXd rows(train.n(), train.p());
    Eigen::VectorXd pos_sum = Eigen::VectorXd::Zero(train.p());
    Eigen::VectorXd neg_sum = Eigen::VectorXd::Zero(train.p());
    Eigen::Index n_pos = 0;
    for (Eigen::Index r = 0; r < train.n(); ++r) {
        rows.row(r) = train.features.row(order[static_cast<std::size_t>(r)]);
        if (train.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] == 1) {
            pos_sum += rows.row(r).transpose();
            ++n_pos;
        } else {
            neg_sum += rows.row(r).transpose();
        }
    }
    const Eigen::VectorXd global_mean =
        rows.colwise().sum().transpose() / static_cast<double>(train.n());
    const Eigen::VectorXd pos_mean = pos_sum / static_cast<double>(n_pos);
    const Eigen::VectorXd neg_mean = neg_sum / static_cast<double>(train.n() - n_pos);
    const SymmetricMatrix sigma_bar = sample_covariance(rows);

    Eigen::MatrixXd theta;
    if (mode.kind == CovarianceMode::Kind::PseudoInverse) {
        theta = pseudo_inverse(sigma_bar, mode.rank_tol).mat();
    } else {
        const SymmetricMatrix blended = shrinkage_covariance(sigma_bar, mode.gamma);
        Eigen::LLT<Eigen::MatrixXd> llt(blended.mat());
        if (llt.info() != Eigen::Success) {
            throw NotPositiveDefinite("shrinkage covariance is not invertible");
        }
        theta = llt.solve(Eigen::MatrixXd::Identity(train.p(), train.p()));
    }

    const Eigen::VectorXd projected = theta * (pos_mean - neg_mean);
    std::vector<Prediction> out(static_cast<std::size_t>(xs.rows()));
    for (Eigen::Index r = 0; r < xs.rows(); ++r) {
        const double d = (xs.row(r).transpose() - global_mean).dot(projected);
        out[static_cast<std::size_t>(r)] = {d >= 0.0 ? 1 : -1, d};
    }
    return out;
}

void save_model(const FwdaModel& model, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["variant"] = variant_name(model.variant);
    j["dim"] = model.dim;
    j["lambda"] = model.lambda;
    j["ensemble_size"] = model.ensemble_size;
    j["seed"] = model.seed;
    j["dof"] = model.wishart.dof();
    j["dof_requested"] = model.wishart.dof_requested();
    j["global_mean"] = std::vector<double>(model.global_mean.begin(), model.global_mean.end());
    j["pos_mean"] = std::vector<double>(model.pos_mean.begin(), model.pos_mean.end());
    j["neg_mean"] = std::vector<double>(model.neg_mean.begin(), model.neg_mean.end());
    std::vector<double> scale;
    scale.reserve(static_cast<std::size_t>(model.dim * model.dim));
    for (Eigen::Index r = 0; r < model.dim; ++r) {
        for (Eigen::Index c = 0; c < model.dim; ++c) scale.push_back(model.wishart.scale()(r, c));
    }
    j["scale"] = scale;

    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump() << '\n';
    if (!out) throw IoError("failed writing '" + path + "'");
}

namespace {

const nlohmann::json& require_field(const nlohmann::json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end()) throw ModelFormatError(std::string("missing field: ") + name);
    return *it;
}

double require_number(const nlohmann::json& j, const char* name) {
    const nlohmann::json& f = require_field(j, name);
    if (!f.is_number()) throw ModelFormatError(std::string(name) + " must be a number");
    return f.get<double>();
}

Eigen::VectorXd require_vector(const nlohmann::json& j, const char* name, Eigen::Index dim) {
    const nlohmann::json& f = require_field(j, name);
    if (!f.is_array() || static_cast<Eigen::Index>(f.size()) != dim) {
        throw ModelFormatError(std::string(name) + " must be an array of length " +
                               std::to_string(dim));
    }
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        const nlohmann::json& cell = f[static_cast<std::size_t>(i)];
        if (!cell.is_number()) throw ModelFormatError(std::string(name) + " has a non-number entry");
        v(i) = cell.get<double>();
    }
    return v;
}

}  // namespace

FwdaModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ModelFormatError("top level must be an object");

    const nlohmann::json& version = require_field(j, "format_version");
    if (!version.is_number_integer() || version.get<int>() != 1) {
        throw ModelFormatError("format_version must be 1");
    }
    const nlohmann::json& variant_field = require_field(j, "variant");
    if (!variant_field.is_string()) throw ModelFormatError("variant must be a string");
    Variant variant;
    try {
        variant = variant_from_name(variant_field.get<std::string>());
    } catch (const InvalidParameter&) {
        throw ModelFormatError("variant '" + variant_field.get<std::string>() + "' is unknown");
    }

    const nlohmann::json& dim_field = require_field(j, "dim");
    if (!dim_field.is_number_integer() || dim_field.get<Eigen::Index>() < 1) {
        throw ModelFormatError("dim must be a positive integer");
    }
    const Eigen::Index dim = dim_field.get<Eigen::Index>();

    FwdaModel model;
    model.variant = variant;
    model.dim = dim;
    model.lambda = require_number(j, "lambda");
    if (model.lambda < 0.0) throw ModelFormatError("lambda must be >= 0");

    const nlohmann::json& m_field = require_field(j, "ensemble_size");
    if (!m_field.is_number_integer() || m_field.get<int>() < 1) {
        throw ModelFormatError("ensemble_size must be a positive integer");
    }
    model.ensemble_size = m_field.get<int>();

    const nlohmann::json& seed_field = require_field(j, "seed");
    if (!seed_field.is_number_integer()) throw ModelFormatError("seed must be an integer");
    model.seed = seed_field.get<std::uint64_t>();

    const double dof = require_number(j, "dof");
    const double dof_requested = require_number(j, "dof_requested");

    model.global_mean = require_vector(j, "global_mean", dim);
    model.pos_mean = require_vector(j, "pos_mean", dim);
    model.neg_mean = require_vector(j, "neg_mean", dim);

    const Eigen::VectorXd flat = require_vector(j, "scale", dim * dim);
    Eigen::MatrixXd scale(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r)
        for (Eigen::Index c = 0; c < dim; ++c) scale(r, c) = flat(r * dim + c);

    try {
        model.wishart = WishartModel::with_dof(SymmetricMatrix(scale), dof, dof_requested);
    } catch (const DomainError&) {
        throw ModelFormatError("dof must be >= dim");
    } catch (const NotPositiveDefinite&) {
        throw ModelFormatError("scale is not positive definite");
    }
    return model;
}

}  // namespace fwda
