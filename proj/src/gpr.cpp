#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "battdiag/learners.hpp"
#include "battdiag/rng.hpp"
#include "battdiag/sampling.hpp"
#include "model_json.hpp"

namespace battdiag {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Factorization {
    Eigen::MatrixXd chol;
    Eigen::VectorXd weights;
    double jitter = 0.0;
    double log_marginal = 0.0;
};

// Cholesky of gram + (nugget + jitter) I. With `ladder` set, factorization
// failures retry with jitter 1e-10 growing tenfold up to 1e-4; otherwise a
// single plain attempt is made (used inside the hyperparameter search, where
// a failing candidate is simply discarded).
std::optional<Factorization> try_factor(const Eigen::MatrixXd& gram, double nugget,
                                        const Eigen::VectorXd& y, bool ladder) {
    const Eigen::Index n = gram.rows();
    double jitter = 0.0;
    for (;;) {
        Eigen::MatrixXd k = gram;
        k.diagonal().array() += nugget + jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(k);
        if (llt.info() == Eigen::Success) {
            Factorization f;
            f.chol = llt.matrixL();
            f.weights = llt.solve(y);
            if (f.weights.allFinite()) {
                f.jitter = jitter;
                f.log_marginal = -0.5 * y.dot(f.weights) -
                                 f.chol.diagonal().array().log().sum() -
                                 0.5 * static_cast<double>(n) * std::log(kTwoPi);
                return f;
            }
        }
        if (!ladder) return std::nullopt;
        if (jitter == 0.0)
            jitter = 1e-10;
        else if (jitter >= 1e-4)
            return std::nullopt;
        else
            jitter *= 10.0;
    }
}

// One tunable hyperparameter, searched on a log scale inside [lo, hi].
struct Axis {
    enum Field { length_scale, variance, nugget };
    Field field;
    double lo;
    double hi;
};

// The stationary kernels expose their length scale; the Matern pair adds the
// variance prefactor; the nugget is always searched. Linear/polynomial keep
// their discrete parameters fixed and tune the nugget only.
std::vector<Axis> search_axes(KernelKind kind) {
    std::vector<Axis> axes;
    switch (kind) {
        case KernelKind::rbf:
        case KernelKind::exponential:
        case KernelKind::rational_quadratic:
            axes.push_back({Axis::length_scale, std::log(0.05), std::log(1000.0)});
            break;
        case KernelKind::matern32:
        case KernelKind::matern52:
            axes.push_back({Axis::length_scale, std::log(0.05), std::log(1000.0)});
            axes.push_back({Axis::variance, std::log(1e-3), std::log(1e3)});
            break;
        case KernelKind::linear:
        case KernelKind::polynomial:
            break;
    }
    axes.push_back({Axis::nugget, std::log(1e-10), std::log(1.0)});
    return axes;
}

void apply_point(const std::vector<Axis>& axes, const std::vector<double>& theta,
                 KernelSpec& spec, double& nugget) {
    for (std::size_t i = 0; i < axes.size(); ++i) {
        const double v = std::exp(theta[i]);
        switch (axes[i].field) {
            case Axis::length_scale: spec.length_scale = v; break;
            case Axis::variance: spec.variance = v; break;
            case Axis::nugget: nugget = v; break;
        }
    }
}

}  // namespace

GprModel gpr_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const KernelSpec& spec, double nugget, bool optimize,
                 const GprControl& control) {
    if (x.rows() != y.size())
        throw InvalidArgument("gpr_fit: row count mismatch between x and y");
    if (x.rows() < 2) throw InvalidArgument("gpr_fit: need at least 2 samples");
    if (!x.allFinite() || !y.allFinite())
        throw InvalidArgument("gpr_fit: non-finite input");
    if (!(nugget >= 0.0) || !std::isfinite(nugget))
        throw InvalidArgument("gpr_fit: nugget must be non-negative");
    spec.validate();
    if (control.starts < 1 || control.sweeps < 0)
        throw InvalidArgument("gpr_fit: control requires starts >= 1, sweeps >= 0");

    GprModel model;
    model.kernel = spec;
    model.nugget = nugget;
    model.x_std = Standardizer::fit(x);
    model.y_std = Standardizer::fit(y);
    model.x_train = model.x_std.apply(x);
    model.y_train = model.y_std.apply(y);

    if (optimize) {
        const std::vector<Axis> axes = search_axes(spec.kind);
        const auto eval_theta = [&](const std::vector<double>& theta) {
            KernelSpec s = model.kernel;
            double ng = model.nugget;
            apply_point(axes, theta, s, ng);
            const Eigen::MatrixXd gram = kernel_gram(s, model.x_train);
            const auto f = try_factor(gram, ng, model.y_train, /*ladder=*/false);
            return f ? f->log_marginal : -std::numeric_limits<double>::infinity();
        };

        // Start 0 is the caller's hyperparameters clamped into the search box;
        // the rest come from a Latin hypercube over the box.
        std::vector<std::vector<double>> starts;
        {
            std::vector<double> theta0(axes.size());
            for (std::size_t i = 0; i < axes.size(); ++i) {
                double v = 1.0;
                switch (axes[i].field) {
                    case Axis::length_scale: v = spec.length_scale; break;
                    case Axis::variance: v = spec.variance; break;
                    case Axis::nugget: v = std::max(nugget, 1e-12); break;
                }
                theta0[i] = std::clamp(std::log(v), axes[i].lo, axes[i].hi);
            }
            starts.push_back(std::move(theta0));
        }
        if (control.starts > 1) {
            Rng rng(control.seed);
            const auto lhs = latin_hypercube(rng, control.starts - 1,
                                             static_cast<int>(axes.size()));
            for (const auto& u : lhs) {
                std::vector<double> t(axes.size());
                for (std::size_t i = 0; i < axes.size(); ++i)
                    t[i] = axes[i].lo + u[i] * (axes[i].hi - axes[i].lo);
                starts.push_back(std::move(t));
            }
        }

        double best_lml = -std::numeric_limits<double>::infinity();
        std::vector<double> best_theta;
        for (std::vector<double> theta : starts) {
            double cur = eval_theta(theta);
            double step = 1.0;
            for (int sweep = 0; sweep < control.sweeps; ++sweep) {
                for (std::size_t i = 0; i < axes.size(); ++i) {
                    for (double mult : {-2.0, -1.0, 1.0, 2.0}) {
                        std::vector<double> cand = theta;
                        cand[i] = std::clamp(theta[i] + mult * step, axes[i].lo,
                                             axes[i].hi);
                        if (cand[i] == theta[i]) continue;
                        const double lml = eval_theta(cand);
                        if (lml > cur) {
                            cur = lml;
                            theta = std::move(cand);
                        }
                    }
                }
                step *= 0.5;
            }
            if (cur > best_lml) {
                best_lml = cur;
                best_theta = theta;
            }
        }
        // If no candidate factorized the final jitter ladder below still gets
        // a chance at the caller's hyperparameters.
        if (std::isfinite(best_lml))
            apply_point(axes, best_theta, model.kernel, model.nugget);
    }

    const Eigen::MatrixXd gram = kernel_gram(model.kernel, model.x_train);
    const auto f = try_factor(gram, model.nugget, model.y_train, /*ladder=*/true);
    if (!f)
        throw IllConditioned(
            "gpr_fit: covariance factorization failed at maximum jitter 1e-4");
    model.chol = f->chol;
    model.weights = f->weights;
    model.jitter = f->jitter;
    model.log_marginal = f->log_marginal;
    return model;
}

void gpr_predict(const GprModel& model, const Eigen::MatrixXd& x,
                 Eigen::VectorXd& mean, Eigen::VectorXd& variance) {
    if (x.cols() != model.x_train.cols())
        throw InvalidArgument("gpr_predict: feature dimension mismatch");
    const Eigen::Index n = x.rows();
    mean.resize(n);
    variance.resize(n);
    const double mu_y = model.y_std.mean[0];
    const double sd_y = model.y_std.scale[0];
    const Eigen::MatrixXd xs = model.x_std.apply(x);
    const auto lower = model.chol.triangularView<Eigen::Lower>();
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd q = xs.row(i).transpose();
        const Eigen::VectorXd ks = kernel_cross(model.kernel, model.x_train, q);
        const double kss = kernel_eval(model.kernel, q, q);
        const Eigen::VectorXd v = lower.solve(ks);
        mean[i] = mu_y + sd_y * ks.dot(model.weights);
        variance[i] = sd_y * sd_y * std::max(0.0, kss - v.squaredNorm());
    }
}

std::pair<double, double> gpr_predict_one(const GprModel& model,
                                          const Eigen::VectorXd& x) {
    Eigen::VectorXd mean, variance;
    gpr_predict(model, x.transpose(), mean, variance);
    return {mean[0], variance[0]};
}

std::string gpr_to_json(const GprModel& model) {
    nlohmann::json j = detail::model_document("gpr");
    j["kernel"] = detail::kernel_json(model.kernel);
    j["nugget"] = model.nugget;
    j["jitter"] = model.jitter;
    j["log_marginal"] = model.log_marginal;
    j["x_train"] = detail::matrix_json(model.x_train);
    j["y_train"] = detail::vector_json(model.y_train);
    j["chol"] = detail::matrix_json(model.chol);
    j["weights"] = detail::vector_json(model.weights);
    j["x_std"] = detail::standardizer_json(model.x_std);
    j["y_std"] = detail::standardizer_json(model.y_std);
    return j.dump();
}

GprModel gpr_from_json(const std::string& text) {
    const nlohmann::json j = detail::parse_document(text, "gpr");
    try {
        GprModel model;
        model.kernel = detail::kernel_from(j.at("kernel"));
        model.nugget = j.at("nugget").get<double>();
        model.jitter = j.at("jitter").get<double>();
        model.log_marginal = j.at("log_marginal").get<double>();
        model.x_train = detail::matrix_from(j.at("x_train"));
        model.y_train = detail::vector_from(j.at("y_train"));
        model.chol = detail::matrix_from(j.at("chol"));
        model.weights = detail::vector_from(j.at("weights"));
        model.x_std = detail::standardizer_from(j.at("x_std"));
        model.y_std = detail::standardizer_from(j.at("y_std"));
        if (model.x_train.rows() != model.y_train.size() ||
            model.chol.rows() != model.x_train.rows() ||
            model.weights.size() != model.y_train.size())
            throw ParseError("gpr model document: inconsistent shapes");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("gpr model document: ") + e.what());
    }
}

}  // namespace battdiag
