#include <algorithm>
#include <cmath>

#include "battdiag/learners.hpp"
#include "model_json.hpp"

namespace battdiag {

double ElasticNetModel::predict(const Eigen::VectorXd& x) const {
    if (x.size() != weights.size())
        throw InvalidArgument("ElasticNetModel::predict: feature dimension mismatch");
    return weights.dot(x) + intercept;
}

Eigen::VectorXd ElasticNetModel::predict(const Eigen::MatrixXd& x) const {
    if (x.cols() != weights.size())
        throw InvalidArgument("ElasticNetModel::predict: feature dimension mismatch");
    return ((x * weights).array() + intercept).matrix();
}

ElasticNetModel enet_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         double alpha, double l1_ratio, const EnetControl& control) {
    if (x.rows() != y.size())
        throw InvalidArgument("enet_fit: row count mismatch between x and y");
    if (x.rows() < 2) throw InvalidArgument("enet_fit: need at least 2 samples");
    if (!x.allFinite() || !y.allFinite())
        throw InvalidArgument("enet_fit: non-finite input");
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
        throw InvalidArgument("enet_fit: alpha must be non-negative");
    if (!(l1_ratio >= 0.0 && l1_ratio <= 1.0))
        throw InvalidArgument("enet_fit: l1_ratio must lie in [0, 1]");
    if (!(control.tol > 0.0) || control.max_sweeps < 1)
        throw InvalidArgument("enet_fit: control requires tol > 0, max_sweeps >= 1");

    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const Standardizer x_std = Standardizer::fit(x);
    const Standardizer y_std = Standardizer::fit(y);
    const Eigen::MatrixXd xs = x_std.apply(x);
    const Eigen::VectorXd ys = y_std.apply(y);

    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = ys;  // residual ys - xs*w
    Eigen::VectorXd col_sq(p);
    for (Eigen::Index j = 0; j < p; ++j)
        col_sq[j] = xs.col(j).squaredNorm() / static_cast<double>(n);

    const double soft = alpha * l1_ratio;
    const double ridge = alpha * (1.0 - l1_ratio);

    ElasticNetModel model;
    model.alpha = alpha;
    model.l1_ratio = l1_ratio;

    const auto objective = [&] {
        return 0.5 * r.squaredNorm() / static_cast<double>(n) +
               alpha * (l1_ratio * w.lpNorm<1>() +
                        0.5 * (1.0 - l1_ratio) * w.squaredNorm());
    };

    int sweeps = 0;
    bool converged = false;
    while (sweeps < control.max_sweeps) {
        double max_update = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (col_sq[j] <= 0.0) continue;  // constant feature: weight stays 0
            const double w_old = w[j];
            const double rho =
                xs.col(j).dot(r) / static_cast<double>(n) + col_sq[j] * w_old;
            const double shrunk = std::abs(rho) - soft;
            const double w_new =
                shrunk > 0.0 ? std::copysign(shrunk, rho) / (col_sq[j] + ridge)
                             : 0.0;
            if (w_new != w_old) {
                r += xs.col(j) * (w_old - w_new);
                w[j] = w_new;
            }
            max_update = std::max(max_update, std::abs(w_new - w_old));
        }
        ++sweeps;
        model.objective_history.push_back(objective());
        if (max_update < control.tol) {
            converged = true;
            break;
        }
    }
    model.converged = converged;
    model.sweeps = sweeps;

    // Back to raw units: y = mu_y + sd_y * sum_j w_j (x_j - mu_j) / sd_j.
    model.weights.resize(p);
    for (Eigen::Index j = 0; j < p; ++j)
        model.weights[j] = w[j] * y_std.scale[0] / x_std.scale[j];
    model.intercept = y_std.mean[0] - model.weights.dot(x_std.mean);
    return model;
}

std::vector<ElasticNetModel> enet_fit_multi(const Eigen::MatrixXd& x,
                                            const Eigen::MatrixXd& y, double alpha,
                                            double l1_ratio,
                                            const EnetControl& control) {
    std::vector<ElasticNetModel> models;
    models.reserve(static_cast<std::size_t>(y.cols()));
    for (Eigen::Index c = 0; c < y.cols(); ++c)
        models.push_back(enet_fit(x, y.col(c), alpha, l1_ratio, control));
    return models;
}

std::string enet_to_json(const ElasticNetModel& model) {
    nlohmann::json j = detail::model_document("enet");
    j["weights"] = detail::vector_json(model.weights);
    j["intercept"] = model.intercept;
    j["alpha"] = model.alpha;
    j["l1_ratio"] = model.l1_ratio;
    j["converged"] = model.converged;
    j["sweeps"] = model.sweeps;
    j["objective_history"] = model.objective_history;
    return j.dump();
}

ElasticNetModel enet_from_json(const std::string& text) {
    const nlohmann::json j = detail::parse_document(text, "enet");
    try {
        ElasticNetModel model;
        model.weights = detail::vector_from(j.at("weights"));
        model.intercept = j.at("intercept").get<double>();
        model.alpha = j.at("alpha").get<double>();
        model.l1_ratio = j.at("l1_ratio").get<double>();
        model.converged = j.at("converged").get<bool>();
        model.sweeps = j.at("sweeps").get<int>();
        model.objective_history =
            j.at("objective_history").get<std::vector<double>>();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("enet model document: ") + e.what());
    }
}

}  // namespace battdiag
