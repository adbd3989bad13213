#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "battdiag/piml.hpp"
#include "model_json.hpp"

namespace battdiag {
namespace {

void check_xy(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const char* where) {
    if (x.rows() != y.rows())
        throw InvalidArgument(std::string(where) + ": row count mismatch");
    if (x.rows() < 1) throw InvalidArgument(std::string(where) + ": empty data");
    if (!x.allFinite() || !y.allFinite())
        throw InvalidArgument(std::string(where) + ": non-finite input");
}

Eigen::MatrixXd vstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (b.rows() == 0) return a;
    if (a.rows() == 0) return b;
    if (a.cols() != b.cols())
        throw InvalidArgument("vstack: column count mismatch");
    Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
    out.topRows(a.rows()) = a;
    out.bottomRows(b.rows()) = b;
    return out;
}

Eigen::MatrixXd enet_predict_all(const std::vector<ElasticNetModel>& models,
                                 const Eigen::MatrixXd& x) {
    if (models.empty()) throw InvalidArgument("elastic net bundle: no models");
    Eigen::MatrixXd y(x.rows(), static_cast<Eigen::Index>(models.size()));
    for (std::size_t t = 0; t < models.size(); ++t)
        y.col(static_cast<Eigen::Index>(t)) = models[t].predict(x);
    return y;
}

}  // namespace

// ---------------------------------------------------------------------------
// Two-fidelity kriging
// ---------------------------------------------------------------------------

void CoKrigingControl::validate() const {
    spec_low.validate();
    spec_delta.validate();
    if (!(nugget_low >= 0.0) || !std::isfinite(nugget_low) || !(nugget_delta >= 0.0) ||
        !std::isfinite(nugget_delta))
        throw InvalidArgument("CoKrigingControl: nuggets must be finite and >= 0");
    if (!(rho_min < rho_max) || !std::isfinite(rho_min) || !std::isfinite(rho_max))
        throw InvalidArgument("CoKrigingControl: need rho_min < rho_max, both finite");
    if (search_low.starts < 1 || search_low.sweeps < 0 || search_delta.starts < 1 ||
        search_delta.sweeps < 0)
        throw InvalidArgument("CoKrigingControl: invalid search budgets");
}

namespace {

// Log marginal likelihood of the discrepancy fit in raw target units; the
// standardized value is shifted by -n*log(sd) so candidates with different
// discrepancy scales stay comparable.
double rho_score(const Eigen::MatrixXd& x_h, const Eigen::VectorXd& y_delta,
                 const CoKrigingControl& control) {
    const GprModel fit = gpr_fit(x_h, y_delta, control.spec_delta, control.nugget_delta,
                                 false);
    return fit.log_marginal -
           static_cast<double>(y_delta.size()) * std::log(fit.y_std.scale(0));
}

double golden_section_rho(const Eigen::MatrixXd& x_h, const Eigen::VectorXd& y_h,
                          const Eigen::VectorXd& mu_low,
                          const CoKrigingControl& control) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = control.rho_min;
    double b = control.rho_max;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    auto eval = [&](double rho) {
        return rho_score(x_h, y_h - rho * mu_low, control);
    };
    double fc = eval(c);
    double fd = eval(d);
    for (int it = 0; it < 40 && (b - a) > 1e-6; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d);
        }
    }
    return (a + b) / 2.0;
}

}  // namespace

CoKrigingModel train_cokriging(const Eigen::MatrixXd& x_h, const Eigen::MatrixXd& y_h,
                               const Eigen::MatrixXd& x_l, const Eigen::MatrixXd& y_l,
                               const CoKrigingControl& control) {
    control.validate();
    check_xy(x_h, y_h, "train_cokriging (experimental)");
    check_xy(x_l, y_l, "train_cokriging (simulation)");
    if (x_h.cols() != x_l.cols())
        throw InvalidArgument("train_cokriging: feature dimension mismatch");
    if (y_h.cols() != y_l.cols())
        throw InvalidArgument("train_cokriging: target dimension mismatch");
    if (x_l.rows() < 4)
        throw InvalidArgument("train_cokriging: need at least 4 simulation rows");
    if (x_h.rows() < 4)
        throw InvalidArgument("train_cokriging: need at least 4 experimental rows");

    const int targets = static_cast<int>(y_h.cols());
    CoKrigingModel model;
    model.f_low.reserve(static_cast<std::size_t>(targets));
    model.f_delta.reserve(static_cast<std::size_t>(targets));
    model.rho.resize(targets);

    for (int t = 0; t < targets; ++t) {
        model.f_low.push_back(gpr_fit(x_l, y_l.col(t), control.spec_low,
                                      control.nugget_low, control.search_low.optimize,
                                      control.search_low));
        Eigen::VectorXd mu_low(x_h.rows()), var_low(x_h.rows());
        gpr_predict(model.f_low.back(), x_h, mu_low, var_low);

        const double rho = control.estimate_rho
                               ? golden_section_rho(x_h, y_h.col(t), mu_low, control)
                               : 1.0;
        model.rho(t) = rho;
        const Eigen::VectorXd y_delta = y_h.col(t) - rho * mu_low;
        model.f_delta.push_back(gpr_fit(x_h, y_delta, control.spec_delta,
                                        control.nugget_delta,
                                        control.search_delta.optimize,
                                        control.search_delta));
    }
    return model;
}

Eigen::MatrixXd CoKrigingModel::predict(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd mean, variance;
    predict(x, mean, variance);
    return mean;
}

void CoKrigingModel::predict(const Eigen::MatrixXd& x, Eigen::MatrixXd& mean,
                             Eigen::MatrixXd& variance) const {
    const int t_count = targets();
    if (t_count == 0 || static_cast<int>(f_delta.size()) != t_count ||
        rho.size() != t_count)
        throw InvalidArgument("CoKrigingModel: inconsistent model state");
    mean.resize(x.rows(), t_count);
    variance.resize(x.rows(), t_count);
    Eigen::VectorXd m_low(x.rows()), v_low(x.rows());
    Eigen::VectorXd m_delta(x.rows()), v_delta(x.rows());
    for (int t = 0; t < t_count; ++t) {
        gpr_predict(f_low[static_cast<std::size_t>(t)], x, m_low, v_low);
        gpr_predict(f_delta[static_cast<std::size_t>(t)], x, m_delta, v_delta);
        mean.col(t) = rho(t) * m_low + m_delta;
        variance.col(t) = rho(t) * rho(t) * v_low + v_delta;
    }
}

// ---------------------------------------------------------------------------
// Residual-corrected elastic net
// ---------------------------------------------------------------------------

DeltaEnetModel train_delta_enet(const Eigen::MatrixXd& x_h, const Eigen::MatrixXd& y_h,
                                const Eigen::MatrixXd& x_l, const Eigen::MatrixXd& y_l,
                                double alpha, double l1_ratio,
                                const EnetControl& solver) {
    check_xy(x_h, y_h, "train_delta_enet (experimental)");
    check_xy(x_l, y_l, "train_delta_enet (simulation)");
    if (x_h.cols() != x_l.cols())
        throw InvalidArgument("train_delta_enet: feature dimension mismatch");
    if (y_h.cols() != y_l.cols())
        throw InvalidArgument("train_delta_enet: target dimension mismatch");

    DeltaEnetModel model;
    model.alpha = alpha;
    model.l1_ratio = l1_ratio;
    model.estimator = enet_fit_multi(x_l, y_l, alpha, l1_ratio, solver);
    const Eigen::MatrixXd resid = y_h - enet_predict_all(model.estimator, x_h);
    model.corrector = enet_fit_multi(x_h, resid, alpha, l1_ratio, solver);
    for (const auto& m : model.estimator)
        if (!m.converged)
            throw FitFailure("train_delta_enet: estimator failed to converge");
    for (const auto& m : model.corrector)
        if (!m.converged)
            throw FitFailure("train_delta_enet: corrector failed to converge");
    return model;
}

Eigen::MatrixXd DeltaEnetModel::predict(const Eigen::MatrixXd& x) const {
    return enet_predict_all(estimator, x) + enet_predict_all(corrector, x);
}

// ---------------------------------------------------------------------------
// Data augmentation
// ---------------------------------------------------------------------------

AugmentedEnet train_augmented(const Eigen::MatrixXd& x_exp, const Eigen::MatrixXd& y_exp,
                              const Eigen::MatrixXd& x_sim, const Eigen::MatrixXd& y_sim,
                              double alpha, double l1_ratio, const EnetControl& solver) {
    check_xy(x_exp, y_exp, "train_augmented (experimental)");
    if (x_sim.rows() != y_sim.rows())
        throw InvalidArgument("train_augmented (simulation): row count mismatch");
    AugmentedEnet model;
    model.alpha = alpha;
    model.l1_ratio = l1_ratio;
    model.models = enet_fit_multi(vstack(x_exp, x_sim), vstack(y_exp, y_sim), alpha,
                                  l1_ratio, solver);
    return model;
}

AugmentedEnet train_augmented(const LabeledDataset& train_exp, const LabeledDataset& sim,
                              double alpha, double l1_ratio, const EnetControl& solver) {
    const Eigen::MatrixXd x_sim =
        sim.records.empty() ? Eigen::MatrixXd(0, kFeatureGridSize) : feature_matrix(sim);
    const Eigen::MatrixXd y_sim = sim.records.empty()
                                      ? Eigen::MatrixXd(0, LabeledDataset::target_dim)
                                      : target_matrix(sim);
    return train_augmented(feature_matrix(train_exp), target_matrix(train_exp), x_sim,
                           y_sim, alpha, l1_ratio, solver);
}

Eigen::MatrixXd AugmentedEnet::predict(const Eigen::MatrixXd& x) const {
    return enet_predict_all(models, x);
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

void BaselineControl::validate() const {
    for (int h : hidden)
        if (h < 1) throw InvalidArgument("BaselineControl: hidden sizes must be positive");
    net_train.validate();
    gpr_spec.validate();
    if (!(gpr_nugget >= 0.0) || !std::isfinite(gpr_nugget))
        throw InvalidArgument("BaselineControl: gpr_nugget must be finite and >= 0");
    if (!(enet_alpha >= 0.0) || !std::isfinite(enet_alpha))
        throw InvalidArgument("BaselineControl: enet_alpha must be finite and >= 0");
    if (!(enet_l1_ratio >= 0.0 && enet_l1_ratio <= 1.0))
        throw InvalidArgument("BaselineControl: enet_l1_ratio must lie in [0, 1]");
}

Eigen::MatrixXd BaselineGpr::predict(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd mean, variance;
    predict(x, mean, variance);
    return mean;
}

void BaselineGpr::predict(const Eigen::MatrixXd& x, Eigen::MatrixXd& mean,
                          Eigen::MatrixXd& variance) const {
    if (models.empty()) throw InvalidArgument("BaselineGpr: no models");
    mean.resize(x.rows(), targets());
    variance.resize(x.rows(), targets());
    Eigen::VectorXd m(x.rows()), v(x.rows());
    for (int t = 0; t < targets(); ++t) {
        gpr_predict(models[static_cast<std::size_t>(t)], x, m, v);
        mean.col(t) = m;
        variance.col(t) = v;
    }
}

Eigen::MatrixXd BaselineEnet::predict(const Eigen::MatrixXd& x) const {
    return enet_predict_all(models, x);
}

Baselines train_baselines(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                          const BaselineControl& control) {
    control.validate();
    check_xy(x, y, "train_baselines");
    if (x.rows() < 2) throw InvalidArgument("train_baselines: need at least 2 rows");

    Baselines out;
    std::vector<int> layers;
    layers.push_back(static_cast<int>(x.cols()));
    layers.insert(layers.end(), control.hidden.begin(), control.hidden.end());
    layers.push_back(static_cast<int>(y.cols()));
    out.net.net = make_net(layers, control.net_seed);
    out.net.history = net_train(out.net.net, x, y, control.net_train);

    out.gpr.models.reserve(static_cast<std::size_t>(y.cols()));
    for (Eigen::Index t = 0; t < y.cols(); ++t)
        out.gpr.models.push_back(gpr_fit(x, y.col(t), control.gpr_spec,
                                         control.gpr_nugget,
                                         control.gpr_search.optimize,
                                         control.gpr_search));

    out.enet.alpha = control.enet_alpha;
    out.enet.l1_ratio = control.enet_l1_ratio;
    out.enet.models =
        enet_fit_multi(x, y, control.enet_alpha, control.enet_l1_ratio,
                       control.enet_solver);
    return out;
}

// ---------------------------------------------------------------------------
// Common predictor wrapper
// ---------------------------------------------------------------------------

std::string to_string(Method m) {
    switch (m) {
        case Method::pinn: return "pinn";
        case Method::cokriging: return "cokriging";
        case Method::delta_enet: return "delta_enet";
        case Method::augmented: return "augmented";
        case Method::base_net: return "base_net";
        case Method::base_gpr: return "base_gpr";
        case Method::base_enet: return "base_enet";
    }
    throw InvalidArgument("to_string(Method): unknown value");
}

Method method_from_string(const std::string& s) {
    for (Method m : all_methods())
        if (to_string(m) == s) return m;
    throw ParseError("unknown method name: " + s);
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> kAll = {
        Method::pinn,      Method::cokriging, Method::delta_enet, Method::augmented,
        Method::base_net,  Method::base_gpr,  Method::base_enet,
    };
    return kAll;
}

namespace {

template <class... Ts>
struct Overload : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overload(Ts...) -> Overload<Ts...>;

}  // namespace

Method Predictor::method() const {
    return std::visit(Overload{[](const PinnModel&) { return Method::pinn; },
                               [](const CoKrigingModel&) { return Method::cokriging; },
                               [](const DeltaEnetModel&) { return Method::delta_enet; },
                               [](const AugmentedEnet&) { return Method::augmented; },
                               [](const BaselineNet&) { return Method::base_net; },
                               [](const BaselineGpr&) { return Method::base_gpr; },
                               [](const BaselineEnet&) { return Method::base_enet; }},
                      model);
}

bool Predictor::has_variance() const {
    const Method m = method();
    return m == Method::cokriging || m == Method::base_gpr;
}

Eigen::MatrixXd Predictor::predict(const Eigen::MatrixXd& x) const {
    return std::visit([&x](const auto& m) { return m.predict(x); }, model);
}

Prediction Predictor::predict_curve(const FeatureCurve& feature) const {
    Eigen::MatrixXd x(1, kFeatureGridSize);
    x.row(0) = feature_row(feature);
    Prediction out;
    if (const auto* ck = std::get_if<CoKrigingModel>(&model)) {
        Eigen::MatrixXd mean, variance;
        ck->predict(x, mean, variance);
        out.mean = health_from_row(mean.row(0));
        out.variance = health_from_row(variance.row(0));
    } else if (const auto* g = std::get_if<BaselineGpr>(&model)) {
        Eigen::MatrixXd mean, variance;
        g->predict(x, mean, variance);
        out.mean = health_from_row(mean.row(0));
        out.variance = health_from_row(variance.row(0));
    } else {
        out.mean = health_from_row(predict(x).row(0));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

nlohmann::json curve_json(const ElectrodeCurve& c) {
    return {{"q", c.q}, {"v", c.v}, {"label", c.label}};
}

ElectrodeCurve curve_from(const nlohmann::json& j, Electrode electrode) {
    return ElectrodeCurve::create(electrode, j.at("q").get<std::vector<double>>(),
                                  j.at("v").get<std::vector<double>>(),
                                  j.at("label").get<std::string>());
}

nlohmann::json pair_json(const ElectrodePair& pair) {
    return {{"pe", curve_json(pair.pe)},
            {"ne", curve_json(pair.ne)},
            {"q_spec_pe", pair.q_spec_pe},
            {"q_spec_ne", pair.q_spec_ne}};
}

ElectrodePair pair_from(const nlohmann::json& j) {
    ElectrodePair pair;
    pair.pe = curve_from(j.at("pe"), Electrode::positive);
    pair.ne = curve_from(j.at("ne"), Electrode::negative);
    pair.q_spec_pe = j.at("q_spec_pe").get<double>();
    pair.q_spec_ne = j.at("q_spec_ne").get<double>();
    return pair;
}

nlohmann::json enet_list_json(const std::vector<ElasticNetModel>& models) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : models) arr.push_back(nlohmann::json::parse(enet_to_json(m)));
    return arr;
}

std::vector<ElasticNetModel> enet_list_from(const nlohmann::json& arr) {
    std::vector<ElasticNetModel> models;
    for (const auto& j : arr) models.push_back(enet_from_json(j.dump()));
    return models;
}

nlohmann::json gpr_list_json(const std::vector<GprModel>& models) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : models) arr.push_back(nlohmann::json::parse(gpr_to_json(m)));
    return arr;
}

std::vector<GprModel> gpr_list_from(const nlohmann::json& arr) {
    std::vector<GprModel> models;
    for (const auto& j : arr) models.push_back(gpr_from_json(j.dump()));
    return models;
}

}  // namespace

std::string predictor_to_json(const Predictor& p) {
    nlohmann::json j = detail::model_document("predictor");
    j["method"] = to_string(p.method());
    nlohmann::json payload;
    std::visit(
        Overload{
            [&](const PinnModel& m) {
                payload["core"] = nlohmann::json::parse(net_to_json(m.core));
                payload["surrogate"] =
                    nlohmann::json::parse(surrogate_to_json(m.surrogate));
                payload["ratios"] = {m.ratios.r1, m.ratios.r2, m.ratios.r3};
                payload["pair"] = pair_json(m.pair);
            },
            [&](const CoKrigingModel& m) {
                payload["rho"] = detail::vector_json(m.rho);
                payload["f_low"] = gpr_list_json(m.f_low);
                payload["f_delta"] = gpr_list_json(m.f_delta);
            },
            [&](const DeltaEnetModel& m) {
                payload["alpha"] = m.alpha;
                payload["l1_ratio"] = m.l1_ratio;
                payload["estimator"] = enet_list_json(m.estimator);
                payload["corrector"] = enet_list_json(m.corrector);
            },
            [&](const AugmentedEnet& m) {
                payload["alpha"] = m.alpha;
                payload["l1_ratio"] = m.l1_ratio;
                payload["models"] = enet_list_json(m.models);
            },
            [&](const BaselineNet& m) {
                payload["net"] = nlohmann::json::parse(net_to_json(m.net));
            },
            [&](const BaselineGpr& m) { payload["models"] = gpr_list_json(m.models); },
            [&](const BaselineEnet& m) {
                payload["alpha"] = m.alpha;
                payload["l1_ratio"] = m.l1_ratio;
                payload["models"] = enet_list_json(m.models);
            }},
        p.model);
    j["payload"] = std::move(payload);
    return j.dump();
}

Predictor predictor_from_json(const std::string& text) {
    const nlohmann::json j = detail::parse_document(text, "predictor");
    try {
        const Method method = method_from_string(j.at("method").get<std::string>());
        const nlohmann::json& payload = j.at("payload");
        Predictor p;
        switch (method) {
            case Method::pinn: {
                PinnModel m;
                m.core = net_from_json(payload.at("core").dump());
                m.surrogate = surrogate_from_json(payload.at("surrogate").dump());
                const auto r = payload.at("ratios").get<std::vector<double>>();
                if (r.size() != 3)
                    throw ParseError("predictor document: ratios must have 3 entries");
                m.ratios = PinnRatios{r[0], r[1], r[2]};
                m.pair = pair_from(payload.at("pair"));
                p.model = std::move(m);
                break;
            }
            case Method::cokriging: {
                CoKrigingModel m;
                m.rho = detail::vector_from(payload.at("rho"));
                m.f_low = gpr_list_from(payload.at("f_low"));
                m.f_delta = gpr_list_from(payload.at("f_delta"));
                if (m.f_low.size() != m.f_delta.size() ||
                    m.rho.size() != static_cast<Eigen::Index>(m.f_low.size()))
                    throw ParseError("predictor document: inconsistent kriging bundle");
                p.model = std::move(m);
                break;
            }
            case Method::delta_enet: {
                DeltaEnetModel m;
                m.alpha = payload.at("alpha").get<double>();
                m.l1_ratio = payload.at("l1_ratio").get<double>();
                m.estimator = enet_list_from(payload.at("estimator"));
                m.corrector = enet_list_from(payload.at("corrector"));
                if (m.estimator.size() != m.corrector.size())
                    throw ParseError("predictor document: inconsistent delta bundle");
                p.model = std::move(m);
                break;
            }
            case Method::augmented: {
                AugmentedEnet m;
                m.alpha = payload.at("alpha").get<double>();
                m.l1_ratio = payload.at("l1_ratio").get<double>();
                m.models = enet_list_from(payload.at("models"));
                p.model = std::move(m);
                break;
            }
            case Method::base_net: {
                BaselineNet m;
                m.net = net_from_json(payload.at("net").dump());
                p.model = std::move(m);
                break;
            }
            case Method::base_gpr: {
                BaselineGpr m;
                m.models = gpr_list_from(payload.at("models"));
                p.model = std::move(m);
                break;
            }
            case Method::base_enet: {
                BaselineEnet m;
                m.alpha = payload.at("alpha").get<double>();
                m.l1_ratio = payload.at("l1_ratio").get<double>();
                m.models = enet_list_from(payload.at("models"));
                p.model = std::move(m);
                break;
            }
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("predictor document: ") + e.what());
    }
}

}  // namespace battdiag
