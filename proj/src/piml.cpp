#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "battdiag/piml.hpp"
#include "battdiag/rng.hpp"
#include "model_json.hpp"

namespace battdiag {
namespace {

std::vector<int> all_rows(const LabeledDataset& ds) {
    std::vector<int> rows(ds.records.size());
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

void check_rows(const LabeledDataset& ds, const std::vector<int>& rows,
                const char* where) {
    const int n = static_cast<int>(ds.records.size());
    for (int r : rows)
        if (r < 0 || r >= n)
            throw InvalidArgument(std::string(where) + ": record index out of range");
}

Eigen::RowVectorXd param_row(const HalfCellParams& p) {
    Eigen::RowVectorXd row(4);
    row << p.m_p, p.m_n, p.delta_p, p.delta_n;
    return row;
}

HalfCellParams params_from_row(const Eigen::RowVectorXd& row) {
    if (row.size() != 4)
        throw InvalidArgument("params_from_row: expected 4 components");
    return HalfCellParams{row(0), row(1), row(2), row(3)};
}

Standardizer identity_standardizer(int dim) {
    Standardizer s;
    s.mean = Eigen::VectorXd::Zero(dim);
    s.scale = Eigen::VectorXd::Ones(dim);
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset views
// ---------------------------------------------------------------------------

Eigen::MatrixXd feature_matrix(const LabeledDataset& ds, const std::vector<int>& rows) {
    check_rows(ds, rows, "feature_matrix");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), kFeatureGridSize);
    for (std::size_t i = 0; i < rows.size(); ++i)
        x.row(static_cast<Eigen::Index>(i)) = feature_row(ds.records[rows[i]].feature);
    return x;
}

Eigen::MatrixXd feature_matrix(const LabeledDataset& ds) {
    return feature_matrix(ds, all_rows(ds));
}

Eigen::MatrixXd target_matrix(const LabeledDataset& ds, const std::vector<int>& rows) {
    check_rows(ds, rows, "target_matrix");
    Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()), LabeledDataset::target_dim);
    for (std::size_t i = 0; i < rows.size(); ++i)
        y.row(static_cast<Eigen::Index>(i)) = target_row(ds.records[rows[i]].truth);
    return y;
}

Eigen::MatrixXd target_matrix(const LabeledDataset& ds) {
    return target_matrix(ds, all_rows(ds));
}

Eigen::MatrixXd param_matrix(const LabeledDataset& ds, const std::vector<int>& rows) {
    check_rows(ds, rows, "param_matrix");
    Eigen::MatrixXd p(static_cast<Eigen::Index>(rows.size()), 4);
    for (std::size_t i = 0; i < rows.size(); ++i)
        p.row(static_cast<Eigen::Index>(i)) = param_row(ds.records[rows[i]].params);
    return p;
}

Eigen::MatrixXd param_matrix(const LabeledDataset& ds) {
    return param_matrix(ds, all_rows(ds));
}

Eigen::RowVectorXd feature_row(const FeatureCurve& feature) {
    if (static_cast<int>(feature.dqdv.size()) != kFeatureGridSize ||
        feature.v.size() != feature.dqdv.size())
        throw InvalidArgument("feature_row: curve is not on the shared feature grid");
    return Eigen::Map<const Eigen::RowVectorXd>(feature.dqdv.data(), kFeatureGridSize);
}

Eigen::RowVectorXd target_row(const HealthParams& h) {
    Eigen::RowVectorXd row(4);
    row << h.q_cell, h.m_p, h.m_n, h.lii;
    return row;
}

HealthParams health_from_row(const Eigen::RowVectorXd& row) {
    if (row.size() != LabeledDataset::target_dim)
        throw InvalidArgument("health_from_row: expected 4 components");
    HealthParams h;
    h.q_cell = row(0);
    h.m_p = row(1);
    h.m_n = row(2);
    h.lii = row(3);
    return h;
}

LabeledDataset dataset_subset(const LabeledDataset& ds, const std::vector<int>& rows) {
    check_rows(ds, rows, "dataset_subset");
    LabeledDataset out;
    out.records.reserve(rows.size());
    for (int r : rows) out.records.push_back(ds.records[r]);
    out.validate();
    return out;
}

LabeledDataset dataset_concat(const LabeledDataset& a, const LabeledDataset& b) {
    LabeledDataset out;
    out.records.reserve(a.records.size() + b.records.size());
    out.records.insert(out.records.end(), a.records.begin(), a.records.end());
    out.records.insert(out.records.end(), b.records.begin(), b.records.end());
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------
// Half-cell surrogate
// ---------------------------------------------------------------------------

void SurrogateControl::validate() const {
    if (!(range_frac > 0.0) || !std::isfinite(range_frac))
        throw InvalidArgument("SurrogateControl: range_frac must be positive");
    if (n_per_center < 2)
        throw InvalidArgument("SurrogateControl: n_per_center must be >= 2");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 0.5))
        throw InvalidArgument("SurrogateControl: holdout_fraction must lie in (0, 0.5)");
    if (!(max_rel_residual > 0.0) || !std::isfinite(max_rel_residual))
        throw InvalidArgument("SurrogateControl: max_rel_residual must be positive");
    if (attempts < 1) throw InvalidArgument("SurrogateControl: attempts must be >= 1");
    for (int h : hidden)
        if (h < 1) throw InvalidArgument("SurrogateControl: hidden sizes must be positive");
    train.validate();
}

Eigen::MatrixXd SurrogateHc::eval(const Eigen::MatrixXd& params_raw) const {
    return net.predict(params_raw);
}

Eigen::Vector4d SurrogateHc::eval_one(const HalfCellParams& p) const {
    Eigen::MatrixXd x(1, 4);
    x.row(0) = param_row(p);
    const Eigen::MatrixXd out = net.predict(x);
    return Eigen::Vector4d(out(0, 0), out(0, 1), out(0, 2), out(0, 3));
}

bool SurrogateHc::extrapolating(const HalfCellParams& p) const {
    if (in_lo.size() != 4 || in_hi.size() != 4)
        throw InvalidArgument("SurrogateHc: envelope not set");
    const Eigen::RowVectorXd row = param_row(p);
    for (int j = 0; j < 4; ++j)
        if (row(j) < in_lo(j) || row(j) > in_hi(j)) return true;
    return false;
}

namespace {

struct SurrogateMatrices {
    Eigen::MatrixXd x;  // params
    Eigen::MatrixXd y;  // (q_cell, lii, v_peak1, v_peak2)
};

SurrogateMatrices surrogate_matrices(const std::vector<SurrogateSample>& samples) {
    const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
    SurrogateMatrices m;
    m.x.resize(n, 4);
    m.y.resize(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
        const SurrogateSample& s = samples[static_cast<std::size_t>(i)];
        m.x.row(i) = param_row(s.params);
        m.y(i, 0) = s.truth.q_cell;
        m.y(i, 1) = s.truth.lii;
        m.y(i, 2) = s.v_peak1;
        m.y(i, 3) = s.v_peak2;
    }
    return m;
}

double max_relative_residual(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < pred.rows(); ++i)
        for (Eigen::Index j = 0; j < pred.cols(); ++j) {
            const double denom = std::max(std::abs(truth(i, j)), 1e-12);
            worst = std::max(worst, std::abs(pred(i, j) - truth(i, j)) / denom);
        }
    return worst;
}

}  // namespace

SurrogateHc train_surrogate(const ElectrodePair& pair,
                            const std::vector<HalfCellParams>& centers,
                            const SurrogateControl& control) {
    control.validate();
    if (centers.empty())
        throw InvalidArgument("train_surrogate: need at least one center");

    int n_per = control.n_per_center;
    double last_residual = 0.0;
    for (int attempt = 1; attempt <= control.attempts; ++attempt) {
        const std::uint64_t tag = static_cast<std::uint64_t>(attempt);
        const std::vector<SurrogateSample> samples = perturb_for_surrogate(
            pair, centers, control.range_frac, n_per, mix_seed(control.seed, tag));
        const SurrogateMatrices m = surrogate_matrices(samples);
        const int n = static_cast<int>(m.x.rows());

        // Hold out an audit slice the fit never sees.
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        Rng split_rng(mix_seed(control.seed, tag ^ 0x5u));
        split_rng.shuffle(perm);
        const int n_hold =
            std::clamp(static_cast<int>(std::llround(control.holdout_fraction * n)), 1,
                       n - 2);
        Eigen::MatrixXd x_hold(n_hold, 4), y_hold(n_hold, 4);
        Eigen::MatrixXd x_fit(n - n_hold, 4), y_fit(n - n_hold, 4);
        for (int i = 0; i < n_hold; ++i) {
            x_hold.row(i) = m.x.row(perm[static_cast<std::size_t>(i)]);
            y_hold.row(i) = m.y.row(perm[static_cast<std::size_t>(i)]);
        }
        for (int i = n_hold; i < n; ++i) {
            x_fit.row(i - n_hold) = m.x.row(perm[static_cast<std::size_t>(i)]);
            y_fit.row(i - n_hold) = m.y.row(perm[static_cast<std::size_t>(i)]);
        }

        std::vector<int> layers;
        layers.push_back(4);
        layers.insert(layers.end(), control.hidden.begin(), control.hidden.end());
        layers.push_back(4);
        DenseNet net = make_net(layers, mix_seed(control.seed, tag ^ 0x11u));
        TrainControl train = control.train;
        train.seed = mix_seed(control.seed, tag ^ 0x23u);
        net_train(net, x_fit, y_fit, train);

        last_residual = max_relative_residual(net.predict(x_hold), y_hold);
        if (last_residual < control.max_rel_residual) {
            SurrogateHc s;
            s.net = std::move(net);
            s.report.samples = n;
            s.report.holdout = n_hold;
            s.report.attempts = attempt;
            s.report.max_rel_residual = last_residual;
            s.in_lo = m.x.colwise().minCoeff().transpose();
            s.in_hi = m.x.colwise().maxCoeff().transpose();
            return s;
        }
        n_per *= 2;
    }
    throw SurrogateAccuracy("train_surrogate: held-out relative residual " +
                            std::to_string(last_residual) + " exceeds " +
                            std::to_string(control.max_rel_residual) + " after " +
                            std::to_string(control.attempts) + " attempts");
}

std::string surrogate_to_json(const SurrogateHc& s) {
    nlohmann::json j = detail::model_document("surrogate");
    j["net"] = nlohmann::json::parse(net_to_json(s.net));
    j["report"] = {{"samples", s.report.samples},
                   {"holdout", s.report.holdout},
                   {"attempts", s.report.attempts},
                   {"max_rel_residual", s.report.max_rel_residual}};
    j["in_lo"] = detail::vector_json(s.in_lo);
    j["in_hi"] = detail::vector_json(s.in_hi);
    return j.dump();
}

SurrogateHc surrogate_from_json(const std::string& text) {
    const nlohmann::json j = detail::parse_document(text, "surrogate");
    try {
        SurrogateHc s;
        s.net = net_from_json(j.at("net").dump());
        const nlohmann::json& r = j.at("report");
        s.report.samples = r.at("samples").get<int>();
        s.report.holdout = r.at("holdout").get<int>();
        s.report.attempts = r.at("attempts").get<int>();
        s.report.max_rel_residual = r.at("max_rel_residual").get<double>();
        s.in_lo = detail::vector_from(j.at("in_lo"));
        s.in_hi = detail::vector_from(j.at("in_hi"));
        if (s.net.in_dim() != 4 || s.net.out_dim() != 4 || s.in_lo.size() != 4 ||
            s.in_hi.size() != 4)
            throw ParseError("surrogate model document: inconsistent shapes");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("surrogate model document: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Physics-guided network
// ---------------------------------------------------------------------------

namespace {

void check_weights(double lambda1, double lambda2, const char* where) {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !std::isfinite(lambda1) ||
        !std::isfinite(lambda2))
        throw InvalidArgument(std::string(where) +
                              ": loss weights must be finite and non-negative");
}

void check_ratios(const PinnRatios& r, const char* where) {
    if (!(r.r1 >= 0.0) || !(r.r2 >= 0.0) || !(r.r3 >= 0.0) || !std::isfinite(r.r1) ||
        !std::isfinite(r.r2) || !std::isfinite(r.r3))
        throw InvalidArgument(std::string(where) +
                              ": ratios must be finite and non-negative");
    if (!(r.r1 + r.r2 + r.r3 > 0.0))
        throw InvalidArgument(std::string(where) + ": ratios must not all be zero");
}

}  // namespace

PinnRatios ratios_from_weights(const PinnWeights& w) {
    check_weights(w.lambda1, w.lambda2, "ratios_from_weights");
    const double total = 1.0 + w.lambda1 + w.lambda2;
    return PinnRatios{1.0 / total, w.lambda1 / total, w.lambda2 / total};
}

PinnWeights weights_from_ratios(const PinnRatios& r) {
    check_ratios(r, "weights_from_ratios");
    if (!(r.r1 > 0.0))
        throw InvalidArgument(
            "weights_from_ratios: r1 must be positive to express weights");
    return PinnWeights{r.r2 / r.r1, r.r3 / r.r1};
}

PinnData prepare_pinn_data(const ElectrodePair& pair, const LabeledDataset& train) {
    const int n = static_cast<int>(train.records.size());
    if (n < 1) throw InvalidArgument("prepare_pinn_data: empty training set");
    PinnData data;
    data.x.resize(n, kFeatureGridSize);
    data.theta.resize(n, 4);
    data.aux.resize(n, 2);
    data.peaks = Eigen::MatrixXd::Zero(n, 2);
    data.has_peaks.assign(static_cast<std::size_t>(n), 0);

    int n_peaks = 0;
    for (int i = 0; i < n; ++i) {
        const CellRecord& rec = train.records[static_cast<std::size_t>(i)];
        data.x.row(i) = feature_row(rec.feature);
        data.theta.row(i) = param_row(rec.params);
        data.aux(i, 0) = rec.truth.q_cell;
        data.aux(i, 1) = rec.truth.lii;
        try {
            const FeatureCurve clean =
                incremental_capacity(reconstruct_ocv(pair, rec.params));
            const auto [low, high] = detect_peaks(clean).top_two();
            data.peaks(i, 0) = low.v_position;
            data.peaks(i, 1) = high.v_position;
            data.has_peaks[static_cast<std::size_t>(i)] = 1;
            ++n_peaks;
        } catch (const PeakDeficit&) {
            // Row contributes to the parameter and capacity terms only.
        }
    }

    // The capacity and peak terms are scaled by max(column sd, |column mean|):
    // quantities whose spread is small relative to their magnitude (peak
    // voltages vary by ~1% around 3.8 V) would otherwise blow small relative
    // errors up into large standardized ones. With this floor a standardized
    // residual never exceeds the corresponding relative residual, so a
    // surrogate meeting its 0.5% audit contributes less than (0.5%)^2 per
    // term when predictions hit the truth exactly.
    data.aux_std = Standardizer::fit(data.aux);
    data.aux_std.scale = data.aux_std.scale.cwiseMax(data.aux_std.mean.cwiseAbs());
    if (n_peaks > 0) {
        Eigen::MatrixXd peak_rows(n_peaks, 2);
        int k = 0;
        for (int i = 0; i < n; ++i)
            if (data.has_peaks[static_cast<std::size_t>(i)])
                peak_rows.row(k++) = data.peaks.row(i);
        data.peak_std = Standardizer::fit(peak_rows);
        data.peak_std.scale =
            data.peak_std.scale.cwiseMax(data.peak_std.mean.cwiseAbs());
    } else {
        data.peak_std = identity_standardizer(2);
    }
    return data;
}

PinnLossTerms pinn_loss_terms(const Eigen::MatrixXd& theta_pred_raw, const PinnData& data,
                              const std::vector<int>& rows, const SurrogateHc& surrogate,
                              const Standardizer& theta_std) {
    const Eigen::Index nb = static_cast<Eigen::Index>(rows.size());
    if (nb == 0) throw InvalidArgument("pinn_loss_terms: empty batch");
    if (theta_pred_raw.rows() != nb || theta_pred_raw.cols() != 4)
        throw InvalidArgument("pinn_loss_terms: prediction batch must be rows x 4");
    const int n = data.rows();
    for (int r : rows)
        if (r < 0 || r >= n)
            throw InvalidArgument("pinn_loss_terms: row index out of range");

    Eigen::MatrixXd theta_true(nb, 4), aux_true(nb, 2), peaks_true(nb, 2);
    Eigen::VectorXd mask(nb);
    for (Eigen::Index i = 0; i < nb; ++i) {
        const int r = rows[static_cast<std::size_t>(i)];
        theta_true.row(i) = data.theta.row(r);
        aux_true.row(i) = data.aux.row(r);
        peaks_true.row(i) = data.peaks.row(r);
        mask(i) = data.has_peaks[static_cast<std::size_t>(r)] ? 1.0 : 0.0;
    }

    PinnLossTerms terms;
    const Eigen::MatrixXd d1 = theta_std.apply(theta_pred_raw) - theta_std.apply(theta_true);
    terms.l1 = d1.squaredNorm() / static_cast<double>(nb);

    const Eigen::MatrixXd g = surrogate.eval(theta_pred_raw);
    const Eigen::MatrixXd d2 = ((g.leftCols(2) - aux_true).array().rowwise() /
                                data.aux_std.scale.transpose().array())
                                   .matrix();
    terms.l2 = d2.squaredNorm() / static_cast<double>(nb);

    Eigen::MatrixXd d3 = ((g.rightCols(2) - peaks_true).array().rowwise() /
                          data.peak_std.scale.transpose().array())
                             .matrix();
    d3 = (d3.array().colwise() * mask.array()).matrix();
    const int n3 = static_cast<int>(std::lround(mask.sum()));
    terms.l3_rows = n3;
    terms.l3 = n3 > 0 ? d3.squaredNorm() / static_cast<double>(n3) : 0.0;
    return terms;
}

double pinn_loss(const Eigen::MatrixXd& theta_pred_raw, const PinnData& data,
                 const std::vector<int>& rows, const SurrogateHc& surrogate,
                 const Standardizer& theta_std, const PinnWeights& weights) {
    check_weights(weights.lambda1, weights.lambda2, "pinn_loss");
    return pinn_loss_terms(theta_pred_raw, data, rows, surrogate, theta_std).total(weights);
}

PinnObjective::PinnObjective(const DenseNet& core, const PinnData& data,
                             const SurrogateHc& surrogate, const PinnRatios& ratios)
    : core_(&core), surrogate_(&surrogate), data_(&data) {
    check_ratios(ratios, "PinnObjective");
    if (core.in_dim() != data.x.cols())
        throw InvalidArgument("PinnObjective: core input does not match features");
    if (core.out_dim() != 4)
        throw InvalidArgument("PinnObjective: core must predict 4 half-cell params");
    if (surrogate.net.in_dim() != 4 || surrogate.net.out_dim() != 4)
        throw InvalidArgument("PinnObjective: surrogate must map 4 params to 4 outputs");
    if (ratios.r1 > 0.0) {
        w1_ = 1.0;
        w2_ = ratios.r2 / ratios.r1;
        w3_ = ratios.r3 / ratios.r1;
    } else {
        const double total = ratios.r1 + ratios.r2 + ratios.r3;
        w1_ = 0.0;
        w2_ = ratios.r2 / total;
        w3_ = ratios.r3 / total;
    }
    n_ = data.rows();
    xs_ = core.in_std.apply(data.x);
    theta_std_ = core.out_std.apply(data.theta);
}

double PinnObjective::operator()(const Eigen::VectorXd& core_params,
                                 const std::vector<int>& rows,
                                 Eigen::VectorXd* grad) const {
    const Eigen::Index nb = static_cast<Eigen::Index>(rows.size());
    if (nb == 0) throw InvalidArgument("PinnObjective: empty batch");
    Eigen::MatrixXd xb(nb, xs_.cols());
    Eigen::MatrixXd tb(nb, 4);
    Eigen::MatrixXd aux_true(nb, 2), peaks_true(nb, 2);
    Eigen::VectorXd mask(nb);
    for (Eigen::Index i = 0; i < nb; ++i) {
        const int r = rows[static_cast<std::size_t>(i)];
        if (r < 0 || r >= n_)
            throw InvalidArgument("PinnObjective: row index out of range");
        xb.row(i) = xs_.row(r);
        tb.row(i) = theta_std_.row(r);
        aux_true.row(i) = data_->aux.row(r);
        peaks_true.row(i) = data_->peaks.row(r);
        mask(i) = data_->has_peaks[static_cast<std::size_t>(r)] ? 1.0 : 0.0;
    }

    ForwardCache cache;
    const Eigen::MatrixXd out =
        net_forward_std(*core_, core_params, xb, grad ? &cache : nullptr);
    const Eigen::MatrixXd diff = out - tb;
    const double l1 = diff.squaredNorm() / static_cast<double>(nb);
    Eigen::MatrixXd dout;
    if (grad) dout = (w1_ * 2.0 / static_cast<double>(nb)) * diff;

    double l2 = 0.0, l3 = 0.0;
    int n3 = 0;
    const bool need_physics = w2_ > 0.0 || w3_ > 0.0 || grad == nullptr;
    if (need_physics) {
        const DenseNet& g_net = surrogate_->net;
        // Raw predicted params, then through the surrogate.
        const Eigen::MatrixXd theta_raw = core_->out_std.invert(out);
        const Eigen::MatrixXd gin = g_net.in_std.apply(theta_raw);
        ForwardCache gcache;
        const bool need_g_grad = grad && (w2_ > 0.0 || w3_ > 0.0);
        const Eigen::MatrixXd gout = net_forward_std(g_net, g_net.params, gin,
                                                     need_g_grad ? &gcache : nullptr);
        const Eigen::MatrixXd graw = g_net.out_std.invert(gout);

        const Eigen::MatrixXd d2 = ((graw.leftCols(2) - aux_true).array().rowwise() /
                                    data_->aux_std.scale.transpose().array())
                                       .matrix();
        l2 = d2.squaredNorm() / static_cast<double>(nb);

        Eigen::MatrixXd d3 = ((graw.rightCols(2) - peaks_true).array().rowwise() /
                              data_->peak_std.scale.transpose().array())
                                 .matrix();
        d3 = (d3.array().colwise() * mask.array()).matrix();
        n3 = static_cast<int>(std::lround(mask.sum()));
        l3 = n3 > 0 ? d3.squaredNorm() / static_cast<double>(n3) : 0.0;

        if (need_g_grad) {
            Eigen::MatrixXd dgraw = Eigen::MatrixXd::Zero(nb, 4);
            dgraw.leftCols(2) = (w2_ * 2.0 / static_cast<double>(nb)) *
                                (d2.array().rowwise() /
                                 data_->aux_std.scale.transpose().array())
                                    .matrix();
            if (n3 > 0)
                dgraw.rightCols(2) = (w3_ * 2.0 / static_cast<double>(n3)) *
                                     (d3.array().rowwise() /
                                      data_->peak_std.scale.transpose().array())
                                         .matrix();
            const Eigen::MatrixXd dgout =
                (dgraw.array().rowwise() * g_net.out_std.scale.transpose().array())
                    .matrix();
            Eigen::MatrixXd dgin;
            net_backward_std(g_net, g_net.params, gcache, dgout, nullptr, &dgin);
            const Eigen::MatrixXd dtheta_raw =
                (dgin.array().rowwise() / g_net.in_std.scale.transpose().array())
                    .matrix();
            dout.array() +=
                dtheta_raw.array().rowwise() * core_->out_std.scale.transpose().array();
        }
    }

    if (grad) net_backward_std(*core_, core_params, cache, dout, grad, nullptr);
    if (grad == nullptr) {
        PinnLossTerms t;
        t.l1 = l1;
        t.l2 = l2;
        t.l3 = l3;
        t.l3_rows = n3;
        val_terms_.push_back(t);
    }
    return w1_ * l1 + w2_ * l2 + w3_ * l3;
}

void PinnControl::validate() const {
    check_ratios(ratios, "PinnControl");
    for (int h : hidden)
        if (h < 1) throw InvalidArgument("PinnControl: hidden sizes must be positive");
    train.validate();
}

HalfCellParams PinnModel::predict_params(const FeatureCurve& feature) const {
    Eigen::MatrixXd x(1, kFeatureGridSize);
    x.row(0) = feature_row(feature);
    const Eigen::MatrixXd out = core.predict(x);
    return params_from_row(out.row(0));
}

Eigen::MatrixXd PinnModel::predict_params(const Eigen::MatrixXd& x) const {
    return core.predict(x);
}

namespace {

HealthParams pinn_health(const PinnModel& model, const HalfCellParams& theta) {
    try {
        return health_params(model.pair, theta);
    } catch (const InfeasibleParameters&) {
        const Eigen::Vector4d g = model.surrogate.eval_one(theta);
        HealthParams h;
        h.q_cell = g(0);
        h.m_p = theta.m_p;
        h.m_n = theta.m_n;
        h.lii = g(1);
        return h;
    }
}

}  // namespace

HealthParams PinnModel::predict(const FeatureCurve& feature) const {
    return pinn_health(*this, predict_params(feature));
}

Eigen::MatrixXd PinnModel::predict(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd theta = core.predict(x);
    Eigen::MatrixXd y(theta.rows(), LabeledDataset::target_dim);
    for (Eigen::Index i = 0; i < theta.rows(); ++i) {
        const HealthParams h = pinn_health(*this, params_from_row(theta.row(i)));
        y.row(i) = target_row(h);
    }
    return y;
}

PinnModel train_pinn(const ElectrodePair& pair, const LabeledDataset& train,
                     const SurrogateHc& surrogate, const PinnControl& control) {
    control.validate();
    const PinnData data = prepare_pinn_data(pair, train);
    if (data.rows() < 2)
        throw InvalidArgument("train_pinn: need at least 2 training rows");

    PinnModel model;
    model.pair = pair;
    model.surrogate = surrogate;
    model.ratios = control.ratios;

    std::vector<int> layers;
    layers.push_back(static_cast<int>(data.x.cols()));
    layers.insert(layers.end(), control.hidden.begin(), control.hidden.end());
    layers.push_back(4);
    model.core = make_net(layers, control.net_seed);
    model.core.in_std = Standardizer::fit(data.x);
    model.core.out_std = Standardizer::fit(data.theta);

    const PinnObjective objective(model.core, data, model.surrogate, control.ratios);
    const BatchLossFn loss = [&objective](const Eigen::VectorXd& params,
                                          const std::vector<int>& rows,
                                          Eigen::VectorXd* grad) {
        return objective(params, rows, grad);
    };
    model.history = net_train_custom(model.core, data.rows(), loss, control.train);
    model.term_history = objective.val_terms();

    std::vector<int> rows(static_cast<std::size_t>(data.rows()));
    std::iota(rows.begin(), rows.end(), 0);
    model.final_terms = pinn_loss_terms(model.core.predict(data.x), data, rows,
                                        model.surrogate, model.core.out_std);
    return model;
}

}  // namespace battdiag
