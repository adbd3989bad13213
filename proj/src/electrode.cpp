#include "battdiag/electrode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "battdiag/csv.hpp"

namespace battdiag {

namespace {

constexpr int kMinCurvePoints = 16;
constexpr int kMinSyntheticPoints = 64;

}  // namespace

ElectrodeCurve ElectrodeCurve::create(Electrode electrode, std::vector<double> q,
                                      std::vector<double> v, std::string label) {
    if (q.size() != v.size())
        throw ValidationError("electrode curve '" + label + "': q/v length mismatch");
    if (q.size() < kMinCurvePoints)
        throw ValidationError("electrode curve '" + label + "': needs >= " +
                              std::to_string(kMinCurvePoints) + " samples, got " +
                              std::to_string(q.size()));
    if (q.front() != 0.0)
        throw ValidationError("electrode curve '" + label + "': q must start at 0");
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (!std::isfinite(q[i]) || !std::isfinite(v[i]))
            throw ValidationError("electrode curve '" + label + "': non-finite sample");
        if (i > 0 && !(q[i] > q[i - 1]))
            throw ValidationError("electrode curve '" + label +
                                  "': q must be strictly increasing");
        if (i > 0 && v[i] > v[i - 1])
            throw ValidationError("electrode curve '" + label +
                                  "': v must be non-increasing in q");
    }

    ElectrodeCurve c;
    c.electrode = electrode;
    c.q = std::move(q);
    c.v = std::move(v);
    c.label = std::move(label);
    c.interp_ = MonotoneCubic(c.q, c.v);
    return c;
}

double synthetic_potential(SyntheticElectrode kind, double q) {
    if (kind == SyntheticElectrode::lco_like) {
        const auto& f = kLcoLikeForm;
        return f.top - f.lin * q -
               f.curve_amp * f.curve_tau * (1.0 - std::exp(-q / f.curve_tau)) -
               f.dive_amp * std::exp((q - f.q_max) / f.dive_tau);
    }
    const auto& f = kGraphiteLikeForm;
    double v = f.base + f.ramp * (1.0 - q / f.q_max);
    for (const auto& s : f.steps) v += s.amp / (1.0 + std::exp((q - s.center) / s.width));
    return v;
}

double synthetic_q_max(SyntheticElectrode kind) {
    return kind == SyntheticElectrode::lco_like ? kLcoLikeForm.q_max
                                                : kGraphiteLikeForm.q_max;
}

ElectrodeCurve synthetic_electrode(SyntheticElectrode kind, int n_points) {
    if (n_points < kMinSyntheticPoints)
        throw InvalidArgument("synthetic_electrode: n_points must be >= " +
                              std::to_string(kMinSyntheticPoints) + ", got " +
                              std::to_string(n_points));
    const double q_max = synthetic_q_max(kind);
    std::vector<double> q(n_points), v(n_points);
    for (int i = 0; i < n_points; ++i) {
        q[i] = q_max * static_cast<double>(i) / (n_points - 1);
        v[i] = synthetic_potential(kind, q[i]);
    }
    const bool pe = kind == SyntheticElectrode::lco_like;
    return ElectrodeCurve::create(pe ? Electrode::positive : Electrode::negative,
                                  std::move(q), std::move(v),
                                  pe ? "lco_like" : "graphite_like");
}

ElectrodeCurve load_electrode_csv(const std::string& path, Electrode electrode) {
    csv::Table table = csv::read_file(path, {"q_mAh_per_g", "v_volts"});
    if (table.rows.size() < kMinCurvePoints)
        throw ParseError(path + ": need >= " + std::to_string(kMinCurvePoints) +
                         " data rows, got " + std::to_string(table.rows.size()));

    std::vector<std::pair<double, double>> samples;
    samples.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        samples.emplace_back(csv::parse_double(row.fields[0], path, row.line_number),
                             csv::parse_double(row.fields[1], path, row.line_number));
    }
    std::stable_sort(samples.begin(), samples.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i].first == samples[i - 1].first)
            throw ValidationError(path + ": duplicate q value " +
                                  csv::format_double(samples[i].first));
    }

    std::vector<double> q(samples.size()), v(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        q[i] = samples[i].first;
        v[i] = samples[i].second;
    }
    return ElectrodeCurve::create(electrode, std::move(q), std::move(v), path);
}

void save_electrode_csv(const ElectrodeCurve& curve, const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(curve.q.size());
    for (std::size_t i = 0; i < curve.q.size(); ++i)
        rows.push_back({csv::format_double(curve.q[i]), csv::format_double(curve.v[i])});
    csv::write_file(path, {"q_mAh_per_g", "v_volts"}, rows);
}

ElectrodePair default_pair(int n_points) {
    ElectrodePair pair;
    pair.pe = synthetic_electrode(SyntheticElectrode::lco_like, n_points);
    pair.ne = synthetic_electrode(SyntheticElectrode::graphite_like, n_points);
    return pair;
}

}  // namespace battdiag
