#include "battdiag/halfcell.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "battdiag/csv.hpp"
#include "battdiag/interp.hpp"
#include "battdiag/parallel.hpp"
#include "battdiag/sampling.hpp"

namespace battdiag {

namespace {

constexpr double kBisectTolV = 1e-12;     // voltage tolerance of window solves
constexpr double kMinCurveStepV = 1e-9;   // strict-decrease requirement
constexpr double kInfeasibleLoss = 1e10;  // fit penalty for unusable candidates

// Full-cell voltage in the raw capacity frame (no re-origin).
struct RawCell {
    const ElectrodePair& pair;
    const HalfCellParams& th;

    double operator()(double q_full) const {
        return pair.pe.eval((q_full - th.delta_p) / th.m_p) -
               pair.ne.eval((q_full - th.delta_n) / th.m_n);
    }
};

void check_params(const HalfCellParams& p) {
    if (!(p.m_p > 0.0) || !(p.m_n > 0.0) || !std::isfinite(p.delta_p) ||
        !std::isfinite(p.delta_n))
        throw InvalidArgument("half-cell params: masses must be positive, slippages finite");
}

void check_window(const VoltageWindow& w) {
    if (!(w.v_min < w.v_max))
        throw InvalidArgument("voltage window: v_min must be below v_max");
}

// Bisection for vc == level inside [a, b] where vc(a) >= level >= vc(b).
double bisect_crossing(const RawCell& vc, double a, double b, double level) {
    double mid = 0.5 * (a + b);
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (a + b);
        const double v = vc(mid);
        if (std::fabs(v - level) <= kBisectTolV) return mid;
        if (v > level)
            a = mid;
        else
            b = mid;
        if (b - a < 1e-13 * (1.0 + std::fabs(b))) break;
    }
    return mid;
}

struct WindowSolution {
    double q_at_vmax = 0.0;
    double q_at_vmin = 0.0;
};

// Scans the assembled curve over the union of both electrode spans, finds the
// descending branch through the window and refines both crossings. Throws
// InfeasibleParameters when the window is not bracketed.
WindowSolution solve_window(const ElectrodePair& pair, const HalfCellParams& th,
                            const VoltageWindow& window, int scan_points) {
    check_params(th);
    check_window(window);
    const RawCell vc{pair, th};

    double lo = std::min(th.delta_p, th.delta_n);
    double hi = std::max(th.delta_p + th.m_p * pair.pe.q.back(),
                         th.delta_n + th.m_n * pair.ne.q.back());
    const double pad = 0.10 * (hi - lo) + 20.0;
    lo -= pad;
    hi += pad;

    std::vector<double> qs(scan_points), vs(scan_points);
    int i_max = 0;
    for (int i = 0; i < scan_points; ++i) {
        qs[i] = lo + (hi - lo) * i / (scan_points - 1);
        vs[i] = vc(qs[i]);
        if (vs[i] > vs[i_max]) i_max = i;
    }
    if (vs[i_max] < window.v_max)
        throw InfeasibleParameters("window not bracketed: curve peaks at " +
                                   std::to_string(vs[i_max]) + " V, below v_max");

    // First v_max crossing on the descending branch from the global maximum.
    int i = i_max;
    while (i + 1 < scan_points && vs[i + 1] >= window.v_max) ++i;
    if (i + 1 >= scan_points)
        throw InfeasibleParameters("window not bracketed: curve never falls below v_max");
    WindowSolution sol;
    sol.q_at_vmax = bisect_crossing(vc, qs[i], qs[i + 1], window.v_max);

    while (i + 1 < scan_points && vs[i + 1] >= window.v_min) ++i;
    if (i + 1 >= scan_points)
        throw InfeasibleParameters("window not bracketed: curve never falls below v_min");
    sol.q_at_vmin = bisect_crossing(vc, std::max(qs[i], sol.q_at_vmax), qs[i + 1],
                                    window.v_min);
    return sol;
}

// One shared scan resolution: fit losses must see bitwise the same window
// crossings as curve construction, or a perfect candidate scores a phantom
// residual.
constexpr int kWindowScanPoints = 2048;

}  // namespace

std::vector<double> feature_grid(const VoltageWindow& window) {
    check_window(window);
    std::vector<double> grid(kFeatureGridSize);
    const double step = window.width() / (kFeatureGridSize - 1);
    for (int i = 0; i < kFeatureGridSize; ++i) grid[i] = window.v_min + step * i;
    return grid;
}

FullCellCurve reconstruct_ocv(const ElectrodePair& pair, const HalfCellParams& params,
                              const VoltageWindow& window, int n_grid) {
    if (n_grid < 100)
        throw InvalidArgument("reconstruct_ocv: n_grid must be >= 100, got " +
                              std::to_string(n_grid));
    const WindowSolution sol = solve_window(pair, params, window, kWindowScanPoints);
    const RawCell vc{pair, params};

    FullCellCurve curve;
    curve.window = window;
    curve.q.resize(n_grid);
    curve.v.resize(n_grid);
    const double span = sol.q_at_vmin - sol.q_at_vmax;
    for (int i = 0; i < n_grid; ++i) {
        const double q_raw = sol.q_at_vmax + span * i / (n_grid - 1);
        curve.q[i] = q_raw - sol.q_at_vmax;
        curve.v[i] = std::clamp(vc(q_raw), window.v_min, window.v_max);
    }
    for (int i = 0; i + 1 < n_grid; ++i) {
        if (!(curve.v[i] - curve.v[i + 1] >= kMinCurveStepV))
            throw InfeasibleParameters(
                "full-cell curve is not strictly decreasing inside the window");
    }
    return curve;
}

std::vector<double> differential_voltage(const FullCellCurve& curve) {
    const std::size_t n = curve.q.size();
    if (n < 3 || curve.v.size() != n)
        throw InvalidArgument("differential_voltage: curve needs >= 3 samples");
    std::vector<double> dv(n);
    dv[0] = (curve.v[1] - curve.v[0]) / (curve.q[1] - curve.q[0]);
    dv[n - 1] = (curve.v[n - 1] - curve.v[n - 2]) / (curve.q[n - 1] - curve.q[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i)
        dv[i] = (curve.v[i + 1] - curve.v[i - 1]) / (curve.q[i + 1] - curve.q[i - 1]);
    return dv;
}

FeatureCurve incremental_capacity(const FullCellCurve& curve) {
    const std::vector<double> dvdq = differential_voltage(curve);
    const std::size_t n = dvdq.size();

    // Reciprocal slope, attached to ascending voltages for resampling.
    std::vector<double> v_asc(n), y_asc(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = n - 1 - i;
        v_asc[i] = curve.v[j];
        y_asc[i] = -1.0 / dvdq[j];
    }
    const MonotoneCubic resample(std::move(v_asc), std::move(y_asc));

    FeatureCurve feature;
    feature.window = curve.window;
    feature.v = feature_grid(curve.window);
    feature.dqdv.resize(feature.v.size());
    for (std::size_t i = 0; i < feature.v.size(); ++i)
        feature.dqdv[i] = std::max(0.0, resample(feature.v[i]));
    return feature;
}

HealthParams health_params(const ElectrodePair& pair, const HalfCellParams& params,
                           const VoltageWindow& window, int n_grid) {
    const FullCellCurve curve = reconstruct_ocv(pair, params, window, n_grid);
    HealthParams h;
    h.q_cell = curve.q.back();
    h.m_p = params.m_p;
    h.m_n = params.m_n;
    h.lii = params.m_p * pair.q_spec_pe - (params.delta_p - params.delta_n);
    return h;
}

namespace {

struct Candidate {
    int index = 0;       // grid argmax
    double height = 0.0; // grid value
    double prominence = 0.0;
    int left_reach = 0;  // lowest index visited by the prominence walk
    int right_reach = 0;
};

double candidate_prominence(const std::vector<double>& y, Candidate& c) {
    const int n = static_cast<int>(y.size());
    double left_min = y[c.index];
    c.left_reach = c.index;
    for (int k = c.index - 1; k >= 0; --k) {
        if (y[k] > y[c.index]) break;
        left_min = std::min(left_min, y[k]);
        c.left_reach = k;
    }
    double right_min = y[c.index];
    c.right_reach = c.index;
    for (int k = c.index + 1; k < n; ++k) {
        if (y[k] > y[c.index]) break;
        right_min = std::min(right_min, y[k]);
        c.right_reach = k;
    }
    return y[c.index] - std::max(left_min, right_min);
}

}  // namespace

PeakSet detect_peaks(const FeatureCurve& feature, const PeakConfig& config) {
    const std::vector<double>& y = feature.dqdv;
    const std::vector<double>& x = feature.v;
    if (y.size() != x.size() || y.size() != kFeatureGridSize)
        throw InvalidArgument("detect_peaks: feature curve must use the fixed grid");
    if (config.min_distance < 1 || config.min_height_frac < 0.0 ||
        config.min_prominence_frac < 0.0)
        throw InvalidArgument("detect_peaks: invalid peak configuration");

    const int n = static_cast<int>(y.size());
    const double y_max = *std::max_element(y.begin(), y.end());
    PeakSet set;
    if (!(y_max > 0.0)) return set;

    // Plateau-aware interior local maxima.
    std::vector<Candidate> candidates;
    for (int i = 1; i + 1 < n;) {
        if (y[i] > y[i - 1]) {
            int j = i;
            while (j + 1 < n && y[j + 1] == y[j]) ++j;
            if (j + 1 < n && y[j + 1] < y[j]) {
                Candidate c;
                c.index = (i + j) / 2;
                c.height = y[c.index];
                candidates.push_back(c);
            }
            i = j + 1;
        } else {
            ++i;
        }
    }

    for (auto& c : candidates) c.prominence = candidate_prominence(y, c);

    std::vector<Candidate> filtered;
    for (const auto& c : candidates) {
        if (c.height >= config.min_height_frac * y_max &&
            c.prominence >= config.min_prominence_frac * y_max)
            filtered.push_back(c);
    }

    // Tallest-first greedy distance suppression.
    std::sort(filtered.begin(), filtered.end(), [](const Candidate& a, const Candidate& b) {
        if (a.height != b.height) return a.height > b.height;
        return a.index < b.index;
    });
    std::vector<Candidate> kept;
    for (const auto& c : filtered) {
        bool ok = true;
        for (const auto& k : kept) {
            if (std::abs(k.index - c.index) < config.min_distance) {
                ok = false;
                break;
            }
        }
        if (ok) kept.push_back(c);
    }

    const double dx = x[1] - x[0];
    for (const auto& c : kept) {
        Peak p;
        // Parabolic vertex through the argmax and its neighbours; shift is
        // clamped to half a grid step. Uses differences only, so a constant
        // offset of the whole curve cannot move the position.
        const double y0 = y[c.index - 1], y1 = y[c.index], y2 = y[c.index + 1];
        const double denom = y0 - 2.0 * y1 + y2;
        double shift = 0.0;
        if (std::fabs(denom) > 1e-300) shift = std::clamp(0.5 * (y0 - y2) / denom, -0.5, 0.5);
        p.v_position = x[c.index] + shift * dx;
        p.height = y1 - 0.25 * (y0 - y2) * shift;
        p.prominence = c.prominence;

        // Width at half prominence, linearly interpolated crossings.
        const double ref = y1 - 0.5 * c.prominence;
        double x_left = x[c.left_reach];
        for (int k = c.index; k > c.left_reach; --k) {
            if (y[k - 1] < ref) {
                x_left = x[k - 1] + (ref - y[k - 1]) / (y[k] - y[k - 1]) * dx;
                break;
            }
        }
        double x_right = x[c.right_reach];
        for (int k = c.index; k < c.right_reach; ++k) {
            if (y[k + 1] < ref) {
                x_right = x[k] + (y[k] - ref) / (y[k] - y[k + 1]) * dx;
                break;
            }
        }
        p.width = x_right - x_left;
        set.peaks.push_back(p);
    }

    std::sort(set.peaks.begin(), set.peaks.end(), [](const Peak& a, const Peak& b) {
        if (a.height != b.height) return a.height > b.height;
        return a.v_position < b.v_position;
    });
    return set;
}

std::pair<Peak, Peak> PeakSet::top_two() const {
    if (peaks.size() < 2)
        throw PeakDeficit("need two differential-capacity peaks, found " +
                          std::to_string(peaks.size()));
    Peak a = peaks[0], b = peaks[1];
    if (a.v_position > b.v_position) std::swap(a, b);
    return {a, b};
}

FeatureCurve single_mode_icq(const ElectrodePair& pair, const HalfCellParams& fresh,
                             DegradationMode mode, double fraction,
                             const VoltageWindow& window, int n_grid) {
    if (!(fraction >= 0.0 && fraction <= 0.9))
        throw InvalidArgument("single_mode_icq: fraction must lie in [0, 0.9]");
    HalfCellParams th = fresh;
    switch (mode) {
        case DegradationMode::lam_pe:
            th.m_p *= 1.0 - fraction;
            break;
        case DegradationMode::lam_ne:
            th.m_n *= 1.0 - fraction;
            break;
        case DegradationMode::lli: {
            const double lii_fresh =
                fresh.m_p * pair.q_spec_pe - (fresh.delta_p - fresh.delta_n);
            th.delta_p += fraction * lii_fresh;
            break;
        }
    }
    return incremental_capacity(reconstruct_ocv(pair, th, window, n_grid));
}

double window_origin(const ElectrodePair& pair, const HalfCellParams& params,
                     const VoltageWindow& window) {
    return solve_window(pair, params, window, kWindowScanPoints).q_at_vmax;
}

HalfCellParams canonicalize(const ElectrodePair& pair, const HalfCellParams& params,
                            const VoltageWindow& window) {
    const double origin = window_origin(pair, params, window);
    HalfCellParams canon = params;
    canon.delta_p -= origin;
    canon.delta_n -= origin;
    return canon;
}

// ---------------------------------------------------------------------------
// Derivative-free auto fit
// ---------------------------------------------------------------------------

namespace {

struct FitProblem {
    const ElectrodePair& pair;
    const FullCellCurve& target;
    const FitOptions& opt;
    double q_ref = 1.0;  // capacity normalisation
    mutable long long evaluations = 0;

    HalfCellParams unscale(const std::vector<double>& u) const {
        const auto& lo = opt.bounds.lo;
        const auto& hi = opt.bounds.hi;
        HalfCellParams p;
        p.m_p = lo.m_p + u[0] * (hi.m_p - lo.m_p);
        p.m_n = lo.m_n + u[1] * (hi.m_n - lo.m_n);
        p.delta_p = lo.delta_p + u[2] * (hi.delta_p - lo.delta_p);
        p.delta_n = lo.delta_n + u[3] * (hi.delta_n - lo.delta_n);
        return p;
    }

    double operator()(const std::vector<double>& u_raw) const {
        ++evaluations;
        // Clamp into the unit box; penalise the excursion so the simplex is
        // steered back instead of wandering through invalid territory.
        std::vector<double> u = u_raw;
        double penalty = 0.0;
        for (double& c : u) {
            const double clamped = std::clamp(c, 0.0, 1.0);
            penalty += (c - clamped) * (c - clamped);
            c = clamped;
        }
        const HalfCellParams th = unscale(u);

        WindowSolution sol;
        try {
            sol = solve_window(pair, th, target.window, kWindowScanPoints);
        } catch (const InfeasibleParameters&) {
            return kInfeasibleLoss;
        }

        const double cap = sol.q_at_vmin - sol.q_at_vmax;
        const double end_term = (cap - target.usable_capacity()) / q_ref;

        const RawCell vc{pair, th};
        double sq = 0.0;
        for (std::size_t i = 0; i < target.q.size(); ++i) {
            const double d = vc(target.q[i] + sol.q_at_vmax) - target.v[i];
            sq += d * d;
        }
        const double rmse = std::sqrt(sq / target.q.size());

        return opt.w_end * end_term * end_term +
               opt.w_rmse * rmse / target.window.width() + 1e3 * penalty;
    }
};

struct NmOutcome {
    std::vector<double> point;
    double loss = kInfeasibleLoss;
    long long evaluations = 0;
};

// Classic Nelder-Mead on the unit box (reflection 1, expansion 2,
// contraction 0.5, shrink 0.5).
NmOutcome nelder_mead(const FitProblem& problem, const std::vector<double>& start,
                      double init_step, int max_iters) {
    const int dim = static_cast<int>(start.size());
    const long long evals_before = problem.evaluations;

    std::vector<std::vector<double>> xs(dim + 1, start);
    for (int j = 0; j < dim; ++j) {
        // Step away from the upper bound when there is no headroom.
        if (xs[j + 1][j] + init_step <= 1.0)
            xs[j + 1][j] += init_step;
        else
            xs[j + 1][j] -= init_step;
    }
    std::vector<double> fs(dim + 1);
    for (int k = 0; k <= dim; ++k) fs[k] = problem(xs[k]);

    std::vector<int> order(dim + 1);
    auto sort_simplex = [&] {
        for (int k = 0; k <= dim; ++k) order[k] = k;
        std::sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    };

    for (int it = 0; it < max_iters; ++it) {
        sort_simplex();
        const int best = order[0], worst = order[dim], second = order[dim - 1];
        if (fs[worst] - fs[best] <= 1e-13 * (1.0 + std::fabs(fs[best]))) break;

        std::vector<double> centroid(dim, 0.0);
        for (int k = 0; k <= dim; ++k) {
            if (k == worst) continue;
            for (int j = 0; j < dim; ++j) centroid[j] += xs[k][j];
        }
        for (double& c : centroid) c /= dim;

        auto blend = [&](double t) {
            std::vector<double> p(dim);
            for (int j = 0; j < dim; ++j) p[j] = centroid[j] + t * (centroid[j] - xs[worst][j]);
            return p;
        };

        std::vector<double> xr = blend(1.0);
        const double fr = problem(xr);
        if (fr < fs[order[0]]) {
            std::vector<double> xe = blend(2.0);
            const double fe = problem(xe);
            if (fe < fr) {
                xs[worst] = std::move(xe);
                fs[worst] = fe;
            } else {
                xs[worst] = std::move(xr);
                fs[worst] = fr;
            }
        } else if (fr < fs[second]) {
            xs[worst] = std::move(xr);
            fs[worst] = fr;
        } else {
            const bool outside = fr < fs[worst];
            std::vector<double> xc = blend(outside ? 0.5 : -0.5);
            const double fc = problem(xc);
            if (fc < (outside ? fr : fs[worst])) {
                xs[worst] = std::move(xc);
                fs[worst] = fc;
            } else {
                for (int k = 0; k <= dim; ++k) {
                    if (k == best) continue;
                    for (int j = 0; j < dim; ++j)
                        xs[k][j] = xs[best][j] + 0.5 * (xs[k][j] - xs[best][j]);
                    fs[k] = problem(xs[k]);
                }
            }
        }
    }

    sort_simplex();
    NmOutcome out;
    out.point = xs[order[0]];
    out.loss = fs[order[0]];
    out.evaluations = problem.evaluations - evals_before;
    return out;
}

}  // namespace

ParamBounds default_fit_bounds() {
    // Canonical-frame box covering the synthetic aging model with headroom.
    ParamBounds b;
    b.lo = HalfCellParams{1.42, 0.80, -18.0, -76.0};
    b.hi = HalfCellParams{2.06, 1.04, -12.0, -30.0};
    return b;
}

FitResult fit_halfcell_auto(const ElectrodePair& pair, const FullCellCurve& target,
                            const FitOptions& options) {
    if (target.q.size() < 2 || target.q.size() != target.v.size())
        throw InvalidArgument("fit_halfcell_auto: target curve is empty or ragged");
    if (options.starts < 1) throw InvalidArgument("fit_halfcell_auto: starts must be >= 1");

    FitProblem problem{pair, target, options};
    try {
        const WindowSolution fresh =
            solve_window(pair, HalfCellParams{}, target.window, kWindowScanPoints);
        problem.q_ref = fresh.q_at_vmin - fresh.q_at_vmax;
    } catch (const InfeasibleParameters&) {
        problem.q_ref = target.usable_capacity();
    }

    Rng rng(options.seed);
    const std::vector<std::vector<double>> starts =
        latin_hypercube(rng, options.starts, 4);

    // Each start runs on an isolated copy of the problem so evaluation
    // counters do not race; results merge deterministically by slot.
    std::vector<NmOutcome> outcomes(options.starts);
    std::vector<long long> eval_counts(options.starts, 0);
    parallel_for(options.starts, options.jobs, [&](int s) {
        FitProblem local{pair, target, options};
        local.q_ref = problem.q_ref;
        outcomes[s] = nelder_mead(local, starts[s], 0.08, options.max_iters);
        eval_counts[s] = local.evaluations;
    });

    FitResult result;
    result.start_losses.resize(options.starts);
    int best = -1;
    for (int s = 0; s < options.starts; ++s) {
        result.start_losses[s] = outcomes[s].loss;
        result.evaluations += eval_counts[s];
        if (outcomes[s].loss < kInfeasibleLoss * 0.1) ++result.feasible_starts;
        if (best < 0 || outcomes[s].loss < outcomes[best].loss) best = s;
    }
    if (result.feasible_starts == 0)
        throw FitFailure("no feasible starting point among " +
                         std::to_string(options.starts) + " draws");

    // Polish the winner with a tight simplex.
    const NmOutcome polished =
        nelder_mead(problem, outcomes[best].point, 0.01, options.max_iters);
    result.evaluations += problem.evaluations;
    const NmOutcome& final_out =
        polished.loss <= outcomes[best].loss ? polished : outcomes[best];

    result.loss = final_out.loss;
    // The objective clamps scaled coordinates into the unit box, so points
    // beyond it are loss-equivalent to their clamped image; report the
    // in-bounds representative.
    std::vector<double> u = final_out.point;
    for (double& c : u) c = std::clamp(c, 0.0, 1.0);
    result.params = canonicalize(pair, problem.unscale(u), target.window);
    return result;
}

void save_fullcell_csv(const FullCellCurve& curve, const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(curve.q.size());
    for (std::size_t i = 0; i < curve.q.size(); ++i)
        rows.push_back({csv::format_double(curve.q[i]), csv::format_double(curve.v[i])});
    csv::write_file(path, {"q_mAh", "v_volts"}, rows);
}

FullCellCurve load_fullcell_csv(const std::string& path) {
    const csv::Table table = csv::read_file(path, {"q_mAh", "v_volts"});
    if (table.rows.size() < 2)
        throw ParseError(path + ": need >= 2 data rows, got " +
                         std::to_string(table.rows.size()));
    FullCellCurve curve;
    for (const auto& row : table.rows) {
        curve.q.push_back(csv::parse_double(row.fields[0], path, row.line_number));
        curve.v.push_back(csv::parse_double(row.fields[1], path, row.line_number));
    }
    if (curve.q.front() != 0.0)
        throw ValidationError(path + ": q must start at 0");
    for (std::size_t i = 1; i < curve.q.size(); ++i) {
        if (!(curve.q[i] > curve.q[i - 1]))
            throw ValidationError(path + ": q must be strictly increasing");
        if (!(curve.v[i] < curve.v[i - 1]))
            throw ValidationError(path + ": v must be strictly decreasing");
    }
    curve.window = VoltageWindow{curve.v.back(), curve.v.front()};
    return curve;
}

void save_feature_csv(const FeatureCurve& feature, const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(feature.v.size());
    for (std::size_t i = 0; i < feature.v.size(); ++i)
        rows.push_back(
            {csv::format_double(feature.v[i]), csv::format_double(feature.dqdv[i])});
    csv::write_file(path, {"v_volts", "dqdv_mAh_per_V"}, rows);
}

FeatureCurve load_feature_csv(const std::string& path) {
    const csv::Table table = csv::read_file(path, {"v_volts", "dqdv_mAh_per_V"});
    if (table.rows.size() != kFeatureGridSize)
        throw ParseError(path + ": feature curves carry exactly " +
                         std::to_string(kFeatureGridSize) + " rows, got " +
                         std::to_string(table.rows.size()));
    FeatureCurve feature;
    for (const auto& row : table.rows) {
        feature.v.push_back(csv::parse_double(row.fields[0], path, row.line_number));
        feature.dqdv.push_back(csv::parse_double(row.fields[1], path, row.line_number));
    }
    for (std::size_t i = 1; i < feature.v.size(); ++i) {
        if (!(feature.v[i] > feature.v[i - 1]))
            throw ValidationError(path + ": v must be strictly increasing");
    }
    for (double y : feature.dqdv) {
        if (!(y >= 0.0) || !std::isfinite(y))
            throw ValidationError(path + ": dqdv must be finite and non-negative");
    }
    feature.window = VoltageWindow{feature.v.front(), feature.v.back()};
    return feature;
}

}  // namespace battdiag
