#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <vector>

#include "battdiag/csv.hpp"
#include "battdiag/halfcell.hpp"
#include "battdiag/parallel.hpp"
#include "battdiag/sampling.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace battdiag;

namespace {

const ElectrodePair& pair_fixture() {
    static const ElectrodePair pair = default_pair();
    return pair;
}

// Test-side re-statement of the assembled full-cell voltage.
double cell_voltage(const ElectrodePair& pair, const HalfCellParams& th, double q) {
    return pair.pe.eval((q - th.delta_p) / th.m_p) -
           pair.ne.eval((q - th.delta_n) / th.m_n);
}

// Independent window solve: brute-force scan plus bisection, sharing nothing
// with the library implementation but the electrode curves themselves.
struct WindowOracle {
    double q_at_vmax = 0.0;
    double q_at_vmin = 0.0;
    double capacity() const { return q_at_vmin - q_at_vmax; }
};

WindowOracle oracle_window(const ElectrodePair& pair, const HalfCellParams& th,
                           const VoltageWindow& w = {}) {
    const double lo = std::min(th.delta_p, th.delta_n) - 60.0;
    const double hi = std::max(th.delta_p + th.m_p * pair.pe.q.back(),
                               th.delta_n + th.m_n * pair.ne.q.back()) + 60.0;
    const int n = 40000;
    std::vector<double> qs(n), vs(n);
    int i_max = 0;
    for (int i = 0; i < n; ++i) {
        qs[i] = lo + (hi - lo) * i / (n - 1);
        vs[i] = cell_voltage(pair, th, qs[i]);
        if (vs[i] > vs[i_max]) i_max = i;
    }
    REQUIRE(vs[i_max] >= w.v_max);

    auto refine = [&](double a, double b, double level) {
        for (int it = 0; it < 120; ++it) {
            const double mid = 0.5 * (a + b);
            if (cell_voltage(pair, th, mid) > level)
                a = mid;
            else
                b = mid;
        }
        return 0.5 * (a + b);
    };

    WindowOracle out;
    int i = i_max;
    while (i + 1 < n && vs[i + 1] >= w.v_max) ++i;
    REQUIRE(i + 1 < n);
    out.q_at_vmax = refine(qs[i], qs[i + 1], w.v_max);
    while (i + 1 < n && vs[i + 1] >= w.v_min) ++i;
    REQUIRE(i + 1 < n);
    out.q_at_vmin = refine(std::max(qs[i], out.q_at_vmax), qs[i + 1], w.v_min);
    return out;
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        s += 0.5 * (y[i] + y[i + 1]) * (x[i + 1] - x[i]);
    return s;
}

HalfCellParams unscale_box(const ParamBounds& b, const std::vector<double>& u) {
    HalfCellParams p;
    p.m_p = b.lo.m_p + u[0] * (b.hi.m_p - b.lo.m_p);
    p.m_n = b.lo.m_n + u[1] * (b.hi.m_n - b.lo.m_n);
    p.delta_p = b.lo.delta_p + u[2] * (b.hi.delta_p - b.lo.delta_p);
    p.delta_n = b.lo.delta_n + u[3] * (b.hi.delta_n - b.lo.delta_n);
    return p;
}

FeatureCurve make_feature(const std::vector<double>& y) {
    FeatureCurve f;
    f.window = VoltageWindow{};
    f.v = feature_grid(f.window);
    f.dqdv = y;
    return f;
}

std::vector<double> gaussian_mix(const std::vector<double>& grid,
                                 const std::vector<std::pair<double, double>>& peaks,
                                 double sigma) {
    std::vector<double> y(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (const auto& [center, height] : peaks)
            y[i] += height * std::exp(-0.5 * (grid[i] - center) * (grid[i] - center) /
                                      (sigma * sigma));
    return y;
}

HalfCellParams apply_mode(const ElectrodePair& pair, HalfCellParams th,
                          DegradationMode mode, double fraction) {
    switch (mode) {
        case DegradationMode::lam_pe:
            th.m_p *= 1.0 - fraction;
            break;
        case DegradationMode::lam_ne:
            th.m_n *= 1.0 - fraction;
            break;
        case DegradationMode::lli:
            th.delta_p +=
                fraction * (th.m_p * pair.q_spec_pe - (th.delta_p - th.delta_n));
            break;
    }
    return th;
}

}  // namespace

// ---------------------------------------------------------------------------
// Window solve and curve reconstruction
// ---------------------------------------------------------------------------

TEST_CASE("fresh-cell window agrees with a brute-force oracle") {
    const auto& pair = pair_fixture();
    const FullCellCurve curve = reconstruct_ocv(pair, HalfCellParams{});
    const WindowOracle oracle = oracle_window(pair, HalfCellParams{});
    CHECK(curve.usable_capacity() == doctest::Approx(oracle.capacity()).epsilon(1e-6));
    // Nominal capacity of the shipped synthetic pair; guards shape edits.
    CHECK(curve.usable_capacity() == doctest::Approx(294.5745).epsilon(1e-4));
}

TEST_CASE("window solve matches the oracle across random in-bounds draws") {
    const auto& pair = pair_fixture();
    const ParamBounds bounds = default_fit_bounds();
    Rng rng(2024);
    const auto draws = latin_hypercube(rng, 12, 4);
    for (const auto& u : draws) {
        const HalfCellParams th = unscale_box(bounds, u);
        const FullCellCurve curve = reconstruct_ocv(pair, th);
        const WindowOracle oracle = oracle_window(pair, th);
        CHECK(curve.usable_capacity() ==
              doctest::Approx(oracle.capacity()).epsilon(1e-6));
    }
}

TEST_CASE("reconstructed curve values match direct electrode evaluation") {
    const auto& pair = pair_fixture();
    const HalfCellParams th{1.8, 0.95, -14.0, -45.0};
    const FullCellCurve curve = reconstruct_ocv(pair, th);
    const WindowOracle oracle = oracle_window(pair, th);
    for (std::size_t i = 10; i < curve.q.size(); i += 97) {
        const double v_direct = cell_voltage(pair, th, curve.q[i] + oracle.q_at_vmax);
        CHECK(curve.v[i] == doctest::Approx(v_direct).epsilon(1e-7));
    }
}

TEST_CASE("reconstructed curve satisfies its structural invariants") {
    const auto& pair = pair_fixture();
    const VoltageWindow w{};
    const FullCellCurve curve = reconstruct_ocv(pair, HalfCellParams{}, w, 500);
    REQUIRE(curve.q.size() == 500);
    REQUIRE(curve.v.size() == 500);
    CHECK(curve.q.front() == 0.0);
    CHECK(curve.v.front() == doctest::Approx(w.v_max).epsilon(1e-9));
    CHECK(curve.v.back() == doctest::Approx(w.v_min).epsilon(1e-9));
    for (std::size_t i = 1; i < curve.q.size(); ++i) {
        CHECK(curve.q[i] > curve.q[i - 1]);
        CHECK(curve.v[i] < curve.v[i - 1]);
        CHECK(curve.v[i] >= w.v_min);
        CHECK(curve.v[i] <= w.v_max);
    }
    CHECK(curve.usable_capacity() == curve.q.back());
}

TEST_CASE("reconstruct_ocv rejects bad arguments") {
    const auto& pair = pair_fixture();
    CHECK_THROWS_AS(reconstruct_ocv(pair, HalfCellParams{}, {}, 99), InvalidArgument);
    CHECK_NOTHROW(reconstruct_ocv(pair, HalfCellParams{}, {}, 100));
    CHECK_THROWS_AS(reconstruct_ocv(pair, HalfCellParams{0.0, 1.0, 0.0, -15.0}),
                    InvalidArgument);
    CHECK_THROWS_AS(reconstruct_ocv(pair, HalfCellParams{2.0, -1.0, 0.0, -15.0}),
                    InvalidArgument);
    CHECK_THROWS_AS(reconstruct_ocv(pair, HalfCellParams{2.0, 1.0, std::nan(""), -15.0}),
                    InvalidArgument);
    CHECK_THROWS_AS(reconstruct_ocv(pair, HalfCellParams{}, VoltageWindow{4.0, 3.5}),
                    InvalidArgument);
}

TEST_CASE("parameter sets that cannot reach the window are infeasible") {
    const auto& pair = pair_fixture();
    // Negative electrode shoved far right: the curve never climbs to v_max.
    CHECK_THROWS_AS(reconstruct_ocv(pair, HalfCellParams{2.0, 1.0, 0.0, 200.0}),
                    InfeasibleParameters);
    // Window above the positive electrode's top potential.
    CHECK_THROWS_AS(reconstruct_ocv(pair, HalfCellParams{}, VoltageWindow{4.5, 4.6}),
                    InfeasibleParameters);
}

TEST_CASE("windowed curve is invariant under a common slippage shift") {
    const auto& pair = pair_fixture();
    const HalfCellParams base{1.9, 0.97, -13.5, -40.0};
    for (double shift : {-37.0, 12.5, 250.0}) {
        HalfCellParams moved = base;
        moved.delta_p += shift;
        moved.delta_n += shift;
        const FullCellCurve a = reconstruct_ocv(pair, base);
        const FullCellCurve b = reconstruct_ocv(pair, moved);
        REQUIRE(a.q.size() == b.q.size());
        for (std::size_t i = 0; i < a.q.size(); i += 13) {
            CHECK(a.q[i] == doctest::Approx(b.q[i]).epsilon(1e-9).scale(1.0));
            CHECK(a.v[i] == doctest::Approx(b.v[i]).epsilon(1e-9));
        }
        const HalfCellParams ca = canonicalize(pair, base);
        const HalfCellParams cb = canonicalize(pair, moved);
        CHECK(ca.delta_p == doctest::Approx(cb.delta_p).epsilon(1e-6).scale(1.0));
        CHECK(ca.delta_n == doctest::Approx(cb.delta_n).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("canonicalize zeroes the window origin and is idempotent") {
    const auto& pair = pair_fixture();
    const HalfCellParams raw{1.85, 0.92, 40.0, -3.0};
    const HalfCellParams canon = canonicalize(pair, raw);
    CHECK(canon.m_p == raw.m_p);
    CHECK(canon.m_n == raw.m_n);
    CHECK(std::abs(window_origin(pair, canon)) < 1e-6);
    const HalfCellParams twice = canonicalize(pair, canon);
    CHECK(twice.delta_p == doctest::Approx(canon.delta_p).epsilon(1e-9).scale(1.0));
    CHECK(twice.delta_n == doctest::Approx(canon.delta_n).epsilon(1e-9).scale(1.0));
    // The canonical frame preserves everything observable.
    CHECK(reconstruct_ocv(pair, canon).usable_capacity() ==
          doctest::Approx(reconstruct_ocv(pair, raw).usable_capacity()).epsilon(1e-9));
}

TEST_CASE("doubling masses and slippages doubles the usable capacity") {
    const auto& pair = pair_fixture();
    for (const HalfCellParams th : {HalfCellParams{2.0, 1.0, 0.0, -15.0},
                                    HalfCellParams{1.7, 0.93, -14.2, -48.0}}) {
        const HalfCellParams twice{2.0 * th.m_p, 2.0 * th.m_n, 2.0 * th.delta_p,
                                   2.0 * th.delta_n};
        const double c1 = reconstruct_ocv(pair, th).usable_capacity();
        const double c2 = reconstruct_ocv(pair, twice).usable_capacity();
        CHECK(c2 == doctest::Approx(2.0 * c1).epsilon(1e-9));
    }
}

// ---------------------------------------------------------------------------
// Health parameters
// ---------------------------------------------------------------------------

TEST_CASE("lithium inventory follows its closed formula") {
    const auto& pair = pair_fixture();
    // m_p = 2 g at 140 mAh/g with slippages 30/10 -> 280 - 20.
    const HealthParams h1 = health_params(pair, HalfCellParams{2.0, 1.0, 30.0, 10.0});
    CHECK(h1.lii == 260.0);
    CHECK(h1.m_p == 2.0);
    CHECK(h1.m_n == 1.0);

    // Equal slippages cancel exactly; needs a window the configuration can
    // reach, and a faster-filling negative electrode so its initial cliff has
    // decayed by the time the positive electrode is still near its top.
    const HealthParams h2 = health_params(pair, HalfCellParams{2.0, 1.0, -15.0, -15.0},
                                          VoltageWindow{3.5, 4.0});
    CHECK(h2.lii == 280.0);
}

TEST_CASE("health q_cell is exactly the curve endpoint") {
    const auto& pair = pair_fixture();
    const HalfCellParams th{1.75, 0.9, -14.5, -50.0};
    const HealthParams h = health_params(pair, th);
    const FullCellCurve curve = reconstruct_ocv(pair, th);
    CHECK(h.q_cell == curve.q.back());
}

// ---------------------------------------------------------------------------
// Differential curves
// ---------------------------------------------------------------------------

TEST_CASE("differential_voltage is exact on a quadratic") {
    FullCellCurve curve;
    curve.window = VoltageWindow{3.0, 4.1};
    const double a = 4.1, b = -0.01, c = -2e-5;
    for (int i = 0; i < 200; ++i) {
        const double q = 0.5 * i;
        curve.q.push_back(q);
        curve.v.push_back(a + b * q + c * q * q);
    }
    const std::vector<double> dv = differential_voltage(curve);
    REQUIRE(dv.size() == 200);
    for (std::size_t i = 1; i + 1 < dv.size(); ++i)
        CHECK(dv[i] == doctest::Approx(b + 2.0 * c * curve.q[i]).epsilon(1e-10));
    // One-sided ends equal the secant of the boundary interval.
    CHECK(dv.front() == doctest::Approx(b + c * (curve.q[0] + curve.q[1])).epsilon(1e-10));
    CHECK(dv.back() ==
          doctest::Approx(b + c * (curve.q[198] + curve.q[199])).epsilon(1e-10));
}

TEST_CASE("differential_voltage needs at least three samples") {
    FullCellCurve curve;
    curve.q = {0.0, 1.0};
    curve.v = {4.0, 3.9};
    CHECK_THROWS_AS(differential_voltage(curve), InvalidArgument);
}

TEST_CASE("incremental capacity of a linear curve is constant") {
    FullCellCurve curve;
    curve.window = VoltageWindow{3.4, 3.9};
    const double slope = 0.003;  // V per mAh
    const double q_end = curve.window.width() / slope;
    const int n = 400;
    for (int i = 0; i < n; ++i) {
        const double q = q_end * i / (n - 1);
        curve.q.push_back(q);
        curve.v.push_back(3.9 - slope * q);
    }
    const FeatureCurve feature = incremental_capacity(curve);
    REQUIRE(feature.v.size() == kFeatureGridSize);
    for (double y : feature.dqdv)
        CHECK(y == doctest::Approx(1.0 / slope).epsilon(1e-9));
}

TEST_CASE("feature grid is the fixed uniform voltage grid") {
    const VoltageWindow w{};
    const std::vector<double> grid = feature_grid(w);
    REQUIRE(grid.size() == kFeatureGridSize);
    CHECK(grid.front() == w.v_min);
    CHECK(grid.back() == doctest::Approx(w.v_max).epsilon(1e-12));
    const double step = grid[1] - grid[0];
    for (std::size_t i = 1; i < grid.size(); ++i)
        CHECK(grid[i] - grid[i - 1] == doctest::Approx(step).epsilon(1e-9));
    CHECK_THROWS_AS(feature_grid(VoltageWindow{4.0, 3.0}), InvalidArgument);
}

TEST_CASE("dqdv integrates back to the usable capacity") {
    const auto& pair = pair_fixture();

    SUBCASE("fresh cell") {
        const FullCellCurve curve = reconstruct_ocv(pair, HalfCellParams{});
        const FeatureCurve f = incremental_capacity(curve);
        CHECK(trapezoid(f.v, f.dqdv) ==
              doctest::Approx(curve.usable_capacity()).epsilon(0.01));
    }
    SUBCASE("random in-bounds draws") {
        const ParamBounds bounds = default_fit_bounds();
        Rng rng(77);
        for (const auto& u : latin_hypercube(rng, 20, 4)) {
            const HalfCellParams th = unscale_box(bounds, u);
            const FullCellCurve curve = reconstruct_ocv(pair, th);
            const FeatureCurve f = incremental_capacity(curve);
            CHECK(trapezoid(f.v, f.dqdv) ==
                  doctest::Approx(curve.usable_capacity()).epsilon(0.01));
        }
    }
}

// ---------------------------------------------------------------------------
// Peak detection
// ---------------------------------------------------------------------------

TEST_CASE("two-gaussian mix locates both centers within one grid step") {
    const std::vector<double> grid = feature_grid(VoltageWindow{});
    const double step = grid[1] - grid[0];
    const FeatureCurve f =
        make_feature(gaussian_mix(grid, {{3.60, 5.0}, {3.85, 8.0}}, 0.02));
    const PeakSet set = detect_peaks(f);
    REQUIRE(set.peaks.size() == 2);
    // Sorted by height: the 8-high peak leads.
    CHECK(set.peaks[0].height > set.peaks[1].height);
    CHECK(std::abs(set.peaks[0].v_position - 3.85) <= step);

    const auto [low, high] = set.top_two();
    CHECK(std::abs(low.v_position - 3.60) <= step);
    CHECK(std::abs(high.v_position - 3.85) <= step);
    CHECK(low.height == doctest::Approx(5.0).epsilon(0.05));
    CHECK(high.height == doctest::Approx(8.0).epsilon(0.05));
    CHECK(low.width > 0.0);
    CHECK(high.width > 0.0);
}

TEST_CASE("peak-deficient curves throw from top_two") {
    const std::vector<double> grid = feature_grid(VoltageWindow{});

    SUBCASE("single gaussian") {
        const PeakSet set =
            detect_peaks(make_feature(gaussian_mix(grid, {{3.7, 6.0}}, 0.04)));
        CHECK(set.peaks.size() == 1);
        CHECK_THROWS_AS(set.top_two(), PeakDeficit);
    }
    SUBCASE("monotone curve") {
        std::vector<double> y(grid.size());
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.1 + 0.01 * i;
        const PeakSet set = detect_peaks(make_feature(y));
        CHECK(set.peaks.empty());
        CHECK_THROWS_AS(set.top_two(), PeakDeficit);
    }
    SUBCASE("all-zero curve") {
        const PeakSet set = detect_peaks(make_feature(std::vector<double>(100, 0.0)));
        CHECK(set.peaks.empty());
        CHECK_THROWS_AS(set.top_two(), PeakDeficit);
    }
}

TEST_CASE("flat-topped peak resolves to the plateau center") {
    std::vector<double> y(100, 0.0);
    y[40] = y[41] = y[42] = y[43] = y[44] = 2.0;
    y[39] = y[45] = 1.0;
    const FeatureCurve f = make_feature(y);
    const PeakSet set = detect_peaks(f);
    REQUIRE(set.peaks.size() == 1);
    CHECK(set.peaks[0].v_position == f.v[42]);
    CHECK(set.peaks[0].height == 2.0);
}

TEST_CASE("minimum distance suppresses the smaller neighbour") {
    std::vector<double> y(100, 0.0);
    y[49] = 0.5;
    y[50] = 1.0;
    y[51] = 0.5;
    y[52] = 0.4;
    y[53] = 0.8;
    y[54] = 0.3;
    const FeatureCurve f = make_feature(y);

    PeakConfig nearcfg;
    nearcfg.min_distance = 5;
    const PeakSet suppressed = detect_peaks(f, nearcfg);
    REQUIRE(suppressed.peaks.size() == 1);
    CHECK(suppressed.peaks[0].v_position == doctest::Approx(f.v[50]).epsilon(1e-12));

    nearcfg.min_distance = 2;
    const PeakSet kept = detect_peaks(f, nearcfg);
    CHECK(kept.peaks.size() == 2);
}

TEST_CASE("equal-height peaks order by lower voltage first") {
    std::vector<double> y(100, 0.0);
    y[19] = 0.5;
    y[20] = 1.0;
    y[21] = 0.5;
    y[69] = 0.5;
    y[70] = 1.0;
    y[71] = 0.5;
    const FeatureCurve f = make_feature(y);
    const PeakSet set = detect_peaks(f);
    REQUIRE(set.peaks.size() == 2);
    CHECK(set.peaks[0].height == set.peaks[1].height);
    CHECK(set.peaks[0].v_position == f.v[20]);
    CHECK(set.peaks[1].v_position == f.v[70]);
}

TEST_CASE("height and prominence filters drop marginal candidates") {
    const std::vector<double> grid = feature_grid(VoltageWindow{});

    SUBCASE("low absolute height") {
        // 0.5 < 10% of the 8-high maximum.
        const FeatureCurve f =
            make_feature(gaussian_mix(grid, {{3.55, 0.5}, {3.85, 8.0}}, 0.02));
        const PeakSet set = detect_peaks(f);
        CHECK(set.peaks.size() == 1);
        CHECK(set.peaks[0].v_position == doctest::Approx(3.85).epsilon(0.01));
    }
    SUBCASE("tall but unprominent shoulder bump") {
        // Tent with apex 10 at index 50 plus a pimple on its flank: the bump
        // clears the height filter (8.3 > 1.0) but its contour prominence is
        // only 0.1, far below 5% of the maximum.
        std::vector<double> y(100);
        for (int i = 0; i < 100; ++i) y[i] = std::max(0.0, 10.0 - 0.2 * std::abs(i - 50));
        y[60] = 8.3;  // flank value was 8.0; neighbours are 8.2 and 7.8
        const FeatureCurve f = make_feature(y);

        const PeakSet set = detect_peaks(f);
        REQUIRE(set.peaks.size() == 1);
        CHECK(set.peaks[0].v_position == doctest::Approx(f.v[50]).epsilon(1e-9));

        PeakConfig loose;
        loose.min_prominence_frac = 0.0;
        CHECK(detect_peaks(f, loose).peaks.size() == 2);
    }
}

TEST_CASE("constant offsets do not move peak positions") {
    const std::vector<double> grid = feature_grid(VoltageWindow{});
    const std::vector<double> base = gaussian_mix(grid, {{3.60, 5.0}, {3.85, 8.0}}, 0.02);
    const PeakSet ref = detect_peaks(make_feature(base));
    REQUIRE(ref.peaks.size() == 2);
    for (double offset : {0.25, 1.0, 3.0}) {
        std::vector<double> shifted = base;
        for (double& v : shifted) v += offset;
        const PeakSet moved = detect_peaks(make_feature(shifted));
        REQUIRE(moved.peaks.size() == 2);
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(std::abs(moved.peaks[k].v_position - ref.peaks[k].v_position) <= 1e-9);
            // Prominence is offset-invariant by the contour definition.
            CHECK(moved.peaks[k].prominence ==
                  doctest::Approx(ref.peaks[k].prominence).epsilon(1e-9));
        }
    }
}

TEST_CASE("detect_peaks validates its inputs") {
    FeatureCurve wrong;
    wrong.window = VoltageWindow{};
    wrong.v = std::vector<double>(50, 3.5);
    wrong.dqdv = std::vector<double>(50, 1.0);
    CHECK_THROWS_AS(detect_peaks(wrong), InvalidArgument);

    const FeatureCurve ok = make_feature(std::vector<double>(100, 1.0));
    PeakConfig bad;
    bad.min_distance = 0;
    CHECK_THROWS_AS(detect_peaks(ok, bad), InvalidArgument);
    bad = PeakConfig{};
    bad.min_height_frac = -0.1;
    CHECK_THROWS_AS(detect_peaks(ok, bad), InvalidArgument);
}

TEST_CASE("fresh synthetic cell shows exactly two prominent peaks") {
    const auto& pair = pair_fixture();
    const FeatureCurve f =
        incremental_capacity(reconstruct_ocv(pair, HalfCellParams{}));
    const PeakSet set = detect_peaks(f);
    REQUIRE(set.peaks.size() == 2);
    const double y_max = *std::max_element(f.dqdv.begin(), f.dqdv.end());
    for (const Peak& p : set.peaks) CHECK(p.prominence > 0.10 * y_max);
    const auto [low, high] = set.top_two();
    CHECK(low.v_position < high.v_position);
}

// ---------------------------------------------------------------------------
// Single-mode degradation
// ---------------------------------------------------------------------------

TEST_CASE("zero-fraction degradation is the identity") {
    const auto& pair = pair_fixture();
    const HalfCellParams fresh{};
    const FeatureCurve ref = incremental_capacity(reconstruct_ocv(pair, fresh));
    for (DegradationMode mode :
         {DegradationMode::lam_pe, DegradationMode::lam_ne, DegradationMode::lli}) {
        const FeatureCurve f = single_mode_icq(pair, fresh, mode, 0.0);
        REQUIRE(f.dqdv.size() == ref.dqdv.size());
        for (std::size_t i = 0; i < f.dqdv.size(); ++i)
            CHECK(std::abs(f.dqdv[i] - ref.dqdv[i]) <= 1e-12);
    }
}

TEST_CASE("20% inventory loss lowers both major peaks") {
    const auto& pair = pair_fixture();
    const HalfCellParams fresh{};
    const auto [f_low, f_high] =
        detect_peaks(incremental_capacity(reconstruct_ocv(pair, fresh))).top_two();
    const auto [d_low, d_high] =
        detect_peaks(single_mode_icq(pair, fresh, DegradationMode::lli, 0.2)).top_two();
    CHECK(d_low.height < f_low.height);
    CHECK(d_high.height < f_high.height);
}

TEST_CASE("20% active-mass loss on either electrode cuts usable capacity") {
    const auto& pair = pair_fixture();
    const HalfCellParams fresh{};
    const double cap_fresh = health_params(pair, fresh).q_cell;
    for (DegradationMode mode : {DegradationMode::lam_pe, DegradationMode::lam_ne}) {
        const HalfCellParams aged = apply_mode(pair, fresh, mode, 0.2);
        CHECK(health_params(pair, aged).q_cell < cap_fresh);
    }
}

TEST_CASE("usable capacity is non-increasing along each degradation mode") {
    const auto& pair = pair_fixture();
    const HalfCellParams fresh{};
    for (DegradationMode mode :
         {DegradationMode::lam_pe, DegradationMode::lam_ne, DegradationMode::lli}) {
        double prev = health_params(pair, fresh).q_cell;
        for (int k = 1; k <= 8; ++k) {
            const double fraction = 0.05 * k;
            const HalfCellParams aged = apply_mode(pair, fresh, mode, fraction);
            const double cap = health_params(pair, aged).q_cell;
            CHECK(cap <= prev + 1e-9);
            prev = cap;
        }
    }
}

TEST_CASE("single_mode_icq rejects fractions outside [0, 0.9]") {
    const auto& pair = pair_fixture();
    CHECK_THROWS_AS(single_mode_icq(pair, HalfCellParams{}, DegradationMode::lli, -0.01),
                    InvalidArgument);
    CHECK_THROWS_AS(single_mode_icq(pair, HalfCellParams{}, DegradationMode::lli, 0.91),
                    InvalidArgument);
}

// ---------------------------------------------------------------------------
// Automatic fitting
// ---------------------------------------------------------------------------

TEST_CASE("multi-start fit recovers known parameters") {
    const auto& pair = pair_fixture();
    const ParamBounds bounds = default_fit_bounds();
    Rng rng(5150);
    const auto draws = latin_hypercube(rng, 3, 4);
    for (const auto& u : draws) {
        const HalfCellParams truth =
            canonicalize(pair, unscale_box(bounds, u));
        const FullCellCurve target = reconstruct_ocv(pair, truth);
        FitOptions opt;
        opt.seed = 99;
        const FitResult fit = fit_halfcell_auto(pair, target, opt);

        CHECK(std::abs(fit.params.m_p - truth.m_p) <= 0.02 * std::abs(truth.m_p));
        CHECK(std::abs(fit.params.m_n - truth.m_n) <= 0.02 * std::abs(truth.m_n));
        CHECK(std::abs(fit.params.delta_p - truth.delta_p) <=
              0.02 * std::abs(truth.delta_p));
        CHECK(std::abs(fit.params.delta_n - truth.delta_n) <=
              0.02 * std::abs(truth.delta_n));
        CHECK(fit.loss < 1e-6);
        CHECK(fit.feasible_starts > 0);
        CHECK(static_cast<int>(fit.start_losses.size()) == opt.starts);
        CHECK(fit.evaluations > 0);
    }
}

TEST_CASE("fit started exactly at the truth stays there") {
    const auto& pair = pair_fixture();
    const HalfCellParams truth =
        canonicalize(pair, HalfCellParams{1.82, 0.94, -14.0, -52.0});
    const FullCellCurve target = reconstruct_ocv(pair, truth);

    FitOptions opt;
    opt.starts = 1;
    opt.bounds.lo = truth;  // box collapsed onto the true point
    opt.bounds.hi = truth;
    const FitResult fit = fit_halfcell_auto(pair, target, opt);
    CHECK(fit.loss < 1e-10);
    CHECK(std::abs(fit.params.m_p - truth.m_p) <= 1e-6);
    CHECK(std::abs(fit.params.m_n - truth.m_n) <= 1e-6);
    CHECK(std::abs(fit.params.delta_p - truth.delta_p) <= 1e-6);
    CHECK(std::abs(fit.params.delta_n - truth.delta_n) <= 1e-6);
}

TEST_CASE("bounds excluding the true mass lose to the unconstrained fit") {
    const auto& pair = pair_fixture();
    const HalfCellParams truth =
        canonicalize(pair, HalfCellParams{1.95, 0.99, -13.0, -35.0});
    const FullCellCurve target = reconstruct_ocv(pair, truth);

    FitOptions good;
    good.seed = 7;
    const FitResult in_bounds = fit_halfcell_auto(pair, target, good);

    FitOptions bad = good;
    bad.bounds.hi.m_p = truth.m_p - 0.15;  // shut the box below the true m_p
    const FitResult squeezed = fit_halfcell_auto(pair, target, bad);

    CHECK(squeezed.loss > in_bounds.loss);
    CHECK(squeezed.params.m_p <= bad.bounds.hi.m_p + 1e-9);
}

TEST_CASE("fit fails cleanly when every start is infeasible") {
    const auto& pair = pair_fixture();
    const FullCellCurve target = reconstruct_ocv(pair, HalfCellParams{});
    FitOptions opt;
    opt.bounds.lo = HalfCellParams{1.42, 0.80, -800.0, -60.0};
    opt.bounds.hi = HalfCellParams{2.06, 1.04, -780.0, -30.0};
    CHECK_THROWS_AS(fit_halfcell_auto(pair, target, opt), FitFailure);
}

TEST_CASE("fit is deterministic for a fixed seed and any job count") {
    const auto& pair = pair_fixture();
    const HalfCellParams truth =
        canonicalize(pair, HalfCellParams{1.88, 0.91, -15.0, -60.0});
    const FullCellCurve target = reconstruct_ocv(pair, truth);

    FitOptions opt;
    opt.starts = 4;
    opt.max_iters = 120;
    opt.seed = 31;

    const FitResult a = fit_halfcell_auto(pair, target, opt);
    const FitResult b = fit_halfcell_auto(pair, target, opt);
    CHECK(a.loss == b.loss);
    CHECK(a.params.m_p == b.params.m_p);
    CHECK(a.params.m_n == b.params.m_n);
    CHECK(a.params.delta_p == b.params.delta_p);
    CHECK(a.params.delta_n == b.params.delta_n);
    CHECK(a.start_losses == b.start_losses);

    FitOptions threaded = opt;
    threaded.jobs = 3;
    const FitResult c = fit_halfcell_auto(pair, target, threaded);
    CHECK(c.loss == a.loss);
    CHECK(c.params.delta_n == a.params.delta_n);
    CHECK(c.start_losses == a.start_losses);
}

TEST_CASE("fit rejects malformed requests") {
    const auto& pair = pair_fixture();
    const FullCellCurve target = reconstruct_ocv(pair, HalfCellParams{});
    FitOptions opt;
    opt.starts = 0;
    CHECK_THROWS_AS(fit_halfcell_auto(pair, target, opt), InvalidArgument);
    FullCellCurve empty;
    CHECK_THROWS_AS(fit_halfcell_auto(pair, empty, FitOptions{}), InvalidArgument);
}

// ---------------------------------------------------------------------------
// CSV serialization
// ---------------------------------------------------------------------------

TEST_CASE("full-cell curve CSV round trip is bit exact") {
    TempDir tmp;
    const auto& pair = pair_fixture();
    const FullCellCurve curve = reconstruct_ocv(pair, HalfCellParams{}, {}, 300);
    const std::string path = tmp.file("curve.csv");
    save_fullcell_csv(curve, path);
    const FullCellCurve back = load_fullcell_csv(path);
    REQUIRE(back.q.size() == curve.q.size());
    for (std::size_t i = 0; i < curve.q.size(); ++i) {
        CHECK(back.q[i] == curve.q[i]);
        CHECK(back.v[i] == curve.v[i]);
    }
    CHECK(back.window.v_max == doctest::Approx(curve.window.v_max).epsilon(1e-9));
    CHECK(back.window.v_min == doctest::Approx(curve.window.v_min).epsilon(1e-9));
}

TEST_CASE("feature curve CSV round trip is bit exact") {
    TempDir tmp;
    const auto& pair = pair_fixture();
    const FeatureCurve f = incremental_capacity(reconstruct_ocv(pair, HalfCellParams{}));
    const std::string path = tmp.file("feature.csv");
    save_feature_csv(f, path);
    const FeatureCurve back = load_feature_csv(path);
    REQUIRE(back.v.size() == f.v.size());
    for (std::size_t i = 0; i < f.v.size(); ++i) {
        CHECK(back.v[i] == f.v[i]);
        CHECK(back.dqdv[i] == f.dqdv[i]);
    }
}

TEST_CASE("curve CSV loaders reject malformed files") {
    TempDir tmp;

    SUBCASE("wrong header") {
        const std::string path = tmp.file("w.csv");
        csv::write_file(path, {"q", "v"}, {{"0", "4"}, {"1", "3.9"}});
        CHECK_THROWS_AS(load_fullcell_csv(path), ParseError);
    }
    SUBCASE("non-monotone voltage") {
        const std::string path = tmp.file("m.csv");
        csv::write_file(path, {"q_mAh", "v_volts"},
                        {{"0", "4.0"}, {"1", "4.1"}, {"2", "3.9"}});
        CHECK_THROWS_AS(load_fullcell_csv(path), ValidationError);
    }
    SUBCASE("q origin missing") {
        const std::string path = tmp.file("o.csv");
        csv::write_file(path, {"q_mAh", "v_volts"}, {{"1", "4.0"}, {"2", "3.9"}});
        CHECK_THROWS_AS(load_fullcell_csv(path), ValidationError);
    }
    SUBCASE("feature curve with wrong row count") {
        const std::string path = tmp.file("f.csv");
        csv::write_file(path, {"v_volts", "dqdv_mAh_per_V"}, {{"3.4", "1"}, {"3.5", "2"}});
        CHECK_THROWS_AS(load_feature_csv(path), ParseError);
    }
    SUBCASE("negative dqdv") {
        const std::string path = tmp.file("n.csv");
        std::vector<std::vector<std::string>> rows;
        for (int i = 0; i < 100; ++i)
            rows.push_back({csv::format_double(3.4 + 0.001 * i), "1.0"});
        rows[50][1] = "-0.5";
        csv::write_file(path, {"v_volts", "dqdv_mAh_per_V"}, rows);
        CHECK_THROWS_AS(load_feature_csv(path), ValidationError);
    }
}

// ---------------------------------------------------------------------------
// Supporting utilities
// ---------------------------------------------------------------------------

TEST_CASE("latin hypercube puts one sample in every bin") {
    Rng rng(11);
    const int n = 100, d = 4;
    const auto pts = latin_hypercube(rng, n, d);
    REQUIRE(static_cast<int>(pts.size()) == n);
    for (int j = 0; j < d; ++j) {
        std::vector<bool> hit(n, false);
        for (int i = 0; i < n; ++i) {
            const double x = pts[i][j];
            REQUIRE(x >= 0.0);
            REQUIRE(x < 1.0);
            const int bin = static_cast<int>(x * n);
            CHECK_FALSE(hit[bin]);
            hit[bin] = true;
        }
    }
    // Same seed, same design.
    Rng rng2(11);
    CHECK(latin_hypercube(rng2, n, d) == pts);
}

TEST_CASE("parallel_for covers every index and propagates exceptions") {
    std::vector<std::atomic<int>> hits(257);
    for (auto& h : hits) h = 0;
    parallel_for(257, 4, [&](int i) { hits[i].fetch_add(1); });
    for (const auto& h : hits) CHECK(h.load() == 1);

    CHECK_THROWS_AS(parallel_for(100, 4,
                                 [&](int i) {
                                     if (i == 37) throw InvalidArgument("boom");
                                 }),
                    InvalidArgument);

    std::vector<double> seq(64), par(64);
    parallel_for(64, 1, [&](int i) { seq[i] = std::sqrt(1.0 + i); });
    parallel_for(64, 3, [&](int i) { par[i] = std::sqrt(1.0 + i); });
    CHECK(seq == par);
}
