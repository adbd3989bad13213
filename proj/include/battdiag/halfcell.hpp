#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "battdiag/electrode.hpp"

namespace battdiag {

// Electrode-level state of one cell: active masses (g) and slippage offsets
// (mAh). Positive slippage shifts that electrode's half-cell curve toward
// higher full-cell capacity. Defaults describe the fresh synthetic cell.
struct HalfCellParams {
    double m_p = 2.0;
    double m_n = 1.0;
    double delta_p = 0.0;
    double delta_n = -15.0;
};

struct VoltageWindow {
    double v_min = 3.4;
    double v_max = 4.075;
    double width() const { return v_max - v_min; }
};

// Usable-window slice of the reconstructed full-cell pseudo-OCV curve.
// q ascends from 0 (at v == v_max) to the usable capacity (at v == v_min);
// v is strictly decreasing.
struct FullCellCurve {
    std::vector<double> q;  // mAh
    std::vector<double> v;  // V
    VoltageWindow window;

    double usable_capacity() const { return q.back(); }
};

// Diagnostic targets: usable capacity, electrode masses, and the lithium
// inventory indicator lii = m_p * q_spec_pe - (delta_p - delta_n).
struct HealthParams {
    double q_cell = 0.0;
    double m_p = 0.0;
    double m_n = 0.0;
    double lii = 0.0;
};

inline constexpr int kFeatureGridSize = 100;

// The fixed 100-point uniform voltage grid every feature curve lives on.
std::vector<double> feature_grid(const VoltageWindow& window);

// Differential capacity dQ/dV (mAh/V, non-negative) on the fixed grid.
struct FeatureCurve {
    std::vector<double> v;
    std::vector<double> dqdv;
    VoltageWindow window;
};

struct PeakConfig {
    double min_height_frac = 0.10;      // fraction of the curve maximum
    double min_prominence_frac = 0.05;  // fraction of the curve maximum
    int min_distance = 5;               // grid points
};

struct Peak {
    double v_position = 0.0;  // V, parabolically refined around the grid argmax
    double height = 0.0;      // mAh/V
    double prominence = 0.0;  // mAh/V, contour-line definition
    double width = 0.0;       // V, at half prominence
};

struct PeakSet {
    std::vector<Peak> peaks;  // height-descending; ties broken by lower voltage

    // The two tallest peaks in ascending voltage order; throws PeakDeficit
    // if fewer than two survive the filters.
    std::pair<Peak, Peak> top_two() const;
};

enum class DegradationMode { lam_pe, lam_ne, lli };

// Assembles the full-cell curve V_p((Q-delta_p)/m_p) - V_n((Q-delta_n)/m_n),
// locates the voltage-window crossings by bisection (1e-12 V tolerance) and
// returns the window slice on an n_grid-point uniform capacity grid
// re-origined so q = 0 at v_max. Throws InfeasibleParameters when the
// parameter set cannot bracket the window.
FullCellCurve reconstruct_ocv(const ElectrodePair& pair, const HalfCellParams& params,
                              const VoltageWindow& window = {}, int n_grid = 1000);

// dV/dQ on the curve's own grid: centered differences inside, one-sided at
// the ends. All values are negative for a valid curve.
std::vector<double> differential_voltage(const FullCellCurve& curve);

// dQ/dV as the reciprocal of dV/dQ, resampled onto the fixed voltage grid.
FeatureCurve incremental_capacity(const FullCellCurve& curve);

// Usable capacity, masses and lithium inventory for one parameter set.
// q_cell is exactly the reconstructed curve's final q value.
HealthParams health_params(const ElectrodePair& pair, const HalfCellParams& params,
                           const VoltageWindow& window = {}, int n_grid = 1000);

PeakSet detect_peaks(const FeatureCurve& feature, const PeakConfig& config = {});

// Feature curve of a fresh cell degraded by a single mode:
//   lam_pe: m_p *= (1 - fraction)
//   lam_ne: m_n *= (1 - fraction)
//   lli:    delta_p += fraction * lii(fresh), holding delta_n
// fraction must lie in [0, 0.9].
FeatureCurve single_mode_icq(const ElectrodePair& pair, const HalfCellParams& fresh,
                             DegradationMode mode, double fraction,
                             const VoltageWindow& window = {}, int n_grid = 1000);

// Raw-frame capacity at which the assembled curve crosses v_max. The curve
// itself cannot distinguish parameter sets whose slippages differ by a common
// shift, so labels and fit results are expressed in the canonical frame where
// this origin is zero.
double window_origin(const ElectrodePair& pair, const HalfCellParams& params,
                     const VoltageWindow& window = {});

// Shifts both slippages by -window_origin; masses are untouched. Capacity,
// lii and the windowed curve are invariant under this re-expression.
HalfCellParams canonicalize(const ElectrodePair& pair, const HalfCellParams& params,
                            const VoltageWindow& window = {});

struct ParamBounds {
    HalfCellParams lo;
    HalfCellParams hi;
};

// Canonical-frame search box used by the auto fit and by parameter draws in
// tests. Wide enough to contain every parameter set the synthetic aging
// model produces.
ParamBounds default_fit_bounds();

struct FitOptions {
    int starts = 16;
    int max_iters = 400;
    double w_end = 1.0;   // weight of the squared endpoint-capacity mismatch
    double w_rmse = 1.0;  // weight of the voltage RMSE term
    ParamBounds bounds = default_fit_bounds();
    std::uint64_t seed = 0;
    int jobs = 1;
};

struct FitResult {
    HalfCellParams params;  // canonical frame
    double loss = 0.0;
    int feasible_starts = 0;
    std::vector<double> start_losses;  // best loss reached from each start
    long long evaluations = 0;
};

// Derivative-free recovery of half-cell parameters from a measured windowed
// curve. Loss per candidate (both residuals dimensionless):
//   w_end * ((usable capacity mismatch) / fresh capacity)^2
//   + w_rmse * (voltage RMSE over the target grid) / window width.
// Nelder-Mead from `starts` Latin-hypercube starting points; the best result
// is polished and returned in the canonical frame. Throws FitFailure when no
// start is feasible.
FitResult fit_halfcell_auto(const ElectrodePair& pair, const FullCellCurve& target,
                            const FitOptions& options = {});

// CSV exchange. Full-cell curves use header "q_mAh,v_volts"; feature curves
// use "v_volts,dqdv_mAh_per_V". Loaders rebuild the window from the stored
// endpoints and re-validate the defining invariants.
void save_fullcell_csv(const FullCellCurve& curve, const std::string& path);
FullCellCurve load_fullcell_csv(const std::string& path);
void save_feature_csv(const FeatureCurve& feature, const std::string& path);
FeatureCurve load_feature_csv(const std::string& path);

}  // namespace battdiag
