#pragma once

#include <string>
#include <vector>

#include "battdiag/interp.hpp"

namespace battdiag {

enum class Electrode { positive, negative };

enum class SyntheticElectrode { lco_like, graphite_like };

// Half-cell pseudo-OCV curve: potential vs. specific capacity, sampled on an
// ascending q grid starting at 0, with potential non-increasing in q.
// Immutable after construction; evaluation is shape-preserving cubic with
// clamped linear extrapolation beyond either end, so queries pushed slightly
// outside the tabulated range by slippage offsets stay well-defined.
struct ElectrodeCurve {
    Electrode electrode = Electrode::positive;
    std::vector<double> q;  // mAh/g, ascending, q[0] == 0
    std::vector<double> v;  // V, non-increasing in q
    std::string label;

    // Validates the invariants above (>= 16 samples, strict q ordering,
    // finite non-increasing v) and builds the interpolant.
    static ElectrodeCurve create(Electrode electrode, std::vector<double> q,
                                 std::vector<double> v, std::string label);

    double eval(double q_query) const { return interp_(q_query); }

private:
    MonotoneCubic interp_;
};

// Potential at arbitrary specific capacity (interpolated / extrapolated).
inline double eval_potential(const ElectrodeCurve& c, double q) {
    return c.eval(q);
}

// Shape constants of the built-in analytic electrode forms. Exposed so tests
// can evaluate/differentiate the closed forms independently of the sampled
// curves. Values are tuned once so the assembled full cell shows two well
// separated differential-capacity peaks and the expected qualitative response
// to each degradation mode.
struct LcoLikeForm {
    double top = 4.31;        // V at q = 0
    double lin = 0.003;       // V per mAh/g, linear decline
    double curve_amp = 0.004; // extra slope at low q, decaying with tau
    double curve_tau = 70.0;  // mAh/g
    double dive_amp = 0.10;   // end-of-range dive depth, V
    double dive_tau = 12.0;   // mAh/g
    double q_max = 150.0;     // mAh/g
};

struct GraphiteStep {
    double amp;
    double center;
    double width;
};

struct GraphiteLikeForm {
    double base = 0.048;  // V floor
    double ramp = 0.0;    // total linear drop across the range, V
    double q_max = 350.0; // mAh/g
    // Three downhill logistic steps: an initial cliff above the usable
    // window plus two plateau shoulders inside it.
    GraphiteStep steps[3] = {{0.20, 6.0, 5.0}, {0.07, 120.0, 11.0}, {0.06, 180.0, 12.0}};
};

inline constexpr LcoLikeForm kLcoLikeForm{};
inline constexpr GraphiteLikeForm kGraphiteLikeForm{};

// Closed-form potentials behind the built-in synthetic electrodes.
double synthetic_potential(SyntheticElectrode kind, double q);
double synthetic_q_max(SyntheticElectrode kind);

// Samples the requested analytic curve on a uniform grid of n_points >= 64.
ElectrodeCurve synthetic_electrode(SyntheticElectrode kind, int n_points);

// CSV exchange format: header "q_mAh_per_g,v_volts", >= 16 data rows.
// Rows are re-sorted ascending by q; duplicate q or non-monotone v rejected.
ElectrodeCurve load_electrode_csv(const std::string& path, Electrode electrode);
void save_electrode_csv(const ElectrodeCurve& curve, const std::string& path);

// A positive/negative electrode pairing plus the nominal specific capacities
// used to convert electrode mass to capacity.
struct ElectrodePair {
    ElectrodeCurve pe;
    ElectrodeCurve ne;
    double q_spec_pe = 140.0;  // mAh/g
    double q_spec_ne = 350.0;  // mAh/g
};

// Built-in synthetic pair (layered-oxide-like PE, graphite-like NE).
ElectrodePair default_pair(int n_points = 768);

}  // namespace battdiag
