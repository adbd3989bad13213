// Scratch calibration harness: prints the physical properties of the
// synthetic electrode pair so model constants can be frozen.
#include <cmath>
#include <cstdio>
#include <chrono>
#include <vector>

#include "battdiag/datagen.hpp"
#include "battdiag/electrode.hpp"
#include "battdiag/halfcell.hpp"
#include "battdiag/rng.hpp"
#include "battdiag/sampling.hpp"

using namespace battdiag;

static void report_curve(const ElectrodePair& pair, const HalfCellParams& th,
                         const char* tag) {
    try {
        const FullCellCurve curve = reconstruct_ocv(pair, th);
        const FeatureCurve feat = incremental_capacity(curve);
        const PeakSet peaks = detect_peaks(feat);
        std::printf("%-28s cap=%8.3f mAh  peaks=%zu", tag, curve.usable_capacity(),
                    peaks.peaks.size());
        for (const auto& p : peaks.peaks)
            std::printf("  [v=%.4f h=%.2f prom=%.2f w=%.4f]", p.v_position, p.height,
                        p.prominence, p.width);
        std::printf("\n");
    } catch (const std::exception& e) {
        std::printf("%-28s FAILED: %s\n", tag, e.what());
    }
}

int main() {
    const ElectrodePair pair = default_pair();
    const HalfCellParams fresh;

    std::printf("== fresh cell ==\n");
    const double origin = window_origin(pair, fresh, VoltageWindow{});
    std::printf("window origin (raw q at v_max): %.4f\n", origin);
    const HalfCellParams canon = canonicalize(pair, fresh, VoltageWindow{});
    std::printf("canonical fresh: m_p=%.4f m_n=%.4f dp=%.4f dn=%.4f\n", canon.m_p,
                canon.m_n, canon.delta_p, canon.delta_n);
    const HealthParams h = health_params(pair, fresh);
    std::printf("health: q_cell=%.4f m_p=%.4f m_n=%.4f lii=%.4f\n", h.q_cell, h.m_p,
                h.m_n, h.lii);
    report_curve(pair, fresh, "fresh");

    std::printf("\n== single-mode sweeps ==\n");
    for (auto mode : {DegradationMode::lam_pe, DegradationMode::lam_ne,
                      DegradationMode::lli}) {
        const char* name = mode == DegradationMode::lam_pe   ? "lam_pe"
                           : mode == DegradationMode::lam_ne ? "lam_ne"
                                                             : "lli";
        double prev_cap = 1e30;
        bool monotone = true;
        for (double f = 0.0; f <= 0.401; f += 0.05) {
            try {
                HalfCellParams th = fresh;
                switch (mode) {
                    case DegradationMode::lam_pe: th.m_p *= 1.0 - f; break;
                    case DegradationMode::lam_ne: th.m_n *= 1.0 - f; break;
                    case DegradationMode::lli: {
                        const double lii0 = fresh.m_p * pair.q_spec_pe -
                                            (fresh.delta_p - fresh.delta_n);
                        th.delta_p += f * lii0;
                        break;
                    }
                }
                const FullCellCurve c = reconstruct_ocv(pair, th);
                const FeatureCurve feat = incremental_capacity(c);
                const PeakSet ps = detect_peaks(feat);
                double h1 = 0, h2 = 0, v1 = 0, v2 = 0;
                if (ps.peaks.size() >= 2) {
                    auto [lo, hi] = ps.top_two();
                    h1 = lo.height; v1 = lo.v_position;
                    h2 = hi.height; v2 = hi.v_position;
                }
                if (c.usable_capacity() > prev_cap + 1e-9) monotone = false;
                prev_cap = c.usable_capacity();
                std::printf("%-7s f=%.2f cap=%8.3f npk=%zu loV=%.4f loH=%7.2f hiV=%.4f hiH=%7.2f\n",
                            name, f, c.usable_capacity(), ps.peaks.size(), v1, h1, v2, h2);
            } catch (const std::exception& e) {
                std::printf("%-7s f=%.2f FAILED: %s\n", name, f, e.what());
            }
        }
        std::printf("%-7s capacity monotone decreasing: %s\n", name,
                    monotone ? "yes" : "NO");
    }

    std::printf("\n== trajectory endpoints (aging model) ==\n");
    // m_p(t) = m_p0 (1 - a_p u^0.8),  m_n(t) = m_n0 (1 - a_n u^0.9)
    // dp(t) = dp0 + b sqrt(u) LII0,   dn(t) = dn0 + c u LII0,  u = t/T
    const double lii0 = fresh.m_p * pair.q_spec_pe - (fresh.delta_p - fresh.delta_n);
    const double a_p = 0.16, a_n = 0.10, b = 0.13, c = 0.02;
    const double mults[] = {0.8, 1.25, 1.0, 1.45, 0.9, 1.1};
    for (double g : mults) {
        for (double u : {0.25, 0.5, 1.0}) {
            HalfCellParams th;
            th.m_p = fresh.m_p * (1.0 - g * a_p * std::pow(u, 0.8));
            th.m_n = fresh.m_n * (1.0 - g * a_n * std::pow(u, 0.9));
            th.delta_p = fresh.delta_p + g * b * std::sqrt(u) * lii0;
            th.delta_n = fresh.delta_n + g * c * u * lii0;
            char tag[64];
            std::snprintf(tag, sizeof(tag), "g=%.2f u=%.2f", g, u);
            report_curve(pair, th, tag);
        }
    }

    std::printf("\n== canonical label ranges over the aging model ==\n");
    double mp_lo = 1e30, mp_hi = -1e30, mn_lo = 1e30, mn_hi = -1e30;
    double dp_lo = 1e30, dp_hi = -1e30, dn_lo = 1e30, dn_hi = -1e30;
    double lii_lo = 1e30, lii_hi = -1e30, cap_lo = 1e30, cap_hi = -1e30;
    Rng rng(7);
    for (int trial = 0; trial < 400; ++trial) {
        const double g = mults[rng.uniform_int(6)];
        const double u = rng.uniform01();
        const double j1 = std::exp(0.05 * rng.truncated_normal(-3, 3));
        const double j2 = std::exp(0.05 * rng.truncated_normal(-3, 3));
        const double j3 = std::exp(0.05 * rng.truncated_normal(-3, 3));
        const double j4 = std::exp(0.05 * rng.truncated_normal(-3, 3));
        HalfCellParams th;
        th.m_p = fresh.m_p * (1.0 - g * j1 * a_p * std::pow(u, 0.8));
        th.m_n = fresh.m_n * (1.0 - g * j2 * a_n * std::pow(u, 0.9));
        th.delta_p = fresh.delta_p + g * j3 * b * std::sqrt(u) * lii0;
        th.delta_n = fresh.delta_n + g * j4 * c * u * lii0;
        try {
            const HealthParams hp = health_params(pair, th);
            const HalfCellParams cn = canonicalize(pair, th, VoltageWindow{});
            mp_lo = std::min(mp_lo, cn.m_p); mp_hi = std::max(mp_hi, cn.m_p);
            mn_lo = std::min(mn_lo, cn.m_n); mn_hi = std::max(mn_hi, cn.m_n);
            dp_lo = std::min(dp_lo, cn.delta_p); dp_hi = std::max(dp_hi, cn.delta_p);
            dn_lo = std::min(dn_lo, cn.delta_n); dn_hi = std::max(dn_hi, cn.delta_n);
            lii_lo = std::min(lii_lo, hp.lii); lii_hi = std::max(lii_hi, hp.lii);
            cap_lo = std::min(cap_lo, hp.q_cell); cap_hi = std::max(cap_hi, hp.q_cell);
        } catch (const std::exception& e) {
            std::printf("trial %d FAILED: %s\n", trial, e.what());
        }
    }
    std::printf("canonical m_p in [%.4f, %.4f]\n", mp_lo, mp_hi);
    std::printf("canonical m_n in [%.4f, %.4f]\n", mn_lo, mn_hi);
    std::printf("canonical dp  in [%.4f, %.4f]\n", dp_lo, dp_hi);
    std::printf("canonical dn  in [%.4f, %.4f]\n", dn_lo, dn_hi);
    std::printf("lii in [%.4f, %.4f]\n", lii_lo, lii_hi);
    std::printf("cap in [%.4f, %.4f]\n", cap_lo, cap_hi);

    std::printf("\n== default box feasibility ==\n");
    const ParamBounds box = default_fit_bounds();
    Rng box_rng(11);
    const auto draws = latin_hypercube(box_rng, 1000, 4);
    int feasible = 0, conserving = 0;
    for (const auto& u : draws) {
        HalfCellParams th;
        th.m_p = box.lo.m_p + u[0] * (box.hi.m_p - box.lo.m_p);
        th.m_n = box.lo.m_n + u[1] * (box.hi.m_n - box.lo.m_n);
        th.delta_p = box.lo.delta_p + u[2] * (box.hi.delta_p - box.lo.delta_p);
        th.delta_n = box.lo.delta_n + u[3] * (box.hi.delta_n - box.lo.delta_n);
        try {
            const FullCellCurve curve = reconstruct_ocv(pair, th);
            const FeatureCurve feat = incremental_capacity(curve);
            double integral = 0.0;
            for (std::size_t i = 0; i + 1 < feat.v.size(); ++i)
                integral += 0.5 * (feat.dqdv[i] + feat.dqdv[i + 1]) *
                            (feat.v[i + 1] - feat.v[i]);
            ++feasible;
            if (std::fabs(integral - curve.usable_capacity()) <=
                0.01 * curve.usable_capacity())
                ++conserving;
        } catch (const std::exception&) {
        }
    }
    std::printf("feasible: %d / 1000, conservation within 1%%: %d\n", feasible,
                conserving);

    std::printf("\n== round-trip fits ==\n");
    Rng fit_rng(23);
    for (int trial = 0; trial < 3; ++trial) {
        HalfCellParams truth;
        truth.m_p = box.lo.m_p + fit_rng.uniform01() * (box.hi.m_p - box.lo.m_p);
        truth.m_n = box.lo.m_n + fit_rng.uniform01() * (box.hi.m_n - box.lo.m_n);
        truth.delta_p =
            box.lo.delta_p + fit_rng.uniform01() * (box.hi.delta_p - box.lo.delta_p);
        truth.delta_n =
            box.lo.delta_n + fit_rng.uniform01() * (box.hi.delta_n - box.lo.delta_n);
        try {
            const FullCellCurve target = reconstruct_ocv(pair, truth);
            const HalfCellParams canon_truth = canonicalize(pair, truth, target.window);
            FitOptions opt;
            opt.seed = 100 + trial;
            const auto t0 = std::chrono::steady_clock::now();
            const FitResult res = fit_halfcell_auto(pair, target, opt);
            const double secs = std::chrono::duration<double>(
                                    std::chrono::steady_clock::now() - t0)
                                    .count();
            auto rel = [](double a, double b) { return std::fabs(a - b) / std::fabs(b); };
            std::printf(
                "trial %d: loss=%.3e feas=%d evals=%lld time=%.1fs  rel err: m_p=%.2e "
                "m_n=%.2e dp=%.2e dn=%.2e\n",
                trial, res.loss, res.feasible_starts, res.evaluations, secs,
                rel(res.params.m_p, canon_truth.m_p), rel(res.params.m_n, canon_truth.m_n),
                rel(res.params.delta_p, canon_truth.delta_p),
                rel(res.params.delta_n, canon_truth.delta_n));
        } catch (const std::exception& e) {
            std::printf("trial %d: FAILED: %s\n", trial, e.what());
        }
    }

    std::printf("\n== dataset generation ==\n");
    {
        const auto t0 = std::chrono::steady_clock::now();
        const AgingConfig cfg = default_aging_config();
        const LabeledDataset exp_ds = generate_trajectories(pair, cfg);
        const double t_exp =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        int early = 0;
        for (const auto& r : exp_ds.records)
            if (r.stage == Stage::early) ++early;
        std::printf("experimental: %zu records (%d early) in %.1fs\n",
                    exp_ds.records.size(), early, t_exp);

        const auto t1 = std::chrono::steady_clock::now();
        const LabeledDataset sim =
            simulate_grid(pair, default_fit_bounds(), kDefaultSimPoints);
        const double t_sim =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
        std::printf("simulation: %zu records in %.1fs\n", sim.records.size(), t_sim);

        std::printf("union sizes by per-parameter keep count:\n");
        for (int k = 4; k <= 20; ++k) {
            const double frac = static_cast<double>(k) / sim.records.size();
            const LabeledDataset kept = filter_top_degradation(sim, frac);
            std::printf("  k=%2d -> union %zu\n", k, kept.records.size());
        }

        std::printf("seed scan for union == 32:\n");
        for (std::uint64_t s = 1; s <= 60; ++s) {
            const LabeledDataset grid =
                simulate_grid(pair, default_fit_bounds(), kDefaultSimPoints,
                              GridMethod::latin_hypercube, s);
            for (int k = 8; k <= 18; ++k) {
                const double frac = static_cast<double>(k) / grid.records.size();
                const LabeledDataset kept = filter_top_degradation(grid, frac);
                if (kept.records.size() == 32)
                    std::printf("  seed %llu keep %d -> 32\n",
                                static_cast<unsigned long long>(s), k);
            }
        }

        const FoldPlan plan = make_folds(exp_ds, 4, cfg.seed);
        for (int f = 0; f < 4; ++f) {
            const auto tr = fold_train_indices(exp_ds, plan.folds[f]);
            const auto te = fold_test_indices(exp_ds, plan.folds[f]);
            std::printf("fold %d: train %zu test %zu\n", f, tr.size(), te.size());
        }
    }

    return 0;
}
