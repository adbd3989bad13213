#include "battdiag/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "battdiag/csv.hpp"
#include "battdiag/parallel.hpp"
#include "battdiag/rng.hpp"
#include "battdiag/sampling.hpp"
#include "json.hpp"

namespace battdiag {

namespace {

constexpr double kRetryDamping = 0.7;  // rate shrink factor per regeneration
constexpr int kMaxCellRetries = 3;
constexpr int kMaxRedrawAttempts = 1000;

HalfCellParams unscale_box(const ParamBounds& b, const std::vector<double>& u) {
    HalfCellParams p;
    p.m_p = b.lo.m_p + u[0] * (b.hi.m_p - b.lo.m_p);
    p.m_n = b.lo.m_n + u[1] * (b.hi.m_n - b.lo.m_n);
    p.delta_p = b.lo.delta_p + u[2] * (b.hi.delta_p - b.lo.delta_p);
    p.delta_n = b.lo.delta_n + u[3] * (b.hi.delta_n - b.lo.delta_n);
    return p;
}

HealthParams truth_from_curve(const ElectrodePair& pair, const HalfCellParams& params,
                              const FullCellCurve& curve) {
    HealthParams h;
    h.q_cell = curve.q.back();
    h.m_p = params.m_p;
    h.m_n = params.m_n;
    h.lii = params.m_p * pair.q_spec_pe - (params.delta_p - params.delta_n);
    return h;
}

}  // namespace

std::string to_string(Fidelity f) {
    return f == Fidelity::experimental_synthetic ? "experimental_synthetic" : "simulation";
}

std::string to_string(Stage s) { return s == Stage::early ? "early" : "late"; }

Fidelity fidelity_from_string(const std::string& s) {
    if (s == "experimental_synthetic") return Fidelity::experimental_synthetic;
    if (s == "simulation") return Fidelity::simulation;
    throw ParseError("unknown fidelity value: " + s);
}

Stage stage_from_string(const std::string& s) {
    if (s == "early") return Stage::early;
    if (s == "late") return Stage::late;
    throw ParseError("unknown stage value: " + s);
}

void AgingConfig::validate() const {
    if (n_groups < 1 || cells_per_group < 1)
        throw InvalidArgument("aging config: group layout must be positive");
    if (rpt_count < 15)
        throw InvalidArgument("aging config: rpt_count must be at least 15, got " +
                              std::to_string(rpt_count));
    if (n_early < 1 || n_early >= rpt_count)
        throw InvalidArgument("aging config: n_early must lie in [1, rpt_count)");
    if (static_cast<int>(groups.size()) != n_groups)
        throw InvalidArgument("aging config: expected " + std::to_string(n_groups) +
                              " group conditions, got " + std::to_string(groups.size()));
    for (const auto& g : groups)
        if (!(g.rate_multiplier > 0.0))
            throw InvalidArgument("aging config: rate multipliers must be positive");
    if (sigma_meas < 0.0 || rate_jitter_sigma < 0.0)
        throw InvalidArgument("aging config: noise levels must be non-negative");
    if (!(rates.a_p > 0.0) || !(rates.a_n > 0.0) || !(rates.b > 0.0) || !(rates.c > 0.0))
        throw InvalidArgument("aging config: trajectory rates must be positive");
    if (!(horizon_days > 0.0))
        throw InvalidArgument("aging config: horizon must be positive");
}

AgingConfig default_aging_config() {
    AgingConfig cfg;
    cfg.groups = {
        {"G1", "C/3", "C/24", 37.0, 4.075, 0.80},
        {"G2", "C/3", "C/24", 55.0, 4.075, 1.25},
        {"G3", "C/3", "C/3", 37.0, 4.075, 1.00},
        {"G4", "C/3", "C/3", 55.0, 4.075, 1.45},
        {"G5", "C/3", "C/10", 37.0, 4.075, 0.90},
        {"G6", "C/3", "C/24", 37.0, 4.175, 1.10},
    };
    return cfg;
}

void LabeledDataset::validate() const {
    std::vector<std::tuple<int, int, int>> keys;
    keys.reserve(records.size());
    for (const auto& r : records) {
        keys.emplace_back(r.cell_id, r.rpt_index, static_cast<int>(r.fidelity));
        if (static_cast<int>(r.feature.dqdv.size()) != feature_dim ||
            r.feature.v.size() != r.feature.dqdv.size())
            throw ValidationError("dataset: record feature is not on the shared grid");
        if (!records.empty() && r.feature.v != records.front().feature.v)
            throw ValidationError("dataset: records use different voltage grids");
    }
    std::sort(keys.begin(), keys.end());
    if (std::adjacent_find(keys.begin(), keys.end()) != keys.end())
        throw ValidationError("dataset: duplicate (cell_id, rpt_index, fidelity) key");
}

LabeledDataset generate_trajectories(const ElectrodePair& pair, const AgingConfig& cfg,
                                     int jobs) {
    cfg.validate();
    const int n_cells = cfg.n_groups * cfg.cells_per_group;
    const HalfCellParams fresh;
    const double lii0 = fresh.m_p * pair.q_spec_pe - (fresh.delta_p - fresh.delta_n);
    const Rng root(cfg.seed);

    std::vector<std::vector<CellRecord>> per_cell(n_cells);
    parallel_for(n_cells, jobs, [&](int cell_id) {
        const int group = cell_id / cfg.cells_per_group;
        const double mult = cfg.groups[group].rate_multiplier;
        const Rng cell_root = root.derive(1000 + cell_id);

        std::string last_error = "none";
        for (int attempt = 0; attempt <= kMaxCellRetries; ++attempt) {
            Rng rng = cell_root.derive(attempt);
            const double damp = std::pow(kRetryDamping, attempt);
            const double sigma = cfg.rate_jitter_sigma;
            const double a_p =
                cfg.rates.a_p * mult * damp * std::exp(sigma * rng.truncated_normal(-3, 3));
            const double a_n =
                cfg.rates.a_n * mult * damp * std::exp(sigma * rng.truncated_normal(-3, 3));
            const double b =
                cfg.rates.b * mult * damp * std::exp(sigma * rng.truncated_normal(-3, 3));
            const double c =
                cfg.rates.c * mult * damp * std::exp(sigma * rng.truncated_normal(-3, 3));

            std::vector<CellRecord> cell_records;
            cell_records.reserve(cfg.rpt_count);
            try {
                for (int i = 0; i < cfg.rpt_count; ++i) {
                    const double u = static_cast<double>(i) / (cfg.rpt_count - 1);
                    CellRecord rec;
                    rec.cell_id = cell_id;
                    rec.group_id = group;
                    rec.rpt_index = i;
                    rec.time_days = cfg.horizon_days * u;
                    rec.params.m_p = fresh.m_p * (1.0 - a_p * std::pow(u, 0.8));
                    rec.params.m_n = fresh.m_n * (1.0 - a_n * std::pow(u, 0.9));
                    rec.params.delta_p = fresh.delta_p + b * std::sqrt(u) * lii0;
                    rec.params.delta_n = fresh.delta_n + c * u * lii0;
                    rec.fidelity = Fidelity::experimental_synthetic;
                    rec.stage = i < cfg.n_early ? Stage::early : Stage::late;

                    const FullCellCurve curve = reconstruct_ocv(pair, rec.params);
                    rec.truth = truth_from_curve(pair, rec.params, curve);
                    rec.feature = incremental_capacity(curve);
                    const double y_max =
                        *std::max_element(rec.feature.dqdv.begin(), rec.feature.dqdv.end());
                    for (double& y : rec.feature.dqdv)
                        y += cfg.sigma_meas * y_max * rng.normal();
                    cell_records.push_back(std::move(rec));
                }
            } catch (const InfeasibleParameters& e) {
                last_error = e.what();
                continue;  // damp the rates and regenerate this cell
            }
            per_cell[cell_id] = std::move(cell_records);
            return;
        }
        throw GenerationError("cell " + std::to_string(cell_id) + " stayed infeasible after " +
                              std::to_string(kMaxCellRetries) + " damped retries: " +
                              last_error);
    });

    LabeledDataset ds;
    ds.records.reserve(static_cast<std::size_t>(n_cells) * cfg.rpt_count);
    for (auto& cell : per_cell)
        for (auto& rec : cell) ds.records.push_back(std::move(rec));
    ds.validate();
    return ds;
}

LabeledDataset simulate_grid(const ElectrodePair& pair, const ParamBounds& bounds,
                             int n_points, GridMethod method, std::uint64_t seed,
                             int jobs) {
    if (n_points < 1) throw InvalidArgument("simulation grid: n_points must be >= 1");

    Rng root(seed);
    std::vector<HalfCellParams> draws;
    draws.reserve(n_points);
    if (method == GridMethod::latin_hypercube) {
        for (const auto& u : latin_hypercube(root, n_points, 4))
            draws.push_back(unscale_box(bounds, u));
    } else {
        const int k = static_cast<int>(std::llround(std::pow(n_points, 0.25)));
        if (k * k * k * k != n_points)
            throw InvalidArgument(
                "factorial grid: n_points must be a fourth power, got " +
                std::to_string(n_points));
        auto axis = [&](double lo, double hi, int i) {
            return k == 1 ? lo : lo + (hi - lo) * i / (k - 1);
        };
        for (int i0 = 0; i0 < k; ++i0)
            for (int i1 = 0; i1 < k; ++i1)
                for (int i2 = 0; i2 < k; ++i2)
                    for (int i3 = 0; i3 < k; ++i3) {
                        HalfCellParams p;
                        p.m_p = axis(bounds.lo.m_p, bounds.hi.m_p, i0);
                        p.m_n = axis(bounds.lo.m_n, bounds.hi.m_n, i1);
                        p.delta_p = axis(bounds.lo.delta_p, bounds.hi.delta_p, i2);
                        p.delta_n = axis(bounds.lo.delta_n, bounds.hi.delta_n, i3);
                        draws.push_back(p);
                    }
    }

    // First pass in parallel; failed slots are redrawn serially afterwards.
    std::vector<CellRecord> records(n_points);
    std::vector<char> ok(n_points, 0);
    auto build = [&](int idx, const HalfCellParams& p) {
        CellRecord rec;
        rec.cell_id = -1;
        rec.group_id = -1;
        rec.rpt_index = idx;
        rec.params = p;
        rec.fidelity = Fidelity::simulation;
        rec.stage = Stage::late;
        const FullCellCurve curve = reconstruct_ocv(pair, p);
        rec.truth = truth_from_curve(pair, p, curve);
        rec.feature = incremental_capacity(curve);
        return rec;
    };
    parallel_for(n_points, jobs, [&](int i) {
        try {
            records[i] = build(i, draws[i]);
            ok[i] = 1;
        } catch (const InfeasibleParameters&) {
        }
    });

    const int infeasible = n_points - static_cast<int>(std::count(ok.begin(), ok.end(), 1));
    if (infeasible > 0.10 * n_points)
        throw WidenBounds("simulation grid: " + std::to_string(infeasible) + " of " +
                          std::to_string(n_points) +
                          " draws infeasible (>10%); widen the parameter bounds");

    Rng redraw = root.derive(0x52);
    for (int i = 0; i < n_points; ++i) {
        if (ok[i]) continue;
        bool fixed = false;
        for (int att = 0; att < kMaxRedrawAttempts && !fixed; ++att) {
            std::vector<double> u = {redraw.uniform01(), redraw.uniform01(),
                                     redraw.uniform01(), redraw.uniform01()};
            try {
                records[i] = build(i, unscale_box(bounds, u));
                fixed = true;
            } catch (const InfeasibleParameters&) {
            }
        }
        if (!fixed)
            throw WidenBounds("simulation grid: could not redraw a feasible point");
    }

    LabeledDataset ds;
    ds.records = std::move(records);
    ds.validate();
    return ds;
}

LabeledDataset filter_top_degradation(const LabeledDataset& sim, double fraction,
                                      const HealthParams* reference) {
    if (sim.records.empty()) throw InvalidArgument("degradation filter: empty dataset");
    if (fraction < 0.0 || fraction > 1.0)
        throw InvalidArgument("degradation filter: fraction must lie in [0, 1]");

    HealthParams ref;
    if (reference) {
        ref = *reference;
    } else {
        static const HealthParams fresh_ref =
            health_params(default_pair(), HalfCellParams{});
        ref = fresh_ref;
    }

    const int n = static_cast<int>(sim.records.size());
    const int keep = static_cast<int>(std::llround(fraction * n));
    std::vector<char> selected(n, 0);

    auto mark_top = [&](auto depth) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return depth(a) > depth(b); });
        for (int i = 0; i < keep; ++i) selected[order[i]] = 1;
    };
    mark_top([&](int i) { return (ref.m_p - sim.records[i].truth.m_p) / ref.m_p; });
    mark_top([&](int i) { return (ref.m_n - sim.records[i].truth.m_n) / ref.m_n; });
    mark_top([&](int i) { return (ref.q_cell - sim.records[i].truth.q_cell) / ref.q_cell; });
    mark_top([&](int i) { return (ref.lii - sim.records[i].truth.lii) / ref.lii; });

    LabeledDataset out;
    for (int i = 0; i < n; ++i)
        if (selected[i]) out.records.push_back(sim.records[i]);
    return out;
}

std::vector<SurrogateSample> perturb_for_surrogate(
    const ElectrodePair& pair, const std::vector<HalfCellParams>& centers,
    double range_frac, int n_per_center, std::uint64_t seed, int jobs) {
    if (n_per_center < 1)
        throw InvalidArgument("surrogate perturbation: n_per_center must be >= 1");
    if (range_frac < 0.0)
        throw InvalidArgument("surrogate perturbation: range must be non-negative");

    const int n_centers = static_cast<int>(centers.size());
    const Rng root(seed);
    std::vector<std::vector<SurrogateSample>> per_center(n_centers);

    parallel_for(n_centers, jobs, [&](int ci) {
        Rng rng = root.derive(0x9000 + ci);
        std::vector<SurrogateSample> samples;
        samples.reserve(n_per_center);
        while (static_cast<int>(samples.size()) < n_per_center) {
            bool done = false;
            for (int att = 0; att < kMaxRedrawAttempts && !done; ++att) {
                SurrogateSample s;
                const auto& c = centers[ci];
                s.params.m_p = c.m_p * (1.0 + range_frac * rng.truncated_normal(-3, 3) / 3.0);
                s.params.m_n = c.m_n * (1.0 + range_frac * rng.truncated_normal(-3, 3) / 3.0);
                s.params.delta_p =
                    c.delta_p * (1.0 + range_frac * rng.truncated_normal(-3, 3) / 3.0);
                s.params.delta_n =
                    c.delta_n * (1.0 + range_frac * rng.truncated_normal(-3, 3) / 3.0);
                try {
                    const FullCellCurve curve = reconstruct_ocv(pair, s.params);
                    const auto [p1, p2] =
                        detect_peaks(incremental_capacity(curve)).top_two();
                    s.truth = truth_from_curve(pair, s.params, curve);
                    s.v_peak1 = p1.v_position;
                    s.v_peak2 = p2.v_position;
                    samples.push_back(s);
                    done = true;
                } catch (const InfeasibleParameters&) {
                } catch (const PeakDeficit&) {
                }
            }
            if (!done)
                throw GenerationError("surrogate perturbation: center " +
                                      std::to_string(ci) + " keeps drawing invalid cells");
        }
        per_center[ci] = std::move(samples);
    });

    std::vector<SurrogateSample> out;
    out.reserve(static_cast<std::size_t>(n_centers) * n_per_center);
    for (auto& block : per_center)
        for (auto& s : block) out.push_back(std::move(s));
    return out;
}

FoldPlan make_folds(const LabeledDataset& ds, int k, std::uint64_t seed) {
    if (k < 1) throw InvalidArgument("fold plan: k must be positive");

    // group -> sorted unique experimental cell ids
    std::vector<std::pair<int, int>> group_cells;  // (group, cell)
    for (const auto& r : ds.records)
        if (r.fidelity == Fidelity::experimental_synthetic)
            group_cells.emplace_back(r.group_id, r.cell_id);
    std::sort(group_cells.begin(), group_cells.end());
    group_cells.erase(std::unique(group_cells.begin(), group_cells.end()),
                      group_cells.end());
    if (group_cells.empty())
        throw InvalidArgument("fold plan: dataset has no experimental cells");

    std::vector<int> groups;
    for (const auto& [g, c] : group_cells)
        if (groups.empty() || groups.back() != g) groups.push_back(g);

    const Rng root(seed);
    std::vector<std::vector<int>> shuffled(groups.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        std::vector<int> cells;
        for (const auto& [g, c] : group_cells)
            if (g == groups[gi]) cells.push_back(c);
        if (static_cast<int>(cells.size()) != k)
            throw InvalidArgument("fold plan: group " + std::to_string(groups[gi]) +
                                  " has " + std::to_string(cells.size()) +
                                  " cells, need exactly " + std::to_string(k));
        Rng rng = root.derive(100 + groups[gi]);
        rng.shuffle(cells);
        shuffled[gi] = std::move(cells);
    }

    FoldPlan plan;
    plan.folds.resize(k);
    for (int f = 0; f < k; ++f) {
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            plan.folds[f].test_cells.push_back(shuffled[gi][f]);
            for (int j = 0; j < k; ++j)
                if (j != f) plan.folds[f].train_cells.push_back(shuffled[gi][j]);
        }
        std::sort(plan.folds[f].test_cells.begin(), plan.folds[f].test_cells.end());
        std::sort(plan.folds[f].train_cells.begin(), plan.folds[f].train_cells.end());
    }
    return plan;
}

namespace {

std::vector<int> fold_indices(const LabeledDataset& ds, const std::vector<int>& cells,
                              Stage stage) {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(ds.records.size()); ++i) {
        const auto& r = ds.records[i];
        if (r.fidelity != Fidelity::experimental_synthetic) continue;
        if (r.stage != stage) continue;
        if (std::binary_search(cells.begin(), cells.end(), r.cell_id)) idx.push_back(i);
    }
    return idx;
}

}  // namespace

std::vector<int> fold_train_indices(const LabeledDataset& ds, const FoldPlan::Fold& fold) {
    return fold_indices(ds, fold.train_cells, Stage::early);
}

std::vector<int> fold_test_indices(const LabeledDataset& ds, const FoldPlan::Fold& fold) {
    return fold_indices(ds, fold.test_cells, Stage::late);
}

namespace {

std::vector<std::string> dataset_header() {
    std::vector<std::string> h = {"cell_id", "group_id", "rpt_index", "stage",
                                  "fidelity", "time_days", "mp", "mn", "dp", "dn",
                                  "q_cell", "lii"};
    char buf[8];
    for (int i = 0; i < LabeledDataset::feature_dim; ++i) {
        std::snprintf(buf, sizeof(buf), "f%03d", i);
        h.emplace_back(buf);
    }
    return h;
}

}  // namespace

void save_dataset_csv(const LabeledDataset& ds, const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(ds.records.size());
    for (const auto& r : ds.records) {
        std::vector<std::string> row = {std::to_string(r.cell_id),
                                        std::to_string(r.group_id),
                                        std::to_string(r.rpt_index),
                                        to_string(r.stage),
                                        to_string(r.fidelity),
                                        csv::format_double(r.time_days),
                                        csv::format_double(r.params.m_p),
                                        csv::format_double(r.params.m_n),
                                        csv::format_double(r.params.delta_p),
                                        csv::format_double(r.params.delta_n),
                                        csv::format_double(r.truth.q_cell),
                                        csv::format_double(r.truth.lii)};
        for (double y : r.feature.dqdv) row.push_back(csv::format_double(y));
        rows.push_back(std::move(row));
    }
    csv::write_file(path, dataset_header(), rows);
}

LabeledDataset load_dataset_csv(const std::string& path) {
    const csv::Table table = csv::read_file(path, dataset_header());
    const std::vector<double> grid = feature_grid(VoltageWindow{});
    LabeledDataset ds;
    ds.records.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        const auto& f = row.fields;
        const int ln = row.line_number;
        CellRecord r;
        r.cell_id = static_cast<int>(csv::parse_int(f[0], path, ln));
        r.group_id = static_cast<int>(csv::parse_int(f[1], path, ln));
        r.rpt_index = static_cast<int>(csv::parse_int(f[2], path, ln));
        r.stage = stage_from_string(f[3]);
        r.fidelity = fidelity_from_string(f[4]);
        r.time_days = csv::parse_double(f[5], path, ln);
        r.params.m_p = csv::parse_double(f[6], path, ln);
        r.params.m_n = csv::parse_double(f[7], path, ln);
        r.params.delta_p = csv::parse_double(f[8], path, ln);
        r.params.delta_n = csv::parse_double(f[9], path, ln);
        r.truth.q_cell = csv::parse_double(f[10], path, ln);
        r.truth.lii = csv::parse_double(f[11], path, ln);
        r.truth.m_p = r.params.m_p;
        r.truth.m_n = r.params.m_n;
        r.feature.v = grid;
        r.feature.window = VoltageWindow{};
        r.feature.dqdv.resize(LabeledDataset::feature_dim);
        for (int i = 0; i < LabeledDataset::feature_dim; ++i)
            r.feature.dqdv[i] = csv::parse_double(f[12 + i], path, ln);
        ds.records.push_back(std::move(r));
    }
    ds.validate();
    return ds;
}

DatasetManifest make_manifest(const LabeledDataset& ds, std::uint64_t seed,
                              const std::string& cfg_hash) {
    DatasetManifest m;
    m.seed = seed;
    m.config_hash = cfg_hash;
    for (const auto& r : ds.records)
        (r.fidelity == Fidelity::experimental_synthetic ? m.experimental : m.simulation)++;
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    nlohmann::json j;
    j["seed"] = m.seed;
    j["config_hash"] = m.config_hash;
    j["experimental"] = m.experimental;
    j["simulation"] = m.simulation;
    j["feature_dim"] = m.feature_dim;
    j["target_dim"] = m.target_dim;
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read manifest: " + path);
    nlohmann::json j;
    try {
        in >> j;
        DatasetManifest m;
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.experimental = j.at("experimental").get<int>();
        m.simulation = j.at("simulation").get<int>();
        m.feature_dim = j.at("feature_dim").get<int>();
        m.target_dim = j.at("target_dim").get<int>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("manifest " + path + ": " + e.what());
    }
}

std::string config_hash(const AgingConfig& cfg) {
    std::ostringstream s;
    s << cfg.n_groups << "|" << cfg.cells_per_group << "|" << cfg.rpt_count << "|"
      << cfg.n_early << "|" << csv::format_double(cfg.sigma_meas) << "|"
      << csv::format_double(cfg.rate_jitter_sigma) << "|"
      << csv::format_double(cfg.horizon_days) << "|" << csv::format_double(cfg.rates.a_p)
      << "|" << csv::format_double(cfg.rates.a_n) << "|" << csv::format_double(cfg.rates.b)
      << "|" << csv::format_double(cfg.rates.c) << "|" << cfg.seed;
    for (const auto& g : cfg.groups)
        s << "|" << g.label << "," << g.charge_rate << "," << g.discharge_rate << ","
          << csv::format_double(g.temperature_c) << ","
          << csv::format_double(g.upper_cutoff_v) << ","
          << csv::format_double(g.rate_multiplier);
    const std::uint64_t h = fnv1a64(s.str());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace battdiag
