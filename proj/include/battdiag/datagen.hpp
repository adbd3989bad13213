#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "battdiag/common.hpp"
#include "battdiag/electrode.hpp"
#include "battdiag/halfcell.hpp"

namespace battdiag {

enum class Fidelity { experimental_synthetic, simulation };
enum class Stage { early, late };

std::string to_string(Fidelity f);
std::string to_string(Stage s);
Fidelity fidelity_from_string(const std::string& s);
Stage stage_from_string(const std::string& s);

// One aging-test condition row: descriptive labels plus the degradation-rate
// multiplier that actually drives the synthetic trajectories.
struct GroupCondition {
    std::string label;
    std::string charge_rate;
    std::string discharge_rate;
    double temperature_c = 37.0;
    double upper_cutoff_v = 4.075;
    double rate_multiplier = 1.0;
};

// End-of-horizon trajectory depths: mass losses are fractions of the fresh
// masses, slippage drifts are fractions of the fresh lithium inventory.
struct TrajectoryRates {
    double a_p = 0.16;
    double a_n = 0.10;
    double b = 0.13;
    double c = 0.02;
};

struct AgingConfig {
    int n_groups = 6;
    int cells_per_group = 4;
    int rpt_count = 40;
    int n_early = 10;
    double sigma_meas = 0.01;         // dqdv noise as a fraction of the curve max
    double rate_jitter_sigma = 0.05;  // lognormal sigma of the per-cell rate jitter
    double horizon_days = 546.0;
    TrajectoryRates rates;
    std::vector<GroupCondition> groups;
    std::uint64_t seed = 1234;

    void validate() const;  // throws InvalidArgument
};

// Default six-group plan mirroring the aging-test condition table.
AgingConfig default_aging_config();

struct CellRecord {
    int cell_id = 0;
    int group_id = 0;
    int rpt_index = 0;
    double time_days = 0.0;
    HalfCellParams params;
    HealthParams truth;
    FeatureCurve feature;
    Fidelity fidelity = Fidelity::experimental_synthetic;
    Stage stage = Stage::early;
};

struct LabeledDataset {
    std::vector<CellRecord> records;
    static constexpr int feature_dim = kFeatureGridSize;
    static constexpr int target_dim = 4;

    // Throws ValidationError on duplicate (cell_id, rpt_index, fidelity) keys
    // or records whose feature is not on the shared grid.
    void validate() const;
};

// Synthetic multi-cell aging study: smooth per-cell degradation trajectories,
// measurement noise on the differential-capacity features, clean targets.
LabeledDataset generate_trajectories(const ElectrodePair& pair, const AgingConfig& cfg,
                                     int jobs = 1);

enum class GridMethod { latin_hypercube, factorial };

inline constexpr std::uint64_t kDefaultSimSeed = 3;
inline constexpr int kDefaultSimPoints = 784;

// Noise-free low-fidelity records sampled from a parameter box. Infeasible
// draws are redrawn; an initial infeasibility rate above 10% raises
// WidenBounds.
LabeledDataset simulate_grid(const ElectrodePair& pair, const ParamBounds& bounds,
                             int n_points,
                             GridMethod method = GridMethod::latin_hypercube,
                             std::uint64_t seed = kDefaultSimSeed, int jobs = 1);

// Fraction calibrated so the default 784-point grid yields exactly 32 records.
inline constexpr double kDefaultTopDegradationFraction = 0.0153;

// Keeps the union over the four health parameters of each parameter's
// most-degraded `fraction` of records (relative drop from the fresh
// reference). A null reference uses the fresh default cell.
LabeledDataset filter_top_degradation(const LabeledDataset& sim,
                                      double fraction = kDefaultTopDegradationFraction,
                                      const HealthParams* reference = nullptr);

struct SurrogateSample {
    HalfCellParams params;
    HealthParams truth;
    double v_peak1 = 0.0;
    double v_peak2 = 0.0;
};

// Normal perturbations of each center, the ±range envelope at three sigma;
// draws that fail to produce a valid curve with two peaks are redrawn.
std::vector<SurrogateSample> perturb_for_surrogate(
    const ElectrodePair& pair, const std::vector<HalfCellParams>& centers,
    double range_frac, int n_per_center, std::uint64_t seed, int jobs = 1);

struct FoldPlan {
    struct Fold {
        std::vector<int> test_cells;
        std::vector<int> train_cells;
    };
    std::vector<Fold> folds;
};

// Within each group, a seed-keyed shuffle assigns one cell per group to each
// fold's test set. Throws InvalidArgument when cells_per_group != k.
FoldPlan make_folds(const LabeledDataset& ds, int k = 4, std::uint64_t seed = 0);

// Record indices for one fold: training rows are early-stage records of
// training cells, test rows are late-stage records of test cells. Simulation
// records are never included.
std::vector<int> fold_train_indices(const LabeledDataset& ds, const FoldPlan::Fold& fold);
std::vector<int> fold_test_indices(const LabeledDataset& ds, const FoldPlan::Fold& fold);

// Single-file CSV serialization:
// cell_id,group_id,rpt_index,stage,fidelity,time_days,mp,mn,dp,dn,q_cell,lii,f000..f099
void save_dataset_csv(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset_csv(const std::string& path);

struct DatasetManifest {
    std::uint64_t seed = 0;
    std::string config_hash;
    int experimental = 0;
    int simulation = 0;
    int feature_dim = LabeledDataset::feature_dim;
    int target_dim = LabeledDataset::target_dim;
};

DatasetManifest make_manifest(const LabeledDataset& ds, std::uint64_t seed,
                              const std::string& config_hash);
void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Canonical config fingerprint (stable field order, full precision).
std::string config_hash(const AgingConfig& cfg);

}  // namespace battdiag
