#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "battdiag/datagen.hpp"
#include "battdiag/electrode.hpp"
#include "battdiag/halfcell.hpp"
#include "battdiag/learners.hpp"

namespace battdiag {

// ---------------------------------------------------------------------------
// Dataset views
//
// Every learning method consumes records as plain matrices. Column orders are
// fixed project-wide:
//   features: the 100 dQ/dV grid values, one record per row
//   targets:  (q_cell, m_p, m_n, lii)
//   params:   (m_p, m_n, delta_p, delta_n)
// ---------------------------------------------------------------------------

Eigen::MatrixXd feature_matrix(const LabeledDataset& ds);
Eigen::MatrixXd feature_matrix(const LabeledDataset& ds, const std::vector<int>& rows);
Eigen::MatrixXd target_matrix(const LabeledDataset& ds);
Eigen::MatrixXd target_matrix(const LabeledDataset& ds, const std::vector<int>& rows);
Eigen::MatrixXd param_matrix(const LabeledDataset& ds);
Eigen::MatrixXd param_matrix(const LabeledDataset& ds, const std::vector<int>& rows);

// One feature curve as a 100-wide row; throws InvalidArgument off-grid.
Eigen::RowVectorXd feature_row(const FeatureCurve& feature);

// (q_cell, m_p, m_n, lii) row <-> struct.
Eigen::RowVectorXd target_row(const HealthParams& h);
HealthParams health_from_row(const Eigen::RowVectorXd& row);

// Records selected by index / two datasets merged (re-validated).
LabeledDataset dataset_subset(const LabeledDataset& ds, const std::vector<int>& rows);
LabeledDataset dataset_concat(const LabeledDataset& a, const LabeledDataset& b);

// ---------------------------------------------------------------------------
// Half-cell surrogate
//
// A small dense net standing in for the exact curve-reconstruction model
// inside gradient-based training: (m_p, m_n, delta_p, delta_n) ->
// (q_cell, lii, v_peak1, v_peak2), with the two peak positions in ascending
// voltage order. Training samples are normal perturbations of caller-chosen
// center parameter sets; the fit is accepted only when the worst held-out
// relative residual over all four outputs stays below `max_rel_residual`,
// retrying with twice the samples (and a fresh init) up to `attempts` times
// before throwing SurrogateAccuracy.
// ---------------------------------------------------------------------------

struct SurrogateControl {
    double range_frac = 0.15;      // perturbation envelope around each center
    int n_per_center = 64;         // samples drawn per center (doubled per retry)
    double holdout_fraction = 0.2; // residual-audit split
    double max_rel_residual = 0.005;
    int attempts = 3;              // total tries including the first
    std::vector<int> hidden = {32, 32};
    TrainControl train{0.01, 3000, 200, 3000, 0.15, 0};
    std::uint64_t seed = 101;      // drives sampling, init and shuffling

    void validate() const;  // throws InvalidArgument
};

struct SurrogateReport {
    int samples = 0;            // training + held-out rows of the accepted fit
    int holdout = 0;
    int attempts = 0;           // tries consumed (1 = first fit accepted)
    double max_rel_residual = 0.0;
};

struct SurrogateHc {
    DenseNet net;              // [4, hidden..., 4]
    SurrogateReport report;
    Eigen::VectorXd in_lo, in_hi;  // per-dimension envelope seen in training

    // Raw params (n x 4) -> raw (q_cell, lii, v_peak1, v_peak2) (n x 4).
    Eigen::MatrixXd eval(const Eigen::MatrixXd& params_raw) const;
    Eigen::Vector4d eval_one(const HalfCellParams& p) const;

    // True when any component of p falls outside the envelope the net was
    // trained on; such queries carry no accuracy guarantee.
    bool extrapolating(const HalfCellParams& p) const;
};

SurrogateHc train_surrogate(const ElectrodePair& pair,
                            const std::vector<HalfCellParams>& centers,
                            const SurrogateControl& control = {});

std::string surrogate_to_json(const SurrogateHc& s);
SurrogateHc surrogate_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Physics-guided network
//
// The core net maps a feature curve to the four half-cell parameters. Its
// training loss combines three standardized mean-squared terms:
//   L1: predicted vs. true half-cell parameters
//   L2: surrogate-mapped (q_cell, lii) vs. truth
//   L3: surrogate-mapped peak positions vs. the truth curve's two tallest
//       peaks (paired ascending by voltage; rows whose truth curve lacks two
//       peaks are excluded from this term)
// combined as L1 + lambda1*L2 + lambda2*L3. Weights are interchangeable with
// normalized ratios r_i = w_i / (w_1+w_2+w_3) where w = (1, lambda1, lambda2).
// ---------------------------------------------------------------------------

struct PinnWeights {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
};

struct PinnRatios {
    double r1 = 1.0 / 3.0;
    double r2 = 1.0 / 3.0;
    double r3 = 1.0 / 3.0;
};

// r = (1, l1, l2) / (1 + l1 + l2); inverse requires r1 > 0. Both directions
// validate non-negativity and finiteness.
PinnRatios ratios_from_weights(const PinnWeights& w);
PinnWeights weights_from_ratios(const PinnRatios& r);

struct PinnLossTerms {
    double l1 = 0.0;
    double l2 = 0.0;
    double l3 = 0.0;
    int l3_rows = 0;  // rows that carried a usable peak pair

    double total(const PinnWeights& w) const { return l1 + w.lambda1 * l2 + w.lambda2 * l3; }
};

// Precomputed training tensors. Peaks come from each record's noise-free
// reconstructed curve, not its stored (possibly noisy) feature; rows whose
// reconstruction lacks two detectable peaks have has_peaks = 0 and zeros in
// `peaks`. The standardizers for the auxiliary and peak terms are fit here,
// over all rows (aux) and peak-carrying rows (peaks), with each scale floored
// at the column's |mean| so a standardized residual never exceeds the
// relative residual (peak voltages spread by ~1% of their magnitude and
// would otherwise dominate the combined loss through measurement-level
// surrogate error alone).
struct PinnData {
    Eigen::MatrixXd x;       // n x 100 raw features
    Eigen::MatrixXd theta;   // n x 4 true half-cell params
    Eigen::MatrixXd aux;     // n x 2 true (q_cell, lii)
    Eigen::MatrixXd peaks;   // n x 2 true (v_peak1, v_peak2)
    std::vector<char> has_peaks;
    Standardizer aux_std;
    Standardizer peak_std;

    int rows() const { return static_cast<int>(x.rows()); }
};

PinnData prepare_pinn_data(const ElectrodePair& pair, const LabeledDataset& train);

// Pure loss evaluation for a batch of predicted raw half-cell params.
// `theta_std` standardizes the L1 term (training uses the core net's target
// standardizer); L2/L3 use the standardizers carried by `data`. Batch terms
// average over `rows` (L3 over its unmasked subset; 0 when none).
PinnLossTerms pinn_loss_terms(const Eigen::MatrixXd& theta_pred_raw, const PinnData& data,
                              const std::vector<int>& rows, const SurrogateHc& surrogate,
                              const Standardizer& theta_std);
double pinn_loss(const Eigen::MatrixXd& theta_pred_raw, const PinnData& data,
                 const std::vector<int>& rows, const SurrogateHc& surrogate,
                 const Standardizer& theta_std, const PinnWeights& weights);

// Differentiable objective over the core net's parameter vector, shaped to
// plug into net_train_custom. Both nets' standardizers must be fit before
// construction; the referenced objects must outlive the objective. Term
// weights: (1, lambda1, lambda2) when ratios.r1 > 0, else (0, r2, r3) so an
// all-physics loss remains expressible. When called without a gradient (the
// trainer's once-per-epoch validation pass) it appends the term decomposition
// to `val_terms`.
class PinnObjective {
  public:
    PinnObjective(const DenseNet& core, const PinnData& data, const SurrogateHc& surrogate,
                  const PinnRatios& ratios);

    int n_rows() const { return n_; }
    double operator()(const Eigen::VectorXd& core_params, const std::vector<int>& rows,
                      Eigen::VectorXd* grad) const;
    const std::vector<PinnLossTerms>& val_terms() const { return val_terms_; }

  private:
    const DenseNet* core_;
    const SurrogateHc* surrogate_;
    const PinnData* data_;
    double w1_ = 1.0, w2_ = 1.0, w3_ = 1.0;
    int n_ = 0;
    Eigen::MatrixXd xs_;         // core-input-standardized features
    Eigen::MatrixXd theta_std_;  // core-target-standardized params
    mutable std::vector<PinnLossTerms> val_terms_;
};

struct PinnControl {
    PinnRatios ratios;
    TrainControl train{0.005, 1000, 200, 50, 0.15, 0};
    std::vector<int> hidden = {60, 60};
    std::uint64_t net_seed = 0;

    void validate() const;  // throws InvalidArgument
};

struct PinnModel {
    DenseNet core;  // features -> half-cell params
    SurrogateHc surrogate;
    PinnRatios ratios;
    ElectrodePair pair;  // exact forward model used at inference
    TrainHistory history;
    std::vector<PinnLossTerms> term_history;  // per-epoch validation decomposition
    PinnLossTerms final_terms;                // full training set, restored params

    // Net output for one curve, raw units.
    HalfCellParams predict_params(const FeatureCurve& feature) const;
    Eigen::MatrixXd predict_params(const Eigen::MatrixXd& x) const;

    // Health targets via the exact curve reconstruction applied to the
    // predicted params (masses read off directly). Falls back to the
    // surrogate's (q_cell, lii) when the predicted set cannot bracket the
    // voltage window, so prediction is total.
    HealthParams predict(const FeatureCurve& feature) const;
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;  // n x 4 targets
};

// Trains the core net on `train` (which must carry true params) against the
// given surrogate. Training rows mix early experimental records with
// heavily-degraded simulation records upstream; this function is agnostic.
PinnModel train_pinn(const ElectrodePair& pair, const LabeledDataset& train,
                     const SurrogateHc& surrogate, const PinnControl& control = {});

// ---------------------------------------------------------------------------
// Two-fidelity kriging
//
// Per target: fit f_low on abundant simulation rows, then fit f_delta on the
// experimental discrepancies y_h - rho * mu_low(x_h). Prediction combines
// mean = rho * mu_low + mu_delta and, with the two processes independent,
// variance = rho^2 * var_low + var_delta. rho defaults to 1; when estimated,
// a per-target golden-section search maximizes the discrepancy fit's log
// marginal likelihood at the control's kernel (hyperparameter search then
// reruns at the chosen rho).
// ---------------------------------------------------------------------------

struct CoKrigingControl {
    KernelSpec spec_low{KernelKind::matern32};
    KernelSpec spec_delta{KernelKind::matern32};
    double nugget_low = 1e-6;
    double nugget_delta = 1e-6;
    bool estimate_rho = false;
    double rho_min = 0.0, rho_max = 2.0;  // golden-section bracket
    // The simulation fit sees several hundred rows where each likelihood
    // evaluation is expensive; its search budget is trimmed accordingly.
    GprControl search_low{true, 2, 3, 0};
    GprControl search_delta{true, 8, 6, 0};

    void validate() const;  // throws InvalidArgument
};

struct CoKrigingModel {
    std::vector<GprModel> f_low;    // one per target column
    std::vector<GprModel> f_delta;
    Eigen::VectorXd rho;

    int targets() const { return static_cast<int>(f_low.size()); }
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
    void predict(const Eigen::MatrixXd& x, Eigen::MatrixXd& mean, Eigen::MatrixXd& variance) const;
};

// x_h/y_h: experimental rows (>= 4); x_l/y_l: simulation rows (>= 4).
CoKrigingModel train_cokriging(const Eigen::MatrixXd& x_h, const Eigen::MatrixXd& y_h,
                               const Eigen::MatrixXd& x_l, const Eigen::MatrixXd& y_l,
                               const CoKrigingControl& control = {});

// ---------------------------------------------------------------------------
// Residual-corrected elastic net and direct data augmentation
// ---------------------------------------------------------------------------

inline constexpr double kDefaultEnetAlpha = 1e-3;
inline constexpr double kDefaultEnetL1Ratio = 0.5;

struct DeltaEnetModel {
    std::vector<ElasticNetModel> estimator;  // simulation-trained, one per target
    std::vector<ElasticNetModel> corrector;  // trained on experimental residuals
    double alpha = kDefaultEnetAlpha;
    double l1_ratio = kDefaultEnetL1Ratio;

    int targets() const { return static_cast<int>(estimator.size()); }
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;  // estimator + corrector
};

DeltaEnetModel train_delta_enet(const Eigen::MatrixXd& x_h, const Eigen::MatrixXd& y_h,
                                const Eigen::MatrixXd& x_l, const Eigen::MatrixXd& y_l,
                                double alpha = kDefaultEnetAlpha,
                                double l1_ratio = kDefaultEnetL1Ratio,
                                const EnetControl& solver = {});

struct AugmentedEnet {
    std::vector<ElasticNetModel> models;
    double alpha = kDefaultEnetAlpha;
    double l1_ratio = kDefaultEnetL1Ratio;

    int targets() const { return static_cast<int>(models.size()); }
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

// Concatenates experimental and simulation rows (sim may be empty, in which
// case the result coincides with the plain elastic net baseline) and fits one
// elastic net per target.
AugmentedEnet train_augmented(const LabeledDataset& train_exp, const LabeledDataset& sim,
                              double alpha = kDefaultEnetAlpha,
                              double l1_ratio = kDefaultEnetL1Ratio,
                              const EnetControl& solver = {});
AugmentedEnet train_augmented(const Eigen::MatrixXd& x_exp, const Eigen::MatrixXd& y_exp,
                              const Eigen::MatrixXd& x_sim, const Eigen::MatrixXd& y_sim,
                              double alpha = kDefaultEnetAlpha,
                              double l1_ratio = kDefaultEnetL1Ratio,
                              const EnetControl& solver = {});

// ---------------------------------------------------------------------------
// Purely data-driven baselines (experimental rows only)
// ---------------------------------------------------------------------------

struct BaselineControl {
    std::vector<int> hidden = {60, 60};
    TrainControl net_train{0.005, 1000, 200, 50, 0.15, 0};
    std::uint64_t net_seed = 0;
    KernelSpec gpr_spec{KernelKind::matern32};
    double gpr_nugget = 1e-6;
    GprControl gpr_search{true, 8, 6, 0};
    double enet_alpha = kDefaultEnetAlpha;
    double enet_l1_ratio = kDefaultEnetL1Ratio;
    EnetControl enet_solver{};

    void validate() const;  // throws InvalidArgument
};

struct BaselineNet {
    DenseNet net;  // features -> health targets directly
    TrainHistory history;

    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const { return net.predict(x); }
};

struct BaselineGpr {
    std::vector<GprModel> models;

    int targets() const { return static_cast<int>(models.size()); }
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
    void predict(const Eigen::MatrixXd& x, Eigen::MatrixXd& mean, Eigen::MatrixXd& variance) const;
};

struct BaselineEnet {
    std::vector<ElasticNetModel> models;
    double alpha = kDefaultEnetAlpha;
    double l1_ratio = kDefaultEnetL1Ratio;

    int targets() const { return static_cast<int>(models.size()); }
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

struct Baselines {
    BaselineNet net;
    BaselineGpr gpr;
    BaselineEnet enet;
};

Baselines train_baselines(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                          const BaselineControl& control = {});

// ---------------------------------------------------------------------------
// Common predictor wrapper
// ---------------------------------------------------------------------------

enum class Method {
    pinn,
    cokriging,
    delta_enet,
    augmented,
    base_net,
    base_gpr,
    base_enet,
};

std::string to_string(Method m);
Method method_from_string(const std::string& s);  // throws ParseError
const std::vector<Method>& all_methods();

struct Prediction {
    HealthParams mean;
    std::optional<HealthParams> variance;  // kriging-backed methods only
};

struct Predictor {
    std::variant<PinnModel, CoKrigingModel, DeltaEnetModel, AugmentedEnet, BaselineNet,
                 BaselineGpr, BaselineEnet>
        model;

    Method method() const;
    bool has_variance() const;
    // Batch means over target columns (q_cell, m_p, m_n, lii).
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
    Prediction predict_curve(const FeatureCurve& feature) const;
};

// Method tag plus the underlying model document(s); inference state only.
std::string predictor_to_json(const Predictor& p);
Predictor predictor_from_json(const std::string& text);

}  // namespace battdiag
