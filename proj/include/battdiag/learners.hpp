#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "battdiag/common.hpp"

namespace battdiag {

// ---------------------------------------------------------------------------
// Column standardization
// ---------------------------------------------------------------------------

// Per-column affine transform to zero mean / unit variance. Uses the
// population standard deviation (divide by N); columns whose deviation falls
// below 1e-12 are centered only (scale pinned to 1), so constant features and
// constant targets stay representable.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static Standardizer fit(const Eigen::MatrixXd& x);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd invert(const Eigen::MatrixXd& z) const;
    int dim() const { return static_cast<int>(mean.size()); }
};

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

enum class KernelKind {
    linear,
    rbf,
    exponential,
    rational_quadratic,
    polynomial,
    matern32,
    matern52,
};

std::string to_string(KernelKind k);
KernelKind kernel_kind_from_string(const std::string& s);
const std::vector<KernelKind>& all_kernel_kinds();

// Stationary kernels use `length_scale`; the Matern pair additionally carries
// the `variance` prefactor. `alpha` shapes the rational-quadratic kernel and
// `degree`/`offset` the polynomial one. Unused fields are ignored.
struct KernelSpec {
    KernelKind kind = KernelKind::matern32;
    double variance = 1.0;
    double length_scale = 1.0;
    double alpha = 1.0;
    int degree = 2;
    double offset = 1.0;

    void validate() const;  // throws InvalidArgument
};

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y);

// Dense Gram matrix K[i,j] = k(X.row(i), X.row(j)).
Eigen::MatrixXd kernel_gram(const KernelSpec& spec, const Eigen::MatrixXd& x);

// Cross-covariance vector k*[i] = k(X.row(i), q).
Eigen::VectorXd kernel_cross(const KernelSpec& spec, const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& q);

// ---------------------------------------------------------------------------
// Gaussian-process regression
// ---------------------------------------------------------------------------

struct GprControl {
    bool optimize = true;
    int starts = 8;      // multi-start count for the hyperparameter search
    int sweeps = 6;      // coordinate-search sweeps per start
    std::uint64_t seed = 0;
};

struct GprModel {
    KernelSpec kernel;
    double nugget = 1e-6;  // observation noise variance, standardized units
    Eigen::MatrixXd x_train;   // standardized inputs, one row per sample
    Eigen::VectorXd y_train;   // standardized targets
    Eigen::MatrixXd chol;      // lower factor of K + (nugget + jitter) I
    Eigen::VectorXd weights;   // (K + (nugget + jitter) I)^{-1} y
    Standardizer x_std;
    Standardizer y_std;        // single column
    double jitter = 0.0;       // extra diagonal needed to factorize (0 if none)
    double log_marginal = 0.0; // log marginal likelihood at the final fit
};

// Fits a GP with the given kernel. When `optimize` is set, the length scale,
// Matern variance, and nugget are tuned by multi-start coordinate search on
// the log-marginal likelihood (log-scale axes; discrete kernel parameters
// stay fixed). Factorization failures walk a jitter ladder from 1e-10 to
// 1e-4 before giving up.
GprModel gpr_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const KernelSpec& spec, double nugget, bool optimize,
                 const GprControl& control = {});

// Posterior mean and variance (floored at zero) in raw target units.
void gpr_predict(const GprModel& model, const Eigen::MatrixXd& x,
                 Eigen::VectorXd& mean, Eigen::VectorXd& variance);
std::pair<double, double> gpr_predict_one(const GprModel& model,
                                          const Eigen::VectorXd& x);

// Versioned JSON document round trip (full precision, bit-exact weights).
std::string gpr_to_json(const GprModel& model);
GprModel gpr_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Elastic net
// ---------------------------------------------------------------------------

struct EnetControl {
    double tol = 1e-7;       // max coordinate update to declare convergence
    // The ridge part keeps the objective strongly convex, so cyclic descent
    // always converges — but on strongly collinear designs (the shared
    // 100-point feature grid) it contracts slowly and needs a few hundred
    // thousand cheap sweeps.
    int max_sweeps = 500000;
};

// Minimizes, in standardized coordinates,
//   (1/2N)||y - Xw||^2 + alpha (l1_ratio ||w||_1 + (1-l1_ratio)/2 ||w||^2)
// by cyclic coordinate descent with soft thresholding. Weights and intercept
// are reported in raw units.
struct ElasticNetModel {
    Eigen::VectorXd weights;
    double intercept = 0.0;
    double alpha = 0.0;
    double l1_ratio = 0.0;
    bool converged = false;
    int sweeps = 0;
    std::vector<double> objective_history;  // standardized objective per sweep

    double predict(const Eigen::VectorXd& x) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

ElasticNetModel enet_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         double alpha, double l1_ratio,
                         const EnetControl& control = {});

// One independent model per column of y.
std::vector<ElasticNetModel> enet_fit_multi(const Eigen::MatrixXd& x,
                                            const Eigen::MatrixXd& y, double alpha,
                                            double l1_ratio,
                                            const EnetControl& control = {});

std::string enet_to_json(const ElasticNetModel& model);
ElasticNetModel enet_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Dense feed-forward network
// ---------------------------------------------------------------------------

// Fully-connected ReLU network (identity output layer). Parameters live in a
// flat vector ordered (W0, b0, W1, b1, ...) with row-major weight blocks;
// helper methods pack and unpack. Inputs/outputs carry standardization stats
// so predict() works in raw units.
struct DenseNet {
    std::vector<int> layers;
    Eigen::VectorXd params;
    Standardizer in_std;
    Standardizer out_std;

    int n_params() const;
    int in_dim() const { return layers.front(); }
    int out_dim() const { return layers.back(); }

    // Raw-unit prediction: standardize input, forward, de-standardize output.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

// He-initialized network; biases start at zero.
DenseNet make_net(const std::vector<int>& layers, std::uint64_t seed);

// Forward pass in standardized coordinates. `pre[k]` holds layer k's
// pre-activation batch; the returned matrix is the final linear output.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> pre;
    Eigen::MatrixXd input;
};
Eigen::MatrixXd net_forward_std(const DenseNet& net, const Eigen::VectorXd& params,
                                const Eigen::MatrixXd& x_std, ForwardCache* cache);

// Reverse pass: given dL/d(output) for the cached batch, accumulates dL/dparams
// into `grad` (when non-null) and writes dL/d(input) to `dx` (when non-null).
// ReLU uses the zero subgradient at exact kinks.
void net_backward_std(const DenseNet& net, const Eigen::VectorXd& params,
                      const ForwardCache& cache, const Eigen::MatrixXd& dout,
                      Eigen::VectorXd* grad, Eigen::MatrixXd* dx);

struct TrainControl {
    double learning_rate = 0.005;
    int max_epochs = 1000;
    int minibatch = 200;
    int patience = 50;  // extra non-improving epochs tolerated; 0 = single epoch
    double validation_fraction = 0.15;
    std::uint64_t seed = 0;

    void validate() const;  // throws InvalidArgument
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;      // 1-based epoch whose weights were kept
    double best_val = 0.0;
};

// Batch loss: mean loss over the given rows at the given flat parameters;
// accumulates the parameter gradient into `grad` when non-null.
using BatchLossFn = std::function<double(const Eigen::VectorXd& params,
                                         const std::vector<int>& rows,
                                         Eigen::VectorXd* grad)>;

// Minibatch Adam (beta1 0.9, beta2 0.999, eps 1e-8) over `n_rows` training
// rows with a seed-keyed validation holdout; restores the best-validation
// parameters. Throws TrainingDiverged when a loss or gradient goes non-finite.
TrainHistory net_train_custom(DenseNet& net, int n_rows, const BatchLossFn& loss,
                              const TrainControl& control);

// Convenience wrapper: standardized mean-squared-error regression of y on x.
// Fits the net's standardization stats from the data.
TrainHistory net_train(DenseNet& net, const Eigen::MatrixXd& x,
                       const Eigen::MatrixXd& y, const TrainControl& control);

std::string net_to_json(const DenseNet& net);
DenseNet net_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

// Scalar loss over a flat parameter vector, with an analytic gradient.
struct LossFn {
    int n_params = 0;
    std::function<double(const Eigen::VectorXd& params, Eigen::VectorXd* grad)> eval;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    int checked = 0;
    int kinks_skipped = 0;  // coordinates where one-sided slopes disagree
    bool pass = false;
};

// Central finite differences (relative step 1e-5) against the analytic
// gradient. Coordinates sitting on a kink (left and right slopes disagree)
// are excluded from the comparison and counted, not failed. When
// `max_coords` > 0, checks a seed-keyed random subset of that size.
GradCheckReport grad_check(const LossFn& loss, const Eigen::VectorXd& params,
                           double tol = 1e-4, int max_coords = 0,
                           std::uint64_t seed = 0);

}  // namespace battdiag
