#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "battdiag/learners.hpp"
#include "battdiag/rng.hpp"
#include "model_json.hpp"

namespace battdiag {
namespace {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using WeightMap = Eigen::Map<const RowMajorMatrix>;
using BiasMap = Eigen::Map<const Eigen::VectorXd>;

int total_params(const std::vector<int>& layers) {
    int n = 0;
    for (std::size_t k = 0; k + 1 < layers.size(); ++k)
        n += layers[k + 1] * layers[k] + layers[k + 1];
    return n;
}

void check_layers(const std::vector<int>& layers) {
    if (layers.size() < 2)
        throw InvalidArgument("DenseNet: need at least input and output layers");
    for (int s : layers)
        if (s < 1) throw InvalidArgument("DenseNet: layer sizes must be positive");
}

}  // namespace

int DenseNet::n_params() const { return total_params(layers); }

Eigen::MatrixXd DenseNet::predict(const Eigen::MatrixXd& x) const {
    if (x.cols() != in_dim())
        throw InvalidArgument("DenseNet::predict: feature dimension mismatch");
    return out_std.invert(net_forward_std(*this, params, in_std.apply(x), nullptr));
}

DenseNet make_net(const std::vector<int>& layers, std::uint64_t seed) {
    check_layers(layers);
    DenseNet net;
    net.layers = layers;
    net.params.resize(total_params(layers));
    Rng rng(seed);
    int off = 0;
    for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
        const int rows = layers[k + 1];
        const int cols = layers[k];
        const double sd = std::sqrt(2.0 / static_cast<double>(cols));
        for (int i = 0; i < rows * cols; ++i) net.params[off + i] = sd * rng.normal();
        off += rows * cols;
        for (int i = 0; i < rows; ++i) net.params[off + i] = 0.0;
        off += rows;
    }
    net.in_std.mean = Eigen::VectorXd::Zero(layers.front());
    net.in_std.scale = Eigen::VectorXd::Ones(layers.front());
    net.out_std.mean = Eigen::VectorXd::Zero(layers.back());
    net.out_std.scale = Eigen::VectorXd::Ones(layers.back());
    return net;
}

Eigen::MatrixXd net_forward_std(const DenseNet& net, const Eigen::VectorXd& params,
                                const Eigen::MatrixXd& x_std, ForwardCache* cache) {
    check_layers(net.layers);
    if (params.size() != total_params(net.layers))
        throw InvalidArgument("net_forward_std: parameter vector size mismatch");
    if (x_std.cols() != net.layers.front())
        throw InvalidArgument("net_forward_std: input dimension mismatch");

    const std::size_t n_weight_layers = net.layers.size() - 1;
    if (cache) {
        cache->input = x_std;
        cache->pre.assign(n_weight_layers, Eigen::MatrixXd());
    }
    Eigen::MatrixXd act = x_std;
    int off = 0;
    for (std::size_t k = 0; k < n_weight_layers; ++k) {
        const int rows = net.layers[k + 1];
        const int cols = net.layers[k];
        const WeightMap w(params.data() + off, rows, cols);
        const BiasMap b(params.data() + off + rows * cols, rows);
        off += rows * cols + rows;
        Eigen::MatrixXd z = act * w.transpose();
        z.rowwise() += b.transpose();
        if (cache) cache->pre[k] = z;
        if (k + 1 < n_weight_layers)
            act = z.cwiseMax(0.0);
        else
            act = std::move(z);
    }
    return act;
}

void net_backward_std(const DenseNet& net, const Eigen::VectorXd& params,
                      const ForwardCache& cache, const Eigen::MatrixXd& dout,
                      Eigen::VectorXd* grad, Eigen::MatrixXd* dx) {
    check_layers(net.layers);
    if (params.size() != total_params(net.layers))
        throw InvalidArgument("net_backward_std: parameter vector size mismatch");
    if (grad && grad->size() != params.size())
        throw InvalidArgument("net_backward_std: gradient vector size mismatch");
    const std::size_t n_weight_layers = net.layers.size() - 1;
    if (cache.pre.size() != n_weight_layers ||
        dout.rows() != cache.input.rows() || dout.cols() != net.layers.back())
        throw InvalidArgument("net_backward_std: cache/dout shape mismatch");

    // Parameter block offsets, front to back.
    std::vector<int> offsets(n_weight_layers);
    {
        int off = 0;
        for (std::size_t k = 0; k < n_weight_layers; ++k) {
            offsets[k] = off;
            off += net.layers[k + 1] * net.layers[k] + net.layers[k + 1];
        }
    }

    Eigen::MatrixXd dz = dout;
    for (std::size_t k = n_weight_layers; k-- > 0;) {
        const int rows = net.layers[k + 1];
        const int cols = net.layers[k];
        const WeightMap w(params.data() + offsets[k], rows, cols);
        // Activation feeding this layer: the raw input for layer 0, otherwise
        // ReLU of the previous pre-activation (zero subgradient at kinks).
        const Eigen::MatrixXd act =
            k == 0 ? cache.input : cache.pre[k - 1].cwiseMax(0.0);
        if (grad) {
            Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>
                gw(grad->data() + offsets[k], rows, cols);
            gw += dz.transpose() * act;
            Eigen::Map<Eigen::VectorXd> gb(grad->data() + offsets[k] + rows * cols,
                                           rows);
            gb += dz.colwise().sum().transpose();
        }
        if (k == 0) {
            if (dx) *dx = dz * w;
            break;
        }
        Eigen::MatrixXd da = dz * w;
        dz = (cache.pre[k - 1].array() > 0.0).select(da, 0.0);
    }
}

void TrainControl::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw InvalidArgument("TrainControl: learning_rate must be positive");
    if (max_epochs < 1) throw InvalidArgument("TrainControl: max_epochs must be >= 1");
    if (minibatch < 1) throw InvalidArgument("TrainControl: minibatch must be >= 1");
    if (patience < 0) throw InvalidArgument("TrainControl: patience must be >= 0");
    if (!(validation_fraction > 0.0 && validation_fraction < 0.5))
        throw InvalidArgument(
            "TrainControl: validation_fraction must lie in (0, 0.5)");
}

TrainHistory net_train_custom(DenseNet& net, int n_rows, const BatchLossFn& loss,
                              const TrainControl& control) {
    control.validate();
    if (n_rows < 2)
        throw InvalidArgument("net_train_custom: need at least 2 training rows");
    const int np = net.n_params();
    if (net.params.size() != np)
        throw InvalidArgument("net_train_custom: net parameter vector size mismatch");

    Rng rng(control.seed);
    std::vector<int> perm(static_cast<std::size_t>(n_rows));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    const int val_n = std::clamp(
        static_cast<int>(std::llround(control.validation_fraction * n_rows)), 1,
        n_rows - 1);
    const std::vector<int> val_rows(perm.begin(), perm.begin() + val_n);
    std::vector<int> train_rows(perm.begin() + val_n, perm.end());

    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    Eigen::VectorXd m = Eigen::VectorXd::Zero(np);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(np);
    Eigen::VectorXd grad(np);
    long long step = 0;

    TrainHistory history;
    Eigen::VectorXd best_params = net.params;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int stale = 0;

    for (int epoch = 1; epoch <= control.max_epochs; ++epoch) {
        rng.shuffle(train_rows);
        double train_loss_sum = 0.0;
        int train_count = 0;
        for (std::size_t start = 0; start < train_rows.size();
             start += static_cast<std::size_t>(control.minibatch)) {
            const std::size_t stop =
                std::min(start + static_cast<std::size_t>(control.minibatch),
                         train_rows.size());
            const std::vector<int> batch(train_rows.begin() + start,
                                         train_rows.begin() + stop);
            grad.setZero();
            const double batch_loss = loss(net.params, batch, &grad);
            if (!std::isfinite(batch_loss) || !grad.allFinite())
                throw TrainingDiverged("non-finite training loss or gradient",
                                       epoch);
            ++step;
            m = kBeta1 * m + (1.0 - kBeta1) * grad;
            v.array() =
                kBeta2 * v.array() + (1.0 - kBeta2) * grad.array().square();
            const double mc = 1.0 - std::pow(kBeta1, static_cast<double>(step));
            const double vc = 1.0 - std::pow(kBeta2, static_cast<double>(step));
            net.params.array() -= control.learning_rate * (m.array() / mc) /
                                  ((v.array() / vc).sqrt() + kEps);
            train_loss_sum += batch_loss * static_cast<double>(batch.size());
            train_count += static_cast<int>(batch.size());
        }
        const double val_loss = loss(net.params, val_rows, nullptr);
        if (!std::isfinite(val_loss))
            throw TrainingDiverged("non-finite validation loss", epoch);
        history.epochs.push_back(
            {train_loss_sum / static_cast<double>(train_count), val_loss});
        if (val_loss < best_val) {
            best_val = val_loss;
            best_params = net.params;
            best_epoch = epoch;
            stale = 0;
        } else {
            ++stale;
        }
        if (control.patience == 0 || stale > control.patience) break;
    }

    net.params = best_params;
    history.best_epoch = best_epoch;
    history.best_val = best_val;
    return history;
}

TrainHistory net_train(DenseNet& net, const Eigen::MatrixXd& x,
                       const Eigen::MatrixXd& y, const TrainControl& control) {
    if (x.rows() != y.rows())
        throw InvalidArgument("net_train: row count mismatch between x and y");
    if (x.cols() != net.in_dim() || y.cols() != net.out_dim())
        throw InvalidArgument("net_train: data dimensions mismatch net layers");
    if (!x.allFinite() || !y.allFinite())
        throw InvalidArgument("net_train: non-finite input");

    net.in_std = Standardizer::fit(x);
    net.out_std = Standardizer::fit(y);
    const Eigen::MatrixXd xs = net.in_std.apply(x);
    const Eigen::MatrixXd ys = net.out_std.apply(y);

    const BatchLossFn loss = [&net, &xs, &ys](const Eigen::VectorXd& params,
                                              const std::vector<int>& rows,
                                              Eigen::VectorXd* grad) {
        const Eigen::Index nb = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd xb(nb, xs.cols());
        Eigen::MatrixXd yb(nb, ys.cols());
        for (Eigen::Index i = 0; i < nb; ++i) {
            xb.row(i) = xs.row(rows[static_cast<std::size_t>(i)]);
            yb.row(i) = ys.row(rows[static_cast<std::size_t>(i)]);
        }
        ForwardCache cache;
        const Eigen::MatrixXd out =
            net_forward_std(net, params, xb, grad ? &cache : nullptr);
        const Eigen::MatrixXd diff = out - yb;
        const double mse = diff.squaredNorm() / static_cast<double>(nb);
        if (grad) {
            const Eigen::MatrixXd dout = (2.0 / static_cast<double>(nb)) * diff;
            net_backward_std(net, params, cache, dout, grad, nullptr);
        }
        return mse;
    };
    return net_train_custom(net, static_cast<int>(x.rows()), loss, control);
}

std::string net_to_json(const DenseNet& net) {
    nlohmann::json j = detail::model_document("net");
    j["layers"] = net.layers;
    j["params"] = detail::vector_json(net.params);
    j["in_std"] = detail::standardizer_json(net.in_std);
    j["out_std"] = detail::standardizer_json(net.out_std);
    return j.dump();
}

DenseNet net_from_json(const std::string& text) {
    const nlohmann::json j = detail::parse_document(text, "net");
    try {
        DenseNet net;
        net.layers = j.at("layers").get<std::vector<int>>();
        check_layers(net.layers);
        net.params = detail::vector_from(j.at("params"));
        net.in_std = detail::standardizer_from(j.at("in_std"));
        net.out_std = detail::standardizer_from(j.at("out_std"));
        if (net.params.size() != total_params(net.layers) ||
            net.in_std.dim() != net.in_dim() || net.out_std.dim() != net.out_dim())
            throw ParseError("net model document: inconsistent shapes");
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("net model document: ") + e.what());
    }
}

}  // namespace battdiag
