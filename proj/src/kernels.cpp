#include <cmath>

#include "battdiag/learners.hpp"

namespace battdiag {

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
    if (x.rows() < 1) throw InvalidArgument("Standardizer::fit: empty matrix");
    Standardizer s;
    const double n = static_cast<double>(x.rows());
    s.mean = x.colwise().mean();
    s.scale.resize(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double var = (x.col(c).array() - s.mean[c]).square().sum() / n;
        const double sd = std::sqrt(var);
        s.scale[c] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != mean.size())
        throw InvalidArgument("Standardizer::apply: dimension mismatch");
    return (x.rowwise() - mean.transpose()).array().rowwise() /
           scale.transpose().array();
}

Eigen::MatrixXd Standardizer::invert(const Eigen::MatrixXd& z) const {
    if (z.cols() != mean.size())
        throw InvalidArgument("Standardizer::invert: dimension mismatch");
    return (z.array().rowwise() * scale.transpose().array()).matrix().rowwise() +
           mean.transpose();
}

std::string to_string(KernelKind k) {
    switch (k) {
        case KernelKind::linear: return "linear";
        case KernelKind::rbf: return "rbf";
        case KernelKind::exponential: return "exponential";
        case KernelKind::rational_quadratic: return "rational_quadratic";
        case KernelKind::polynomial: return "polynomial";
        case KernelKind::matern32: return "matern32";
        case KernelKind::matern52: return "matern52";
    }
    throw InvalidArgument("to_string: unknown kernel kind");
}

KernelKind kernel_kind_from_string(const std::string& s) {
    for (KernelKind k : all_kernel_kinds())
        if (to_string(k) == s) return k;
    throw ParseError("unknown kernel kind: '" + s + "'");
}

const std::vector<KernelKind>& all_kernel_kinds() {
    static const std::vector<KernelKind> kinds = {
        KernelKind::linear,
        KernelKind::rbf,
        KernelKind::exponential,
        KernelKind::rational_quadratic,
        KernelKind::polynomial,
        KernelKind::matern32,
        KernelKind::matern52,
    };
    return kinds;
}

void KernelSpec::validate() const {
    if (!(length_scale > 0.0) || !std::isfinite(length_scale))
        throw InvalidArgument("KernelSpec: length_scale must be positive");
    if (!(variance > 0.0) || !std::isfinite(variance))
        throw InvalidArgument("KernelSpec: variance must be positive");
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw InvalidArgument("KernelSpec: alpha must be positive");
    if (degree < 1) throw InvalidArgument("KernelSpec: degree must be >= 1");
    if (!(offset >= 0.0) || !std::isfinite(offset))
        throw InvalidArgument("KernelSpec: offset must be non-negative");
}

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y) {
    if (x.size() != y.size())
        throw InvalidArgument("kernel_eval: dimension mismatch");
    spec.validate();
    const double l = spec.length_scale;
    switch (spec.kind) {
        case KernelKind::linear:
            return x.dot(y);
        case KernelKind::rbf: {
            const double r2 = (x - y).squaredNorm();
            return std::exp(-r2 / (2.0 * l * l));
        }
        case KernelKind::exponential: {
            const double r = (x - y).norm();
            return std::exp(-r / (2.0 * l));
        }
        case KernelKind::rational_quadratic: {
            const double r2 = (x - y).squaredNorm();
            return std::pow(1.0 + r2 / (2.0 * spec.alpha * l * l), -spec.alpha);
        }
        case KernelKind::polynomial:
            return std::pow(x.dot(y) + spec.offset, static_cast<double>(spec.degree));
        case KernelKind::matern32: {
            const double a = std::sqrt(3.0) * (x - y).norm() / l;
            return spec.variance * (1.0 + a) * std::exp(-a);
        }
        case KernelKind::matern52: {
            const double r = (x - y).norm();
            const double a = std::sqrt(5.0) * r / l;
            return spec.variance * (1.0 + a + 5.0 * r * r / (3.0 * l * l)) *
                   std::exp(-a);
        }
    }
    throw InvalidArgument("kernel_eval: unknown kernel kind");
}

Eigen::MatrixXd kernel_gram(const KernelSpec& spec, const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double v =
                kernel_eval(spec, x.row(i).transpose(), x.row(j).transpose());
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

Eigen::VectorXd kernel_cross(const KernelSpec& spec, const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& q) {
    Eigen::VectorXd k(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        k[i] = kernel_eval(spec, x.row(i).transpose(), q);
    return k;
}

}  // namespace battdiag
