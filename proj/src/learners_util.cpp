#include <algorithm>
#include <cmath>
#include <numeric>

#include "battdiag/learners.hpp"
#include "battdiag/rng.hpp"

namespace battdiag {

GradCheckReport grad_check(const LossFn& loss, const Eigen::VectorXd& params,
                           double tol, int max_coords, std::uint64_t seed) {
    if (params.size() != loss.n_params)
        throw InvalidArgument("grad_check: parameter size mismatch");
    Eigen::VectorXd analytic = Eigen::VectorXd::Zero(params.size());
    loss.eval(params, &analytic);

    std::vector<int> coords(static_cast<std::size_t>(params.size()));
    std::iota(coords.begin(), coords.end(), 0);
    if (max_coords > 0 && max_coords < static_cast<int>(coords.size())) {
        Rng rng(seed);
        rng.shuffle(coords);
        coords.resize(static_cast<std::size_t>(max_coords));
        std::sort(coords.begin(), coords.end());
    }

    GradCheckReport report;
    report.max_rel_error = 0.0;
    report.checked = 0;
    report.kinks_skipped = 0;
    const double f0 = loss.eval(params, nullptr);
    for (int i : coords) {
        const double h = 1e-5 * std::max(1.0, std::abs(params[i]));
        Eigen::VectorXd p = params;
        p[i] = params[i] + h;
        const double f_plus = loss.eval(p, nullptr);
        p[i] = params[i] - h;
        const double f_minus = loss.eval(p, nullptr);
        const double right = (f_plus - f0) / h;
        const double left = (f0 - f_minus) / h;
        // A mismatch between one-sided slopes marks a non-smooth point (a
        // ReLU kink, say); central differencing is meaningless there.
        if (std::abs(right - left) >
            1e-3 * (1.0 + std::max(std::abs(right), std::abs(left)))) {
            ++report.kinks_skipped;
            continue;
        }
        const double central = (f_plus - f_minus) / (2.0 * h);
        const double denom =
            std::max({std::abs(central), std::abs(analytic[i]), 1e-8});
        report.max_rel_error =
            std::max(report.max_rel_error, std::abs(central - analytic[i]) / denom);
        ++report.checked;
    }
    report.pass = report.max_rel_error < tol;
    return report;
}

}  // namespace battdiag
