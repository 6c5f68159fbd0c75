#include "sohpie/fdr.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace sohpie {

namespace {

void validate_pvalues(const std::vector<double>& p) {
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("p-values must lie in [0, 1]");
}

// Step-up pass shared by BH and q-value: q_(i) = min_{j>=i} pi0 * p_(j) * m / j.
std::vector<double> step_up(const std::vector<double>& p, double pi0) {
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (p[a] != p[b]) return p[a] < p[b];
        return a < b;
    });

    std::vector<double> q(m, 0.0);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        double value = pi0 * p[order[r]] * static_cast<double>(m) / static_cast<double>(r + 1);
        running = std::min(running, std::min(value, 1.0));
        q[order[r]] = running;
    }
    return q;
}

} // namespace

FdrResult bh_adjust(const std::vector<double>& p) {
    validate_pvalues(p);
    FdrResult out;
    out.p_values = p;
    out.q_values = step_up(p, 1.0);
    out.pi0 = 1.0;
    out.method = FdrMethod::bh;
    return out;
}

std::vector<double> default_lambda_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 18; ++i) grid.push_back(0.05 * i);
    return grid;
}

FdrResult qvalue(const std::vector<double>& p, const std::vector<double>& lambda_grid) {
    validate_pvalues(p);
    const std::size_t m = p.size();
    if (m < 10) {
        FdrResult out = bh_adjust(p);
        out.warnings.push_back("fewer than 10 p-values; fell back to BH adjustment");
        return out;
    }
    for (double lambda : lambda_grid)
        if (lambda < 0.0 || lambda > 0.95)
            throw std::invalid_argument("qvalue: lambda grid entries must lie in [0, 0.95]");

    std::vector<double> lambdas(lambda_grid);
    std::sort(lambdas.begin(), lambdas.end());
    lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
    if (lambdas.empty()) throw std::invalid_argument("qvalue: empty lambda grid");

    Eigen::VectorXd pi0_hat(static_cast<Eigen::Index>(lambdas.size()));
    for (std::size_t g = 0; g < lambdas.size(); ++g) {
        std::size_t above = 0;
        for (double v : p)
            if (v > lambdas[g]) ++above;
        pi0_hat(static_cast<Eigen::Index>(g)) =
            static_cast<double>(above) / (static_cast<double>(m) * (1.0 - lambdas[g]));
    }

    double pi0;
    if (lambdas.size() >= 4) {
        // Least-squares cubic in lambda, read off at the largest grid point.
        Eigen::MatrixXd V(static_cast<Eigen::Index>(lambdas.size()), 4);
        for (std::size_t g = 0; g < lambdas.size(); ++g) {
            double l = lambdas[g];
            V(static_cast<Eigen::Index>(g), 0) = 1.0;
            V(static_cast<Eigen::Index>(g), 1) = l;
            V(static_cast<Eigen::Index>(g), 2) = l * l;
            V(static_cast<Eigen::Index>(g), 3) = l * l * l;
        }
        Eigen::Vector4d coef = V.colPivHouseholderQr().solve(pi0_hat);
        double l = lambdas.back();
        pi0 = coef(0) + coef(1) * l + coef(2) * l * l + coef(3) * l * l * l;
    } else {
        pi0 = pi0_hat(static_cast<Eigen::Index>(lambdas.size()) - 1);
    }
    pi0 = std::min(1.0, std::max(pi0, 1e-8));

    FdrResult out;
    out.p_values = p;
    out.q_values = step_up(p, pi0);
    out.pi0 = pi0;
    out.method = FdrMethod::qvalue;
    return out;
}

FdrResult qvalue(const std::vector<double>& p) {
    return qvalue(p, default_lambda_grid());
}

std::vector<std::size_t> significant_taxa(const FdrResult& result, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("significant_taxa: alpha must be in (0, 1)");
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < result.q_values.size(); ++i)
        if (result.q_values[i] < alpha) hits.push_back(i);
    return hits;
}

} // namespace sohpie
