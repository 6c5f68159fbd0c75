#include "sohpie/regression.hpp"

#include "sohpie/parallel.hpp"
#include "sohpie/rng.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

namespace sohpie {

namespace {

double parse_numeric_cell(const std::string& cell, const std::string& col) {
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0')
        throw std::runtime_error("build_design: non-numeric cell '" + cell + "' in column '" +
                                 col + "'");
    return v;
}

bool is_constant(const Eigen::VectorXd& col) {
    return (col.array() == col(0)).all();
}

} // namespace

DesignMatrix build_design(const AlignedDataset& data,
                          const std::vector<std::string>& covariate_cols) {
    const Eigen::Index n = data.n1() + data.n2();
    std::vector<Eigen::VectorXd> columns;
    std::vector<std::string> names;
    DesignMatrix out;

    columns.push_back(Eigen::VectorXd::Ones(n));
    names.push_back("(intercept)");

    Eigen::VectorXd z(n);
    auto indicator = data.group_indicator();
    for (Eigen::Index i = 0; i < n; ++i) z(i) = static_cast<double>(indicator[static_cast<std::size_t>(i)]);
    columns.push_back(z);
    names.push_back("group");

    for (const auto& name : covariate_cols) {
        if (name == data.group_col) continue;
        const CovariateColumn* col = data.covariates.find(name);
        if (!col) throw std::invalid_argument("build_design: covariate '" + name + "' not aligned");

        if (col->kind == ColumnKind::numeric) {
            Eigen::VectorXd v(n);
            for (Eigen::Index i = 0; i < n; ++i)
                v(i) = parse_numeric_cell(col->cells[static_cast<std::size_t>(i)], name);
            if (is_constant(v)) {
                out.warnings.push_back("covariate '" + name + "' is constant; dropped");
                continue;
            }
            columns.push_back(v);
            names.push_back(name);
        } else {
            std::set<std::string> levels(col->cells.begin(), col->cells.end());
            if (levels.size() < 2) {
                out.warnings.push_back("covariate '" + name + "' has a single level; dropped");
                continue;
            }
            // Treatment coding against the alphabetically first level.
            auto it = levels.begin();
            ++it;
            for (; it != levels.end(); ++it) {
                Eigen::VectorXd v(n);
                for (Eigen::Index i = 0; i < n; ++i)
                    v(i) = col->cells[static_cast<std::size_t>(i)] == *it ? 1.0 : 0.0;
                if (is_constant(v)) {
                    out.warnings.push_back("indicator '" + name + "=" + *it +
                                           "' is constant; dropped");
                    continue;
                }
                columns.push_back(v);
                names.push_back(name + "=" + *it);
            }
        }
    }

    out.X.resize(n, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c)
        out.X.col(static_cast<Eigen::Index>(c)) = columns[c];
    out.column_names = std::move(names);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(out.X);
    if (qr.rank() < out.cols()) {
        const auto& perm = qr.colsPermutation().indices();
        std::string collinear;
        for (Eigen::Index c = qr.rank(); c < out.cols(); ++c) {
            if (!collinear.empty()) collinear += ", ";
            collinear += out.column_names[static_cast<std::size_t>(perm(c))];
        }
        throw std::runtime_error("build_design: design is rank deficient; collinear columns: " +
                                 collinear);
    }
    if (n <= out.cols() + 1)
        throw std::runtime_error("build_design: n=" + std::to_string(n) +
                                 " too small for " + std::to_string(out.cols()) + " columns");
    return out;
}

DesignMatrix build_design(const AlignedDataset& data) {
    std::vector<std::string> cols;
    for (const auto& col : data.covariates.columns)
        if (col.name != data.group_col) cols.push_back(col.name);
    return build_design(data, cols);
}

namespace {

struct SubsetFit {
    Eigen::VectorXd beta;
    bool ok = false;
};

// OLS on the given rows; not ok when the subset is rank deficient.
SubsetFit fit_subset(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const std::vector<Eigen::Index>& rows) {
    const auto q = X.cols();
    Eigen::MatrixXd Xs(static_cast<Eigen::Index>(rows.size()), q);
    Eigen::VectorXd ys(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        Xs.row(static_cast<Eigen::Index>(r)) = X.row(rows[r]);
        ys(static_cast<Eigen::Index>(r)) = y(rows[r]);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
    SubsetFit fit;
    if (qr.rank() < q) return fit;
    fit.beta = qr.solve(ys);
    fit.ok = true;
    return fit;
}

// Indices of the h smallest squared residuals, ties broken by index.
std::vector<Eigen::Index> smallest_residuals(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& beta, Eigen::Index h) {
    const Eigen::Index n = X.rows();
    Eigen::VectorXd r2 = (y - X * beta).array().square();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (r2(a) != r2(b)) return r2(a) < r2(b);
        return a < b;
    });
    order.resize(static_cast<std::size_t>(h));
    std::sort(order.begin(), order.end());
    return order;
}

double trimmed_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& beta, Eigen::Index h) {
    Eigen::VectorXd r2 = (y - X * beta).array().square();
    std::vector<double> values(r2.data(), r2.data() + r2.size());
    std::nth_element(values.begin(), values.begin() + (h - 1), values.end());
    return std::accumulate(values.begin(), values.begin() + h, 0.0);
}

struct Candidate {
    Eigen::VectorXd beta;
    std::vector<Eigen::Index> subset;
    double objective = std::numeric_limits<double>::infinity();
};

// One concentration step: refit on the h best-fitting rows. The trimmed
// objective never increases across steps.
bool c_step(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Eigen::Index h, Candidate& cand) {
    auto subset = smallest_residuals(X, y, cand.beta, h);
    SubsetFit fit = fit_subset(X, y, subset);
    if (!fit.ok) return false;
    double objective = trimmed_objective(X, y, fit.beta, h);
    assert(objective <= cand.objective * (1.0 + 1e-9) + 1e-12);
    bool converged = subset == cand.subset;
    cand.beta = std::move(fit.beta);
    cand.subset = std::move(subset);
    cand.objective = objective;
    return !converged;
}

std::vector<Eigen::Index> sample_distinct(std::mt19937_64& rng, Eigen::Index n, Eigen::Index k) {
    std::vector<Eigen::Index> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < k; ++i) {
        std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
}

// All h-subsets of [0, n); the LTS optimum is the best subset's OLS fit.
Candidate exhaustive_search(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Eigen::Index h) {
    const Eigen::Index n = X.rows();
    std::vector<Eigen::Index> subset(static_cast<std::size_t>(h));
    std::iota(subset.begin(), subset.end(), Eigen::Index{0});

    Candidate best;
    for (;;) {
        SubsetFit fit = fit_subset(X, y, subset);
        if (fit.ok) {
            double objective = trimmed_objective(X, y, fit.beta, h);
            if (objective < best.objective) {
                best.beta = fit.beta;
                best.subset = subset;
                best.objective = objective;
            }
        }
        // Next combination in lexicographic order.
        Eigen::Index i = h - 1;
        while (i >= 0 && subset[static_cast<std::size_t>(i)] == n - h + i) --i;
        if (i < 0) break;
        ++subset[static_cast<std::size_t>(i)];
        for (Eigen::Index j = i + 1; j < h; ++j)
            subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
    }
    return best;
}

Candidate randomized_search(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Eigen::Index h,
                            const LtsConfig& cfg) {
    const Eigen::Index n = X.rows();
    const Eigen::Index q = X.cols();
    auto rng = make_rng(cfg.seed, 0);

    std::vector<Candidate> candidates;
    candidates.reserve(static_cast<std::size_t>(cfg.elemental_starts));
    for (int s = 0; s < cfg.elemental_starts; ++s) {
        // Elemental start: exact fit through q random rows; a singular draw is
        // retried, then widened to a random h-subset.
        SubsetFit fit;
        for (int attempt = 0; attempt < 30 && !fit.ok; ++attempt)
            fit = fit_subset(X, y, sample_distinct(rng, n, q));
        if (!fit.ok) fit = fit_subset(X, y, sample_distinct(rng, n, h));
        if (!fit.ok) continue;

        Candidate cand;
        cand.beta = fit.beta;
        cand.objective = trimmed_objective(X, y, cand.beta, h);
        for (int step = 0; step < cfg.initial_c_steps; ++step)
            if (!c_step(X, y, h, cand)) break;
        candidates.push_back(std::move(cand));
    }
    if (candidates.empty())
        throw std::runtime_error("lts_fit: no nonsingular elemental start found");

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.objective < b.objective; });
    if (static_cast<int>(candidates.size()) > cfg.refine_candidates)
        candidates.resize(static_cast<std::size_t>(cfg.refine_candidates));

    Candidate best;
    for (auto& cand : candidates) {
        for (int step = 0; step < cfg.max_refine_steps; ++step)
            if (!c_step(X, y, h, cand)) break;
        if (cand.objective < best.objective) best = std::move(cand);
    }
    return best;
}

} // namespace

LtsFit lts_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LtsConfig& cfg) {
    const Eigen::Index n = X.rows();
    const Eigen::Index q = X.cols();
    if (y.size() != n) throw std::invalid_argument("lts_fit: X and y row counts differ");
    if (cfg.coverage <= 0.0 || cfg.coverage > 1.0)
        throw std::invalid_argument("lts_fit: coverage must be in (0, 1]");

    const Eigen::Index h = static_cast<Eigen::Index>(std::floor(cfg.coverage * static_cast<double>(n)));
    if (h < q + 1)
        throw std::runtime_error("lts_fit: coverage " + std::to_string(cfg.coverage) + " yields h=" +
                                 std::to_string(h) + " < " + std::to_string(q + 1) +
                                 " required for " + std::to_string(q) + " columns");

    Candidate best;
    if (h == n) {
        std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), Eigen::Index{0});
        SubsetFit fit = fit_subset(X, y, all);
        if (!fit.ok) throw std::runtime_error("lts_fit: design is rank deficient");
        best.beta = fit.beta;
        best.subset = std::move(all);
        best.objective = trimmed_objective(X, y, best.beta, h);
    } else if (n <= cfg.exhaustive_cutoff) {
        best = exhaustive_search(X, y, h);
        if (!std::isfinite(best.objective))
            throw std::runtime_error("lts_fit: every size-" + std::to_string(h) +
                                     " subset is rank deficient");
    } else {
        best = randomized_search(X, y, h, cfg);
    }

    // Reweighted final fit: plain OLS on the winning inlier set.
    best.subset = smallest_residuals(X, y, best.beta, h);
    // The h smallest squared residuals of a clean normal sample average
    // alpha - 2*a*phi(a) (alpha = h/n, a = Phi^{-1}((1+alpha)/2)) instead of 1,
    // so the trimmed scale must be inflated to keep t-statistics calibrated.
    const double cover = static_cast<double>(h) / static_cast<double>(n);
    double consistency = 1.0;
    if (cover < 1.0) {
        boost::math::normal_distribution<double> norm;
        const double a = boost::math::quantile(norm, (1.0 + cover) / 2.0);
        consistency = std::sqrt(cover / (cover - 2.0 * a * boost::math::pdf(norm, a)));
    }
    SubsetFit final_fit = fit_subset(X, y, best.subset);
    if (!final_fit.ok)
        throw std::runtime_error("lts_fit: final inlier set is rank deficient");

    LtsFit out;
    out.coefficients = final_fit.beta;
    out.h = h;
    out.inlier_indices = best.subset;
    out.df = h - q;

    double rss = 0.0;
    double y_scale = 1.0;
    for (Eigen::Index row : best.subset) {
        double r = y(row) - X.row(row).dot(out.coefficients);
        rss += r * r;
        y_scale = std::max(y_scale, std::abs(y(row)));
    }
    out.scale = out.df > 0 ? consistency * std::sqrt(rss / static_cast<double>(out.df)) : 0.0;
    // An exact fit leaves only rounding residue; report it as a true zero so
    // downstream tests recognize the degenerate case instead of dividing by it.
    if (out.scale <= 1e-12 * y_scale) out.scale = 0.0;
    out.objective = trimmed_objective(X, y, out.coefficients, h);

    Eigen::MatrixXd Xh(h, q);
    for (std::size_t r = 0; r < best.subset.size(); ++r)
        Xh.row(static_cast<Eigen::Index>(r)) = X.row(best.subset[r]);
    Eigen::MatrixXd xtx_inv =
        (Xh.transpose() * Xh).ldlt().solve(Eigen::MatrixXd::Identity(q, q));
    out.standard_errors = (xtx_inv.diagonal().array().max(0.0).sqrt() * out.scale).matrix();
    return out;
}

namespace {

double two_sided_p(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    boost::math::students_t_distribution<double> dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

} // namespace

std::vector<TaxonTestResult> taxon_tests(const PseudoValueMatrix& pv,
                                         const DesignMatrix& design,
                                         const TaxonTestConfig& cfg) {
    if (pv.n() != design.n())
        throw std::invalid_argument("taxon_tests: pseudo-value and design row counts differ");

    const auto p = static_cast<std::size_t>(pv.p());
    std::vector<TaxonTestResult> results(p);

    parallel_for(p, resolve_threads(cfg.threads), [&](std::size_t k) {
        TaxonTestResult& res = results[k];
        res.taxon = pv.taxon_names[k];
        try {
            LtsConfig lts_cfg = cfg.lts;
            lts_cfg.seed = derive_seed(cfg.lts.seed, k);
            LtsFit fit = lts_fit(design.X, pv.values.col(static_cast<Eigen::Index>(k)), lts_cfg);

            res.beta = fit.coefficients(DesignMatrix::group_col);
            res.se = fit.standard_errors(DesignMatrix::group_col);
            if (res.se > 0.0) {
                res.t = res.beta / res.se;
                res.p_value = two_sided_p(res.t, static_cast<double>(fit.df));
            } else if (std::abs(res.beta) <= 1e-10 * std::max(1.0, pv.values.col(static_cast<Eigen::Index>(k)).cwiseAbs().maxCoeff())) {
                // Exact fit with a vanishing group effect: no evidence either way.
                res.t = 0.0;
                res.p_value = 1.0;
            } else {
                res.t = std::numeric_limits<double>::infinity() * (res.beta > 0 ? 1.0 : -1.0);
                res.p_value = 0.0;
            }
            for (Eigen::Index c = 0; c < design.cols(); ++c) {
                if (c == DesignMatrix::group_col) continue;
                res.covariate_coefficients.emplace_back(design.column_names[static_cast<std::size_t>(c)],
                                                        fit.coefficients(c));
            }
        } catch (const std::exception& e) {
            res.failed = true;
            res.failure_reason = e.what();
            res.beta = res.se = res.t = std::numeric_limits<double>::quiet_NaN();
            res.p_value = std::numeric_limits<double>::quiet_NaN();
        }
    });
    return results;
}

void write_results(const std::vector<TaxonTestResult>& results, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.precision(10);

    const TaxonTestResult* reference = nullptr;
    for (const auto& res : results)
        if (!res.failed) {
            reference = &res;
            break;
        }
    const std::size_t n_cov = reference ? reference->covariate_coefficients.size() : 0;

    out << "taxon\tbeta\tse\tt\tp_value\tq_value";
    if (reference)
        for (const auto& [name, value] : reference->covariate_coefficients) out << '\t' << name;
    out << "\tstatus\n";
    for (const auto& res : results) {
        out << res.taxon << '\t' << res.beta << '\t' << res.se << '\t' << res.t << '\t'
            << res.p_value << '\t' << res.q_value;
        if (res.failed) {
            for (std::size_t c = 0; c < n_cov; ++c) out << "\tnan";
        } else {
            for (const auto& [name, value] : res.covariate_coefficients) out << '\t' << value;
        }
        out << '\t' << (res.failed ? "failed" : "ok") << '\n';
    }
}

} // namespace sohpie
