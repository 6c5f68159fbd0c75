#include "sohpie/sparcc.hpp"

#include "sohpie/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace sohpie {

namespace {

constexpr double kSigma2Floor = 1e-10;

struct ExclusionSaturated : std::runtime_error {
    ExclusionSaturated() : std::runtime_error("exclusion saturated basis-variance system") {}
};

} // namespace

bool ExcludedPairs::contains(Eigen::Index j, Eigen::Index k) const {
    for (const auto& [a, b] : pairs)
        if ((a == j && b == k) || (a == k && b == j)) return true;
    return false;
}

Eigen::MatrixXd to_fractions(const CountMatrix& counts, double pseudocount) {
    if (pseudocount <= 0.0)
        throw std::invalid_argument("to_fractions: pseudocount must be positive");
    Eigen::MatrixXd shifted = counts.cast<double>().array() + pseudocount;
    Eigen::VectorXd totals = shifted.rowwise().sum();
    return shifted.array().colwise() / totals.array();
}

VariationMatrix variation_matrix(const Eigen::MatrixXd& fractions) {
    const Eigen::Index n = fractions.rows();
    const Eigen::Index p = fractions.cols();
    if (n < 2)
        throw std::runtime_error("variation_matrix: need at least 2 samples, got " +
                                 std::to_string(n));
    if ((fractions.array() <= 0.0).any())
        throw std::invalid_argument("variation_matrix: fractions must be strictly positive");

    // Var(log u_j - log u_k) = S_jj + S_kk - 2 S_jk with S the sample
    // covariance of log fractions; one covariance pass covers all pairs.
    Eigen::MatrixXd logf = fractions.array().log();
    Eigen::RowVectorXd means = logf.colwise().mean();
    logf.rowwise() -= means;
    Eigen::MatrixXd cov = (logf.transpose() * logf) / static_cast<double>(n - 1);

    VariationMatrix out;
    out.t = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index k = j + 1; k < p; ++k) {
            double v = cov(j, j) + cov(k, k) - 2.0 * cov(j, k);
            if (v < 0.0) v = 0.0;
            out.t(j, k) = v;
            out.t(k, j) = v;
        }
    }
    return out;
}

BasisVariances basis_variances(const VariationMatrix& T, const ExcludedPairs& excluded) {
    const Eigen::Index p = T.t.rows();
    if (p < 4)
        throw std::invalid_argument("basis_variances: need at least 4 taxa, got " +
                                    std::to_string(p));

    std::vector<char> mask(static_cast<std::size_t>(p * p), 0);
    for (const auto& [a, bb] : excluded.pairs) {
        if (a < 0 || bb < 0 || a >= p || bb >= p)
            throw std::invalid_argument("basis_variances: excluded pair out of range");
        mask[static_cast<std::size_t>(a * p + bb)] = 1;
        mask[static_cast<std::size_t>(bb * p + a)] = 1;
    }

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        double partners = 0.0;
        for (Eigen::Index k = 0; k < p; ++k) {
            if (k == j) continue;
            if (mask[static_cast<std::size_t>(j * p + k)]) continue;
            M(j, k) = 1.0;
            b(j) += T.t(j, k);
            partners += 1.0;
        }
        M(j, j) = partners;
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (!lu.isInvertible()) throw ExclusionSaturated();

    BasisVariances out;
    out.sigma2 = lu.solve(b);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (out.sigma2(j) <= 0.0) {
            out.sigma2(j) = kSigma2Floor;
            ++out.clamped;
        }
    }
    return out;
}

AssociationMatrix correlations(const VariationMatrix& T, const BasisVariances& s2) {
    const Eigen::Index p = T.t.rows();
    Eigen::VectorXd sigma = s2.sigma2.array().sqrt();

    AssociationMatrix out;
    out.rho = Eigen::MatrixXd::Identity(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index k = j + 1; k < p; ++k) {
            double r = (s2.sigma2(j) + s2.sigma2(k) - T.t(j, k)) / (2.0 * sigma(j) * sigma(k));
            r = std::clamp(r, -1.0, 1.0);
            out.rho(j, k) = r;
            out.rho(k, j) = r;
        }
    }
    return out;
}

namespace {

// One full iterative estimate from a fixed fraction matrix.
Eigen::MatrixXd estimate_rho(const Eigen::MatrixXd& fractions, const SparccConfig& cfg) {
    const Eigen::Index p = fractions.cols();
    VariationMatrix T = variation_matrix(fractions);

    ExcludedPairs excluded;
    std::vector<char> excluded_mask(static_cast<std::size_t>(p * p), 0);
    std::vector<int> partners(static_cast<std::size_t>(p), static_cast<int>(p) - 1);
    Eigen::MatrixXd rho;

    for (int pass = 1; pass <= cfg.max_outer_iterations; ++pass) {
        BasisVariances s2;
        try {
            s2 = basis_variances(T, excluded);
        } catch (const ExclusionSaturated&) {
            std::cerr << "sparcc: exclusion saturated; returning last estimate\n";
            break;
        }
        rho = correlations(T, s2).rho;
        if (pass == cfg.max_outer_iterations) break;

        // Strongest not-yet-excluded pair at or above the threshold.
        double best = cfg.exclusion_threshold;
        Eigen::Index best_j = -1, best_k = -1;
        for (Eigen::Index j = 0; j < p; ++j) {
            for (Eigen::Index k = j + 1; k < p; ++k) {
                if (excluded_mask[static_cast<std::size_t>(j * p + k)]) continue;
                double mag = std::abs(rho(j, k));
                if (mag >= best) {
                    best = mag;
                    best_j = j;
                    best_k = k;
                }
            }
        }
        if (best_j < 0) break;
        // Never exclude a pair that would leave a taxon with no partners.
        if (partners[static_cast<std::size_t>(best_j)] <= 1 ||
            partners[static_cast<std::size_t>(best_k)] <= 1)
            break;
        excluded.pairs.emplace_back(best_j, best_k);
        excluded_mask[static_cast<std::size_t>(best_j * p + best_k)] = 1;
        excluded_mask[static_cast<std::size_t>(best_k * p + best_j)] = 1;
        --partners[static_cast<std::size_t>(best_j)];
        --partners[static_cast<std::size_t>(best_k)];
    }
    return rho;
}

Eigen::MatrixXd dirichlet_fractions(const CountMatrix& counts, std::mt19937_64& rng) {
    Eigen::MatrixXd fractions(counts.rows(), counts.cols());
    for (Eigen::Index i = 0; i < counts.rows(); ++i) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < counts.cols(); ++j) {
            std::gamma_distribution<double> gamma(static_cast<double>(counts(i, j)) + 1.0, 1.0);
            double g = gamma(rng);
            if (g <= 0.0) g = std::numeric_limits<double>::min();
            fractions(i, j) = g;
            total += g;
        }
        fractions.row(i) /= total;
    }
    return fractions;
}

} // namespace

AssociationMatrix sparcc(const CountMatrix& counts,
                         const std::vector<std::string>& taxon_names,
                         const SparccConfig& cfg) {
    if (counts.cols() < 4)
        throw std::invalid_argument("sparcc: need at least 4 taxa, got " +
                                    std::to_string(counts.cols()));
    if (counts.rows() < 2)
        throw std::runtime_error("sparcc: need at least 2 samples, got " +
                                 std::to_string(counts.rows()));
    if (cfg.max_outer_iterations < 1)
        throw std::invalid_argument("sparcc: max_outer_iterations must be >= 1");
    if (cfg.exclusion_threshold <= 0.0 || cfg.exclusion_threshold >= 1.0)
        throw std::invalid_argument("sparcc: exclusion_threshold must be in (0, 1)");

    const Eigen::Index p = counts.cols();
    Eigen::MatrixXd rho;
    if (cfg.inner_dirichlet_draws <= 0) {
        rho = estimate_rho(to_fractions(counts, cfg.pseudocount), cfg);
    } else {
        rho = Eigen::MatrixXd::Zero(p, p);
        for (int d = 0; d < cfg.inner_dirichlet_draws; ++d) {
            auto rng = make_rng(cfg.seed, static_cast<std::uint64_t>(d));
            rho += estimate_rho(dirichlet_fractions(counts, rng), cfg);
        }
        rho /= static_cast<double>(cfg.inner_dirichlet_draws);
        rho = rho.cwiseMax(-1.0).cwiseMin(1.0);
        rho.diagonal().setOnes();
    }

    AssociationMatrix out;
    out.rho = std::move(rho);
    out.taxon_names = taxon_names;
    return out;
}

AssociationMatrix sparcc(const OtuTable& counts, const SparccConfig& cfg) {
    return sparcc(counts.counts, counts.taxon_names, cfg);
}

void write_association_matrix(const AssociationMatrix& matrix, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.precision(10);
    out << "taxon";
    for (const auto& name : matrix.taxon_names) out << '\t' << name;
    out << '\n';
    for (Eigen::Index j = 0; j < matrix.p(); ++j) {
        out << matrix.taxon_names[static_cast<std::size_t>(j)];
        for (Eigen::Index k = 0; k < matrix.p(); ++k) out << '\t' << matrix.rho(j, k);
        out << '\n';
    }
}

AssociationMatrix load_association_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    AssociationMatrix out;
    {
        std::istringstream header(line);
        std::string field;
        std::getline(header, field, '\t'); // "taxon" corner cell
        while (std::getline(header, field, '\t')) out.taxon_names.push_back(field);
    }
    const auto p = static_cast<Eigen::Index>(out.taxon_names.size());
    out.rho.resize(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!std::getline(in, line))
            throw std::runtime_error(path + ": expected " + std::to_string(p) + " matrix rows");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream row(line);
        std::string field;
        std::getline(row, field, '\t');
        for (Eigen::Index k = 0; k < p; ++k) {
            if (!std::getline(row, field, '\t'))
                throw std::runtime_error(path + ": short row " + std::to_string(j + 2));
            out.rho(j, k) = std::stod(field);
        }
    }
    return out;
}

} // namespace sohpie
