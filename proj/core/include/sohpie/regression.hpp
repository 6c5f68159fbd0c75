#pragma once

#include "sohpie/io.hpp"
#include "sohpie/pseudovalue.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace sohpie {

// Intercept column, 0/1 group indicator, then expanded covariate columns.
struct DesignMatrix {
    Eigen::MatrixXd X;
    std::vector<std::string> column_names;
    std::vector<std::string> warnings;

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index cols() const { return X.cols(); }
    static constexpr Eigen::Index group_col = 1;
};

// Treatment-codes categoricals against their alphabetically first level and
// drops constant columns with a warning. Group coding: reference level -> 0.
DesignMatrix build_design(const AlignedDataset& data,
                          const std::vector<std::string>& covariate_cols);
// Uses every covariate column carried by the aligned frame.
DesignMatrix build_design(const AlignedDataset& data);

struct LtsConfig {
    double coverage = 0.75;        // inlier fraction; h = floor(n * coverage)
    int elemental_starts = 500;
    int initial_c_steps = 2;
    int refine_candidates = 10;
    int max_refine_steps = 50;
    Eigen::Index exhaustive_cutoff = 12; // n <= cutoff enumerates all h-subsets
    std::uint64_t seed = 0;
};

struct LtsFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd standard_errors;
    std::vector<std::string> coefficient_names;
    Eigen::Index h = 0;
    std::vector<Eigen::Index> inlier_indices; // sorted ascending
    double scale = 0.0;                       // sqrt(RSS_h / (h - q)) on the inlier set
    Eigen::Index df = 0;                      // h - q
    double objective = 0.0;                   // sum of the h smallest squared residuals
};

// Least trimmed squares: minimizes the sum of the h smallest squared
// residuals. Exhaustive subset search for small n, randomized elemental
// starts with concentration steps otherwise. Deterministic given cfg.seed.
LtsFit lts_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LtsConfig& cfg);

struct TaxonTestResult {
    std::string taxon;
    double beta = 0.0;
    double se = 0.0;
    double t = 0.0;
    double p_value = 1.0;
    double q_value = std::numeric_limits<double>::quiet_NaN(); // filled by fdr
    std::vector<std::pair<std::string, double>> covariate_coefficients;
    bool failed = false;
    std::string failure_reason;
};

struct TaxonTestConfig {
    LtsConfig lts;
    std::size_t threads = 0;
};

// Per-taxon robust fits of pseudo-values on the design; per-taxon random
// streams derive from (seed, taxon index) so results are thread-invariant.
std::vector<TaxonTestResult> taxon_tests(const PseudoValueMatrix& pv,
                                         const DesignMatrix& design,
                                         const TaxonTestConfig& cfg);

void write_results(const std::vector<TaxonTestResult>& results, const std::string& path);

} // namespace sohpie
