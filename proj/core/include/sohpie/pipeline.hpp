#pragma once

#include "sohpie/fdr.hpp"
#include "sohpie/io.hpp"
#include "sohpie/pseudovalue.hpp"
#include "sohpie/regression.hpp"
#include "sohpie/sparcc.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sohpie {

struct AnalysisOptions {
    double alpha = 0.05;
    FdrMethod fdr_method = FdrMethod::qvalue;
    double coverage = 0.75;
    double pseudocount = 1.0;
    double sparcc_threshold = 0.1;
    std::size_t sparcc_iterations = 20;
    std::size_t threads = 0;          // 0 = auto (SOHPIE_THREADS or hardware)
    std::uint64_t seed = 0;
    std::string reference_group;      // "" = alphabetically first level
    double prevalence = 0.0;          // 0 = keep every taxon
    std::vector<std::string> covariate_cols; // empty = group-only model

    SparccConfig sparcc_config() const;
    JackknifeConfig jackknife_config() const;
    TaxonTestConfig taxon_test_config() const;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct AnalysisResult {
    ExclusionReport report;
    std::vector<std::string> dropped_taxa; // prevalence filter casualties
    std::string group_level1;
    std::string group_level2;
    AssociationMatrix assoc1;
    AssociationMatrix assoc2;
    PseudoValueMatrix pseudovalues;
    DesignMatrix design;
    std::vector<TaxonTestResult> tests;   // q_value filled per fdr_method
    FdrResult fdr;
    std::vector<std::string> significant; // taxa with q < alpha
    std::vector<StageTiming> timings;

    double seconds(const std::string& stage) const;
};

// io -> per-group sparcc -> jackknife pseudo-values -> robust regression -> fdr.
AnalysisResult analyze(const OtuTable& otu, const CovariateFrame& covs,
                       const std::string& group_col, const AnalysisOptions& opt);

// Two-time-point variant: association matrices are per-group differences
// A(after) - A(before); pseudo-values drop a subject from both time points.
// Sample ids must match between the tables; rows may be ordered differently.
AnalysisResult analyze_paired(const OtuTable& before, const OtuTable& after,
                              const CovariateFrame& covs, const std::string& group_col,
                              const AnalysisOptions& opt);

} // namespace sohpie
