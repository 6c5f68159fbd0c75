#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sohpie {

enum class FdrMethod { bh, qvalue };

struct FdrResult {
    std::vector<double> p_values;
    std::vector<double> q_values;
    double pi0 = 1.0;
    FdrMethod method = FdrMethod::bh;
    std::vector<std::string> warnings;
};

// Benjamini-Hochberg step-up adjustment (pi0 fixed at 1).
FdrResult bh_adjust(const std::vector<double>& p);

// Storey-style q-values: pi0 estimated over the lambda grid and smoothed by a
// least-squares cubic evaluated at the largest lambda. Falls back to BH with
// a warning when fewer than 10 p-values are supplied.
FdrResult qvalue(const std::vector<double>& p, const std::vector<double>& lambda_grid);
FdrResult qvalue(const std::vector<double>& p);

std::vector<double> default_lambda_grid(); // 0.05 to 0.90 step 0.05

// Indices with q strictly below alpha.
std::vector<std::size_t> significant_taxa(const FdrResult& result, double alpha);

} // namespace sohpie
