#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace sohpie {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

// Metrics with zero denominators are reported as absent, not as 0.
struct MetricSummary {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> accuracy;

    int n_undefined() const {
        return !precision.has_value() + !recall.has_value() + !f1.has_value() +
               !accuracy.has_value();
    }
};

// tp = truly DC and declared (q < alpha, strict), etc.
ConfusionCounts confusion(const std::vector<int>& eta, const std::vector<double>& q, double alpha);

MetricSummary summarize(const ConfusionCounts& counts);

} // namespace sohpie
