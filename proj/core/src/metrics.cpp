#include "sohpie/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sohpie {

ConfusionCounts confusion(const std::vector<int>& eta, const std::vector<double>& q,
                          double alpha) {
    if (eta.size() != q.size()) {
        throw std::invalid_argument("confusion: label vector has " + std::to_string(eta.size()) +
                                    " entries but q-value vector has " + std::to_string(q.size()));
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("confusion: alpha must lie in (0, 1)");
    }
    ConfusionCounts counts;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        if (eta[i] != 0 && eta[i] != 1) {
            throw std::invalid_argument("confusion: labels must be 0 or 1, got " +
                                        std::to_string(eta[i]) + " at index " + std::to_string(i));
        }
        // NaN q-values compare false, so they are never declared significant.
        const bool declared = q[i] < alpha;
        if (eta[i] == 1) {
            declared ? ++counts.tp : ++counts.fn;
        } else {
            declared ? ++counts.fp : ++counts.tn;
        }
    }
    return counts;
}

MetricSummary summarize(const ConfusionCounts& c) {
    MetricSummary s;
    const double tp = static_cast<double>(c.tp);
    const double fp = static_cast<double>(c.fp);
    const double tn = static_cast<double>(c.tn);
    const double fn = static_cast<double>(c.fn);

    if (c.tp + c.fp > 0) {
        s.precision = tp / (tp + fp);
    }
    if (c.tp + c.fn > 0) {
        s.recall = tp / (tp + fn);
    }
    if (s.precision && s.recall && (*s.precision + *s.recall) > 0.0) {
        s.f1 = 2.0 * (*s.precision) * (*s.recall) / (*s.precision + *s.recall);
    }
    if (c.total() > 0) {
        s.accuracy = (tp + tn) / static_cast<double>(c.total());
    }
    return s;
}

} // namespace sohpie
