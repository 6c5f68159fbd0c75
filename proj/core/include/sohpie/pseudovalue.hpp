#pragma once

#include "sohpie/sparcc.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <vector>

namespace sohpie {

// Degree centrality per taxon: marginal sum of an association matrix column,
// unit diagonal included.
struct CentralityVector {
    Eigen::VectorXd theta;
    std::vector<std::string> taxon_names;
};

// Jackknife pseudo-values, one row per subject. group_labels carries the raw
// group level string of each row so blocks can be stacked across groups.
struct PseudoValueMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> sample_ids;
    std::vector<std::string> group_labels;
    std::vector<std::string> taxon_names;

    Eigen::Index n() const { return values.rows(); }
    Eigen::Index p() const { return values.cols(); }
};

struct JackknifeConfig {
    std::size_t threads = 0; // 0 = auto (SOHPIE_THREADS or hardware)
    SparccConfig sparcc;
};

CentralityVector degree_centrality(const AssociationMatrix& A);

// theta_tilde(i, k) = n * theta_full(k) - (n - 1) * theta_loo_i(k), with the
// leave-one-out association matrices re-estimated without subject i. The
// leave-one-out map is parallel; results do not depend on the thread count.
PseudoValueMatrix jackknife_pseudovalues(const OtuTable& group_counts,
                                         const JackknifeConfig& cfg,
                                         const std::string& group_label);

// Two-time-point variant: the base statistic is the marginal sum of
// D = A(after) - A(before); leave-one-out drops subject i from both blocks.
PseudoValueMatrix paired_difference_pseudovalues(const OtuTable& before,
                                                 const OtuTable& after,
                                                 const JackknifeConfig& cfg,
                                                 const std::string& group_label);

PseudoValueMatrix concat_pseudovalues(const PseudoValueMatrix& a, const PseudoValueMatrix& b);

void write_pseudovalues(const PseudoValueMatrix& matrix, const std::string& path);

} // namespace sohpie
