#pragma once

#include "sohpie/io.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace sohpie {

// Pairwise log-ratio variances t_jk = Var(log u_j / u_k); zero diagonal.
struct VariationMatrix {
    Eigen::MatrixXd t;
};

// Per-taxon basis variances sigma_j^2 on the log scale.
struct BasisVariances {
    Eigen::VectorXd sigma2;
    int clamped = 0; // count of entries raised to the positivity floor
};

struct AssociationMatrix {
    Eigen::MatrixXd rho;
    std::vector<std::string> taxon_names;

    Eigen::Index p() const { return rho.rows(); }
};

struct SparccConfig {
    int max_outer_iterations = 20;
    double exclusion_threshold = 0.1; // pair exclusion kicks in at |rho| >= threshold
    double pseudocount = 1.0;
    int inner_dirichlet_draws = 0;    // 0 = deterministic pseudocount fractions
    std::uint64_t seed = 0;
};

// Switches exclusion handling between one-shot and the iterative procedure.
struct ExcludedPairs {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;

    bool contains(Eigen::Index j, Eigen::Index k) const;
};

// Row-normalizes counts after adding the pseudocount; each row sums to 1.
Eigen::MatrixXd to_fractions(const CountMatrix& counts, double pseudocount);

// Unbiased (n-1) sample variances of all pairwise log ratios.
VariationMatrix variation_matrix(const Eigen::MatrixXd& fractions);

// Solves the approximate linear system tying row sums of T (restricted to
// non-excluded pairs) to the basis variances. Non-positive solutions are
// clamped to a small floor.
BasisVariances basis_variances(const VariationMatrix& T, const ExcludedPairs& excluded);

AssociationMatrix correlations(const VariationMatrix& T, const BasisVariances& s2);

AssociationMatrix sparcc(const OtuTable& counts, const SparccConfig& cfg);
// Same procedure starting from a precomputed count block.
AssociationMatrix sparcc(const CountMatrix& counts,
                         const std::vector<std::string>& taxon_names,
                         const SparccConfig& cfg);

void write_association_matrix(const AssociationMatrix& matrix, const std::string& path);
AssociationMatrix load_association_matrix(const std::string& path);

} // namespace sohpie
