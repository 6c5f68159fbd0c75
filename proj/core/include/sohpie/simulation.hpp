#pragma once

#include "sohpie/io.hpp"
#include "sohpie/metrics.hpp"
#include "sohpie/pipeline.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace sohpie {

// Undirected simple graph as a 0/1 matrix; symmetric with zero diagonal.
struct AdjacencyMatrix {
    Eigen::MatrixXi omega;

    Eigen::Index p() const { return omega.rows(); }
    Eigen::Index degree(Eigen::Index k) const;
    Eigen::Index edge_count() const;
    std::vector<std::array<Eigen::Index, 2>> edges() const; // each {j, k} with j < k
};

enum class Scenario { univariable, multivariable };

std::string to_string(Scenario scenario);
Scenario scenario_from_string(const std::string& name);

struct SimulationConfig {
    Eigen::Index p = 20;              // taxa
    Eigen::Index n = 50;              // total samples across both groups
    double delta1 = 0.0;              // spiked fraction, group 1
    double delta2 = 0.0;              // spiked fraction, group 2
    Scenario scenario = Scenario::multivariable;
    std::int64_t read_depth_mean = 10000; // Poisson mean of per-sample totals
    double zero_inflation = 0.3;      // per-cell dropout rate
    double effect_strength = 1.0;     // log-scale shift per sd of the covariate
    Eigen::Index ba_edges_per_node = 1;
    double edge_weight = 0.6;         // latent correlation per network edge
    double covariate_shift = 5.0;     // multivariable: group-2 covariate mean offset
    std::uint64_t seed = 0;

    void validate() const;
    Eigen::Index spike_count(double delta) const; // floor(delta * p)
};

struct SimulationTruth {
    AdjacencyMatrix omega1;
    AdjacencyMatrix omega2;
    std::vector<int> eta;             // 1 iff the column differs between groups
    std::vector<Eigen::Index> spikes1;
    std::vector<Eigen::Index> spikes2;
};

// Preferential-attachment growth from an m-clique; every later node attaches
// m edges to distinct earlier nodes with probability proportional to degree
// (uniform while all degrees are zero).
AdjacencyMatrix generate_ba_network(Eigen::Index p, Eigen::Index m, std::uint64_t seed);

// Copies of `base` with every edge incident to a spiked node removed,
// one copy per group.
std::pair<AdjacencyMatrix, AdjacencyMatrix>
perturb_networks(const AdjacencyMatrix& base, const std::vector<Eigen::Index>& spikes1,
                 const std::vector<Eigen::Index>& spikes2);

std::vector<int> true_dc_labels(const AdjacencyMatrix& omega1, const AdjacencyMatrix& omega2);

struct SyntheticDataset {
    OtuTable group1;
    OtuTable group2;
    CovariateFrame covariates;        // all samples in generation order
    SimulationTruth truth;

    static constexpr const char* group_column = "group";
    static constexpr const char* covariate_column = "x";
    static constexpr const char* group1_label = "g1";
    static constexpr const char* group2_label = "g2";
};

// Group labels are Bernoulli(1/2); the covariate x is Normal(55, 10), with the
// group-2 mean shifted in the multivariable scenario. Counts are multinomial
// draws over a Gaussian-copula, zero-inflated truncated log-normal abundance
// model whose latent correlation is I + edge_weight * omega, projected to the
// nearest positive-definite matrix. The whole dataset is a pure function of cfg.
SyntheticDataset generate_synthetic_dataset(const SimulationConfig& cfg);

void write_truth_json(const SyntheticDataset& dataset, const SimulationConfig& cfg,
                      const std::string& path);

struct ReplicateOutcome {
    std::size_t replicate = 0;
    bool failed = false;
    std::string failure_reason;
    ConfusionCounts counts;
    MetricSummary metrics;
};

struct ReplicateTable {
    std::vector<ReplicateOutcome> rows;
    std::size_t n_failed = 0;
};

// One full generate -> analyze -> score pass per replicate. Replicate r uses
// streams derived from (cfg.seed, r), so the table is independent of the
// thread count and of completion order. Failures are kept as flagged rows.
ReplicateTable run_replicates(const SimulationConfig& cfg, std::size_t replicates, double alpha,
                              const AnalysisOptions& options);

// How replicate means treat undefined metric cells (e.g. precision with no
// declared positives): drop the cell or count it as zero.
enum class UndefinedPolicy { skip, zero_fill };

std::string to_string(UndefinedPolicy policy);
UndefinedPolicy undefined_policy_from_string(const std::string& name);

struct MetricMoments {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double sd = std::numeric_limits<double>::quiet_NaN();
    std::size_t n = 0; // replicates contributing
};

struct ReplicateSummary {
    MetricMoments precision;
    MetricMoments recall;
    MetricMoments f1;
    MetricMoments accuracy;
    std::size_t replicates = 0;       // requested
    std::size_t failed = 0;
    std::size_t undefined_cells = 0;  // undefined metric cells among non-failed rows
    UndefinedPolicy policy = UndefinedPolicy::skip;
};

ReplicateSummary summarize_replicates(const ReplicateTable& table, UndefinedPolicy policy);

} // namespace sohpie
