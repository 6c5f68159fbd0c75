#include "sohpie/simulation.hpp"

#include "sohpie/parallel.hpp"
#include "sohpie/rng.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace sohpie {

Eigen::Index AdjacencyMatrix::degree(Eigen::Index k) const {
    return omega.col(k).sum();
}

Eigen::Index AdjacencyMatrix::edge_count() const {
    return omega.sum() / 2;
}

std::vector<std::array<Eigen::Index, 2>> AdjacencyMatrix::edges() const {
    std::vector<std::array<Eigen::Index, 2>> out;
    for (Eigen::Index j = 0; j < p(); ++j)
        for (Eigen::Index k = j + 1; k < p(); ++k)
            if (omega(j, k) != 0) out.push_back({j, k});
    return out;
}

std::string to_string(Scenario scenario) {
    return scenario == Scenario::univariable ? "univariable" : "multivariable";
}

Scenario scenario_from_string(const std::string& name) {
    if (name == "univariable") return Scenario::univariable;
    if (name == "multivariable") return Scenario::multivariable;
    throw std::invalid_argument("unknown scenario '" + name +
                                "' (expected univariable or multivariable)");
}

std::string to_string(UndefinedPolicy policy) {
    return policy == UndefinedPolicy::skip ? "skip" : "zero_fill";
}

UndefinedPolicy undefined_policy_from_string(const std::string& name) {
    if (name == "skip") return UndefinedPolicy::skip;
    if (name == "zero_fill" || name == "zero") return UndefinedPolicy::zero_fill;
    throw std::invalid_argument("unknown undefined-cell policy '" + name +
                                "' (expected skip or zero_fill)");
}

void SimulationConfig::validate() const {
    if (p < 2) throw std::invalid_argument("simulation: p must be >= 2");
    if (n < 6) throw std::invalid_argument("simulation: n must be >= 6");
    auto check_delta = [&](double delta, const char* name) {
        if (!(delta >= 0.0 && delta < 1.0))
            throw std::invalid_argument(std::string("simulation: ") + name +
                                        " must lie in [0, 1)");
        if (delta > 0.0 && delta * static_cast<double>(p) < 1.0)
            throw std::invalid_argument(std::string("simulation: ") + name + " * p = " +
                                        std::to_string(delta * static_cast<double>(p)) +
                                        " spikes no taxon; need delta * p >= 1 or delta = 0");
    };
    check_delta(delta1, "delta1");
    check_delta(delta2, "delta2");
    if (read_depth_mean < 1)
        throw std::invalid_argument("simulation: read_depth_mean must be a positive integer");
    if (!(zero_inflation >= 0.0 && zero_inflation < 1.0))
        throw std::invalid_argument("simulation: zero_inflation must lie in [0, 1)");
    if (!(effect_strength >= 0.0))
        throw std::invalid_argument("simulation: effect_strength must be >= 0");
    if (ba_edges_per_node < 1)
        throw std::invalid_argument("simulation: ba_edges_per_node must be >= 1");
    if (p < ba_edges_per_node + 1)
        throw std::invalid_argument("simulation: p must be >= ba_edges_per_node + 1");
    if (!(edge_weight > 0.0 && edge_weight <= 1.0))
        throw std::invalid_argument("simulation: edge_weight must lie in (0, 1]");
}

Eigen::Index SimulationConfig::spike_count(double delta) const {
    return static_cast<Eigen::Index>(std::floor(delta * static_cast<double>(p)));
}

AdjacencyMatrix generate_ba_network(Eigen::Index p, Eigen::Index m, std::uint64_t seed) {
    if (m < 1) throw std::invalid_argument("generate_ba_network: m must be >= 1");
    if (p < m + 1)
        throw std::invalid_argument("generate_ba_network: p must be >= m + 1, got p=" +
                                    std::to_string(p) + ", m=" + std::to_string(m));
    AdjacencyMatrix net;
    net.omega = Eigen::MatrixXi::Zero(p, p);
    std::vector<std::int64_t> degree(static_cast<std::size_t>(p), 0);
    auto connect = [&](Eigen::Index a, Eigen::Index b) {
        if (net.omega(a, b) != 0) return;
        net.omega(a, b) = net.omega(b, a) = 1;
        ++degree[static_cast<std::size_t>(a)];
        ++degree[static_cast<std::size_t>(b)];
    };
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index k = 0; k < j; ++k) connect(j, k);

    auto rng = make_rng(seed, 0);
    for (Eigen::Index v = m; v < p; ++v) {
        // Degree snapshot at arrival; m distinct targets, degree-weighted.
        std::vector<Eigen::Index> cand(static_cast<std::size_t>(v));
        std::iota(cand.begin(), cand.end(), Eigen::Index{0});
        std::vector<std::int64_t> weight(cand.size());
        for (std::size_t i = 0; i < cand.size(); ++i)
            weight[i] = degree[static_cast<std::size_t>(cand[i])];

        std::vector<Eigen::Index> targets;
        const std::size_t picks = std::min(cand.size(), static_cast<std::size_t>(m));
        for (std::size_t t = 0; t < picks; ++t) {
            const std::int64_t total = std::accumulate(weight.begin(), weight.end(), std::int64_t{0});
            std::size_t chosen = 0;
            if (total <= 0) {
                chosen = std::uniform_int_distribution<std::size_t>(0, cand.size() - 1)(rng);
            } else {
                std::int64_t r = std::uniform_int_distribution<std::int64_t>(0, total - 1)(rng);
                while (r >= weight[chosen]) r -= weight[chosen++];
            }
            targets.push_back(cand[chosen]);
            cand[chosen] = cand.back();
            weight[chosen] = weight.back();
            cand.pop_back();
            weight.pop_back();
        }
        for (Eigen::Index target : targets) connect(v, target);
    }
    return net;
}

std::pair<AdjacencyMatrix, AdjacencyMatrix>
perturb_networks(const AdjacencyMatrix& base, const std::vector<Eigen::Index>& spikes1,
                 const std::vector<Eigen::Index>& spikes2) {
    const Eigen::Index p = base.p();
    auto knock_out = [&](const std::vector<Eigen::Index>& spikes) {
        AdjacencyMatrix out = base;
        for (Eigen::Index s : spikes) {
            if (s < 0 || s >= p)
                throw std::out_of_range("perturb_networks: spike index " + std::to_string(s) +
                                        " outside [0, " + std::to_string(p) + ")");
            out.omega.row(s).setZero();
            out.omega.col(s).setZero();
        }
        return out;
    };
    return {knock_out(spikes1), knock_out(spikes2)};
}

std::vector<int> true_dc_labels(const AdjacencyMatrix& omega1, const AdjacencyMatrix& omega2) {
    if (omega1.p() != omega2.p())
        throw std::invalid_argument("true_dc_labels: matrices differ in size");
    std::vector<int> eta(static_cast<std::size_t>(omega1.p()), 0);
    for (Eigen::Index k = 0; k < omega1.p(); ++k)
        eta[static_cast<std::size_t>(k)] =
            (omega1.omega.col(k).array() != omega2.omega.col(k).array()).any() ? 1 : 0;
    return eta;
}

namespace {

std::string padded(const char* prefix, Eigen::Index value, Eigen::Index max_value) {
    std::string digits = std::to_string(value);
    const std::size_t width = std::max<std::size_t>(std::to_string(max_value).size(), 2);
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return prefix + digits;
}

std::string format_cell(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

std::vector<double> standardized(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    std::vector<double> out(v.size(), 0.0);
    if (sd > 0.0)
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd;
    return out;
}

// Lower Cholesky factor of I + w * omega after clipping eigenvalues at 1e-6
// and rescaling to unit diagonal; retries with growing diagonal jitter.
Eigen::MatrixXd copula_cholesky(const AdjacencyMatrix& net, double edge_weight) {
    const Eigen::Index p = net.p();
    const Eigen::MatrixXd target =
        Eigen::MatrixXd::Identity(p, p) + edge_weight * net.omega.cast<double>();
    double jitter = 0.0;
    for (int attempt = 0; attempt < 5; ++attempt) {
        Eigen::MatrixXd s = target;
        s.diagonal().array() += jitter;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
        if (es.info() == Eigen::Success) {
            const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(1e-6);
            Eigen::MatrixXd pd =
                es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
            const Eigen::VectorXd d = pd.diagonal().cwiseSqrt();
            pd = pd.cwiseQuotient(d * d.transpose());
            pd = (0.5 * (pd + pd.transpose())).eval();
            pd.diagonal().setOnes();
            Eigen::LLT<Eigen::MatrixXd> llt(pd);
            if (llt.info() == Eigen::Success) return llt.matrixL();
        }
        jitter = jitter == 0.0 ? 1e-8 : jitter * 100.0;
    }
    throw std::runtime_error(
        "generate_synthetic_dataset: positive-definite projection failed after 5 attempts");
}

} // namespace

SyntheticDataset generate_synthetic_dataset(const SimulationConfig& cfg) {
    cfg.validate();
    const Eigen::Index p = cfg.p;
    const Eigen::Index n = cfg.n;
    const boost::math::normal_distribution<double> norm01;
    std::normal_distribution<double> std_normal(0.0, 1.0);

    auto label_rng = make_rng(cfg.seed, 0);
    std::bernoulli_distribution half(0.5);
    std::vector<int> z(static_cast<std::size_t>(n));
    for (auto& zi : z) zi = half(label_rng) ? 1 : 0;

    auto covariate_rng = make_rng(cfg.seed, 1);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const bool shifted = cfg.scenario == Scenario::multivariable && z[i] == 1;
        x[i] = 55.0 + (shifted ? cfg.covariate_shift : 0.0) + 10.0 * std_normal(covariate_rng);
    }

    const AdjacencyMatrix base =
        generate_ba_network(p, cfg.ba_edges_per_node, derive_seed(cfg.seed, 2));

    auto spike_rng = make_rng(cfg.seed, 3);
    std::vector<Eigen::Index> eligible;
    for (Eigen::Index k = 0; k < p; ++k)
        if (base.degree(k) >= 1) eligible.push_back(k);
    auto draw_spikes = [&](double delta, const char* name) {
        const std::size_t want = static_cast<std::size_t>(cfg.spike_count(delta));
        if (want > eligible.size())
            throw std::runtime_error("generate_synthetic_dataset: " + std::to_string(want) +
                                     " spikes requested for " + name + " but only " +
                                     std::to_string(eligible.size()) +
                                     " taxa have degree >= 1");
        std::vector<Eigen::Index> pool = eligible;
        for (std::size_t t = 0; t < want; ++t) {
            const std::size_t j =
                t + std::uniform_int_distribution<std::size_t>(0, pool.size() - 1 - t)(spike_rng);
            std::swap(pool[t], pool[j]);
        }
        std::vector<Eigen::Index> spikes(pool.begin(),
                                         pool.begin() + static_cast<std::ptrdiff_t>(want));
        std::sort(spikes.begin(), spikes.end());
        return spikes;
    };
    const std::vector<Eigen::Index> spikes1 = draw_spikes(cfg.delta1, "group 1");
    const std::vector<Eigen::Index> spikes2 = draw_spikes(cfg.delta2, "group 2");

    auto [omega1, omega2] = perturb_networks(base, spikes1, spikes2);
    SimulationTruth truth{omega1, omega2, true_dc_labels(omega1, omega2), spikes1, spikes2};

    auto mu_rng = make_rng(cfg.seed, 4);
    Eigen::VectorXd mu(p);
    for (Eigen::Index k = 0; k < p; ++k) mu(k) = std_normal(mu_rng);

    std::vector<double> z_double(z.begin(), z.end());
    const std::vector<double> shift_covariate =
        cfg.scenario == Scenario::univariable ? standardized(z_double) : standardized(x);

    auto generate_group = [&](int label, const std::vector<Eigen::Index>& spikes,
                              const AdjacencyMatrix& omega, std::uint64_t stream) {
        std::vector<Eigen::Index> members;
        for (Eigen::Index i = 0; i < n; ++i)
            if (z[static_cast<std::size_t>(i)] == label) members.push_back(i);

        const Eigen::MatrixXd chol = copula_cholesky(omega, cfg.edge_weight);
        std::vector<char> spiked(static_cast<std::size_t>(p), 0);
        for (Eigen::Index s : spikes) spiked[static_cast<std::size_t>(s)] = 1;

        auto rng = make_rng(cfg.seed, stream);
        std::bernoulli_distribution dropout(cfg.zero_inflation);
        std::poisson_distribution<std::int64_t> depth(static_cast<double>(cfg.read_depth_mean));

        OtuTable table;
        table.counts = CountMatrix::Zero(static_cast<Eigen::Index>(members.size()), p);
        for (Eigen::Index k = 0; k < p; ++k)
            table.taxon_names.push_back(padded("taxon_", k + 1, p));

        Eigen::VectorXd latent(p), abundance(p);
        for (std::size_t r = 0; r < members.size(); ++r) {
            const Eigen::Index sample = members[r];
            table.sample_ids.push_back(padded("s", sample + 1, n));

            for (Eigen::Index k = 0; k < p; ++k) latent(k) = std_normal(rng);
            latent = (chol * latent).eval();

            for (Eigen::Index k = 0; k < p; ++k) {
                // Copula transform to a log-normal truncated at its 99.9th
                // percentile: u spans (0, 0.999) instead of (0, 1).
                double u = 0.999 * boost::math::cdf(norm01, latent(k));
                u = std::clamp(u, std::numeric_limits<double>::min(), 0.999);
                double log_abundance = mu(k) + boost::math::quantile(norm01, u);
                if (spiked[static_cast<std::size_t>(k)])
                    log_abundance +=
                        cfg.effect_strength * shift_covariate[static_cast<std::size_t>(sample)];
                const bool dropped = dropout(rng);
                abundance(k) = dropped ? 0.0 : std::exp(log_abundance);
            }

            const std::int64_t reads = depth(rng);
            const double total = abundance.sum();
            if (reads <= 0 || total <= 0.0) continue;

            Eigen::Index last_positive = 0;
            for (Eigen::Index k = 0; k < p; ++k)
                if (abundance(k) > 0.0) last_positive = k;

            std::int64_t remaining = reads;
            double remaining_prob = 1.0;
            for (Eigen::Index k = 0; k <= last_positive && remaining > 0; ++k) {
                const double prob = abundance(k) / total;
                if (k == last_positive) {
                    table.counts(static_cast<Eigen::Index>(r), k) = remaining;
                    remaining = 0;
                    break;
                }
                if (prob <= 0.0) continue;
                const double conditional =
                    remaining_prob > 0.0 ? std::clamp(prob / remaining_prob, 0.0, 1.0) : 1.0;
                std::int64_t c = remaining;
                if (conditional < 1.0)
                    c = std::binomial_distribution<std::int64_t>(remaining, conditional)(rng);
                table.counts(static_cast<Eigen::Index>(r), k) = c;
                remaining -= c;
                remaining_prob -= prob;
            }
        }
        return table;
    };

    SyntheticDataset dataset;
    dataset.truth = std::move(truth);
    dataset.group1 = generate_group(0, spikes1, dataset.truth.omega1, 5);
    dataset.group2 = generate_group(1, spikes2, dataset.truth.omega2, 6);

    CovariateColumn group_col;
    group_col.name = SyntheticDataset::group_column;
    group_col.kind = ColumnKind::categorical;
    CovariateColumn x_col;
    x_col.name = SyntheticDataset::covariate_column;
    x_col.kind = ColumnKind::numeric;
    for (Eigen::Index i = 0; i < n; ++i) {
        dataset.covariates.sample_ids.push_back(padded("s", i + 1, n));
        group_col.cells.push_back(z[static_cast<std::size_t>(i)] == 0
                                      ? SyntheticDataset::group1_label
                                      : SyntheticDataset::group2_label);
        x_col.cells.push_back(format_cell(x[static_cast<std::size_t>(i)]));
    }
    dataset.covariates.columns = {std::move(group_col), std::move(x_col)};
    return dataset;
}

void write_truth_json(const SyntheticDataset& dataset, const SimulationConfig& cfg,
                      const std::string& path) {
    nlohmann::ordered_json j;
    j["config"] = {{"p", cfg.p},
                   {"n", cfg.n},
                   {"delta1", cfg.delta1},
                   {"delta2", cfg.delta2},
                   {"scenario", to_string(cfg.scenario)},
                   {"read_depth_mean", cfg.read_depth_mean},
                   {"zero_inflation", cfg.zero_inflation},
                   {"effect_strength", cfg.effect_strength},
                   {"ba_edges_per_node", cfg.ba_edges_per_node},
                   {"edge_weight", cfg.edge_weight},
                   {"covariate_shift", cfg.covariate_shift},
                   {"seed", cfg.seed}};
    j["taxa"] = dataset.group1.taxon_names;
    j["eta"] = dataset.truth.eta;
    j["spikes_group1"] = dataset.truth.spikes1;
    j["spikes_group2"] = dataset.truth.spikes2;
    j["omega1_edges"] = dataset.truth.omega1.edges();
    j["omega2_edges"] = dataset.truth.omega2.edges();
    j["group_sizes"] = {dataset.group1.n(), dataset.group2.n()};

    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_truth_json: cannot open '" + path + "'");
    out << j.dump(2) << '\n';
}

ReplicateTable run_replicates(const SimulationConfig& cfg, std::size_t replicates, double alpha,
                              const AnalysisOptions& options) {
    if (replicates < 1)
        throw std::invalid_argument("run_replicates: at least one replicate required");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("run_replicates: alpha must lie in (0, 1)");
    cfg.validate();

    ReplicateTable table;
    table.rows.resize(replicates);
    const std::size_t workers = resolve_threads(options.threads);

    parallel_for(replicates, workers, [&](std::size_t r) {
        ReplicateOutcome& row = table.rows[r];
        row.replicate = r;
        try {
            const std::uint64_t base_seed = derive_seed(cfg.seed, r);
            SimulationConfig replicate_cfg = cfg;
            replicate_cfg.seed = derive_seed(base_seed, 0);
            const SyntheticDataset dataset = generate_synthetic_dataset(replicate_cfg);

            AnalysisOptions replicate_opt = options;
            replicate_opt.seed = derive_seed(base_seed, 1);
            replicate_opt.threads = 1; // replicates own the parallelism
            replicate_opt.alpha = alpha;
            replicate_opt.reference_group = SyntheticDataset::group1_label;
            replicate_opt.covariate_cols =
                cfg.scenario == Scenario::multivariable
                    ? std::vector<std::string>{SyntheticDataset::covariate_column}
                    : std::vector<std::string>{};

            const OtuTable stacked = concat_samples(dataset.group1, dataset.group2);
            const AnalysisResult res =
                analyze(stacked, dataset.covariates, SyntheticDataset::group_column,
                        replicate_opt);

            std::unordered_map<std::string, double> q_by_taxon;
            for (const auto& test : res.tests) q_by_taxon.emplace(test.taxon, test.q_value);
            std::vector<double> q;
            q.reserve(dataset.group1.taxon_names.size());
            for (const auto& taxon : dataset.group1.taxon_names) {
                auto it = q_by_taxon.find(taxon);
                q.push_back(it == q_by_taxon.end() ? std::numeric_limits<double>::quiet_NaN()
                                                   : it->second);
            }
            row.counts = confusion(dataset.truth.eta, q, alpha);
            row.metrics = summarize(row.counts);
        } catch (const std::exception& e) {
            row.failed = true;
            row.failure_reason = e.what();
        }
    });

    for (const auto& row : table.rows)
        if (row.failed) ++table.n_failed;
    return table;
}

namespace {

MetricMoments moments(const std::vector<double>& values) {
    MetricMoments m;
    m.n = values.size();
    if (values.empty()) return m;
    m.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - m.mean) * (v - m.mean);
        m.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return m;
}

} // namespace

ReplicateSummary summarize_replicates(const ReplicateTable& table, UndefinedPolicy policy) {
    ReplicateSummary summary;
    summary.policy = policy;
    summary.replicates = table.rows.size();
    summary.failed = table.n_failed;

    std::vector<double> precision, recall, f1, accuracy;
    auto take = [&](std::vector<double>& dest, const std::optional<double>& cell) {
        if (cell.has_value()) {
            dest.push_back(*cell);
        } else {
            ++summary.undefined_cells;
            if (policy == UndefinedPolicy::zero_fill) dest.push_back(0.0);
        }
    };
    for (const auto& row : table.rows) {
        if (row.failed) continue;
        take(precision, row.metrics.precision);
        take(recall, row.metrics.recall);
        take(f1, row.metrics.f1);
        take(accuracy, row.metrics.accuracy);
    }
    summary.precision = moments(precision);
    summary.recall = moments(recall);
    summary.f1 = moments(f1);
    summary.accuracy = moments(accuracy);
    return summary;
}

} // namespace sohpie
