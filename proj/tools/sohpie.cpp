#include "manifest.hpp"

#include <sohpie/metrics.hpp>
#include <sohpie/parallel.hpp>
#include <sohpie/pipeline.hpp>
#include <sohpie/rng.hpp>
#include <sohpie/simulation.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#ifndef SOHPIE_VERSION
#define SOHPIE_VERSION "0.0.0"
#endif

namespace {

using namespace sohpie;

// Pipeline flags shared by `analyze` and `benchmark`.
struct PipelineFlags {
    double alpha = 0.05;
    std::string fdr = "qvalue";
    double coverage = 0.75;
    double pseudocount = 1.0;
    double sparcc_threshold = 0.1;
    std::size_t sparcc_iters = 20;
    std::string threads = "auto";
    std::uint64_t seed = 0;
    std::string reference_group;
    double prevalence = 0.0;
};

std::size_t parse_threads(const std::string& text) {
    if (text == "auto") return 0;
    const bool digits = !text.empty() &&
                        std::all_of(text.begin(), text.end(),
                                    [](unsigned char c) { return std::isdigit(c); });
    unsigned long value = 0;
    if (digits) {
        try {
            value = std::stoul(text);
        } catch (const std::exception&) {
            value = 0;
        }
    }
    if (value == 0) throw CLI::ValidationError("--threads", "expected a positive integer or 'auto'");
    return static_cast<std::size_t>(value);
}

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f) {
    cmd->add_option("--alpha", f.alpha, "Significance level on q-values")->capture_default_str();
    cmd->add_option("--fdr", f.fdr, "Multiplicity adjustment: qvalue or bh")
        ->check(CLI::IsMember({"qvalue", "bh"}))
        ->capture_default_str();
    cmd->add_option("--coverage", f.coverage, "LTS inlier fraction; h = floor(n * coverage)")
        ->capture_default_str();
    cmd->add_option("--pseudocount", f.pseudocount, "Additive pseudocount before log-ratios")
        ->capture_default_str();
    cmd->add_option("--sparcc-threshold", f.sparcc_threshold,
                    "Strong-pair exclusion threshold on |rho|")
        ->capture_default_str();
    cmd->add_option("--sparcc-iters", f.sparcc_iters, "Max sparcc outer iterations")
        ->capture_default_str();
    cmd->add_option("--threads", f.threads,
                    "Worker threads ('auto' = SOHPIE_THREADS env or hardware)")
        ->capture_default_str();
    cmd->add_option("--seed", f.seed, "Master random seed")->capture_default_str();
    cmd->add_option("--reference-group", f.reference_group,
                    "Group level coded 0 (default: alphabetically first)");
    cmd->add_option("--prevalence", f.prevalence,
                    "Drop taxa present in fewer than this fraction of samples")
        ->capture_default_str();
}

AnalysisOptions to_options(const PipelineFlags& f) {
    AnalysisOptions opt;
    opt.alpha = f.alpha;
    opt.fdr_method = f.fdr == "bh" ? FdrMethod::bh : FdrMethod::qvalue;
    opt.coverage = f.coverage;
    opt.pseudocount = f.pseudocount;
    opt.sparcc_threshold = f.sparcc_threshold;
    opt.sparcc_iterations = f.sparcc_iters;
    opt.threads = parse_threads(f.threads);
    opt.seed = f.seed;
    opt.reference_group = f.reference_group;
    opt.prevalence = f.prevalence;
    return opt;
}

nlohmann::ordered_json flags_json(const PipelineFlags& f) {
    return {{"alpha", f.alpha},
            {"fdr", f.fdr},
            {"coverage", f.coverage},
            {"pseudocount", f.pseudocount},
            {"sparcc_threshold", f.sparcc_threshold},
            {"sparcc_iters", f.sparcc_iters},
            {"threads", f.threads},
            {"seed", f.seed},
            {"reference_group", f.reference_group},
            {"prevalence", f.prevalence}};
}

std::string format_cell(const std::optional<double>& value) {
    if (!value) return "";
    std::ostringstream out;
    out.precision(6);
    out << *value;
    return out.str();
}

// ---------------------------------------------------------------- analyze --

struct AnalyzeArgs {
    std::string otu_path;
    std::vector<std::string> paired; // before, after
    std::string metadata_path;
    std::string group_col;
    std::vector<std::string> covariates;
    std::string out_dir = "sohpie_analysis";
    PipelineFlags flags;
};

int run_analyze(const AnalyzeArgs& args) {
    const bool paired = !args.paired.empty();
    AnalysisOptions opt = to_options(args.flags);
    opt.covariate_cols = args.covariates;

    cli::RunManifest manifest;
    manifest.command = paired ? "analyze --paired" : "analyze";
    manifest.version = SOHPIE_VERSION;
    manifest.seed = opt.seed;
    manifest.threads = resolve_threads(opt.threads);
    manifest.config = flags_json(args.flags);
    manifest.config["group"] = args.group_col;
    manifest.config["covariates"] = args.covariates;

    const CovariateFrame covs = load_covariates(args.metadata_path);
    manifest.add_input(args.metadata_path);

    AnalysisResult res;
    if (paired) {
        const OtuTable before = load_otu_table(args.paired[0]);
        const OtuTable after = load_otu_table(args.paired[1]);
        manifest.add_input(args.paired[0]);
        manifest.add_input(args.paired[1]);
        res = analyze_paired(before, after, covs, args.group_col, opt);
    } else {
        const OtuTable otu = load_otu_table(args.otu_path);
        manifest.add_input(args.otu_path);
        res = analyze(otu, covs, args.group_col, opt);
    }

    std::filesystem::create_directories(args.out_dir);
    const std::string results = args.out_dir + "/results.tsv";
    const std::string pseudo = args.out_dir + "/pseudovalues.tsv";
    const std::string assoc1 = args.out_dir + "/assoc_group1.tsv";
    const std::string assoc2 = args.out_dir + "/assoc_group2.tsv";
    write_results(res.tests, results);
    write_pseudovalues(res.pseudovalues, pseudo);
    write_association_matrix(res.assoc1, assoc1);
    write_association_matrix(res.assoc2, assoc2);
    manifest.outputs = {results, pseudo, assoc1, assoc2};
    manifest.stages = res.timings;
    manifest.write(args.out_dir);

    for (const auto& warning : res.report.warnings) std::cerr << "warning: " << warning << '\n';
    for (const auto& warning : res.fdr.warnings) std::cerr << "warning: " << warning << '\n';
    if (!res.report.dropped.empty())
        std::cerr << res.report.dropped.size() << " sample(s) dropped during alignment:\n"
                  << res.report.to_text();

    std::cout << "group " << res.group_level1 << " (reference): n=" << res.pseudovalues.n()
              << " rows stacked, " << res.tests.size() << " taxa tested";
    if (!res.dropped_taxa.empty())
        std::cout << ", " << res.dropped_taxa.size() << " taxa below prevalence";
    std::cout << '\n';
    std::cout << "significant at q<" << opt.alpha << ": " << res.significant.size() << '\n';
    for (const auto& taxon : res.significant) std::cout << "  " << taxon << '\n';
    std::cout << "results written to " << args.out_dir << '\n';
    return 0;
}

// --------------------------------------------------------------- simulate --

struct SimulateArgs {
    SimulationConfig cfg;
    std::string scenario = "multivariable";
    std::string out_dir = "sohpie_dataset";
};

int run_simulate(const SimulateArgs& args) {
    SimulationConfig cfg = args.cfg;
    cfg.scenario = scenario_from_string(args.scenario);
    cfg.validate();

    const auto start = std::chrono::steady_clock::now();
    const SyntheticDataset dataset = generate_synthetic_dataset(cfg);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                               .count();

    std::filesystem::create_directories(args.out_dir);
    const std::string otu1 = args.out_dir + "/otu_group1.tsv";
    const std::string otu2 = args.out_dir + "/otu_group2.tsv";
    const std::string meta = args.out_dir + "/metadata.csv";
    const std::string truth = args.out_dir + "/truth.json";
    write_otu_table(dataset.group1, otu1);
    write_otu_table(dataset.group2, otu2);
    write_covariates(dataset.covariates, meta);
    write_truth_json(dataset, cfg, truth);

    cli::RunManifest manifest;
    manifest.command = "simulate";
    manifest.version = SOHPIE_VERSION;
    manifest.seed = cfg.seed;
    manifest.threads = 1;
    manifest.config = {{"p", cfg.p},
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
    manifest.stages = {{"generate", seconds}};
    manifest.outputs = {otu1, otu2, meta, truth};
    manifest.write(args.out_dir);

    std::cout << "p=" << cfg.p << " taxa, groups n1=" << dataset.group1.n()
              << " n2=" << dataset.group2.n() << ", spiked " << dataset.truth.spikes1.size()
              << "+" << dataset.truth.spikes2.size() << " taxa, "
              << dataset.truth.omega1.edge_count() << "/" << dataset.truth.omega2.edge_count()
              << " edges per group network\n";
    std::cout << "dataset written to " << args.out_dir << '\n';
    return 0;
}

// -------------------------------------------------------------- benchmark --

struct BenchmarkArgs {
    std::vector<Eigen::Index> p_list{20};
    std::vector<Eigen::Index> n_list{50};
    std::vector<double> delta1_list{0.1};
    std::vector<double> delta2_list{0.1};
    std::string scenario = "multivariable";
    std::size_t replicates = 100;
    double read_depth_mean = 10000;
    double zero_inflation = 0.3;
    double effect_strength = 1.0;
    int ba_edges_per_node = 1;
    double edge_weight = 0.6;
    std::string undefined_policy = "skip";
    std::string import_external;
    std::string out_dir = "sohpie_benchmark";
    PipelineFlags flags;
};

struct ExternalScores {
    // replicate -> taxon -> q
    std::unordered_map<std::size_t, std::unordered_map<std::string, double>> q;
};

ExternalScores load_external(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open external results: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    std::vector<std::string> header;
    {
        std::istringstream fields(line);
        std::string f;
        while (std::getline(fields, f, '\t')) header.push_back(f);
    }
    int rep_col = -1, taxon_col = -1, q_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "replicate") rep_col = static_cast<int>(i);
        if (header[i] == "taxon") taxon_col = static_cast<int>(i);
        if (header[i] == "q_value") q_col = static_cast<int>(i);
    }
    if (rep_col < 0 || taxon_col < 0 || q_col < 0)
        throw std::runtime_error(path + ": need columns replicate, taxon, q_value");

    ExternalScores scores;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream fields(line);
        std::string f;
        while (std::getline(fields, f, '\t')) cells.push_back(f);
        if (cells.size() != header.size())
            throw std::runtime_error(path + ": row " + std::to_string(line_no) +
                                     " has wrong field count");
        const auto rep = static_cast<std::size_t>(std::stoull(cells[rep_col]));
        scores.q[rep][cells[taxon_col]] = std::stod(cells[q_col]);
    }
    return scores;
}

// Scores external per-taxon q-values against the same per-replicate truth the
// internal run used; replicates absent from the file stay undefined.
ReplicateTable score_external(const ExternalScores& scores, const SimulationConfig& cfg,
                              std::size_t replicates, double alpha) {
    ReplicateTable table;
    table.rows.resize(replicates);
    for (std::size_t r = 0; r < replicates; ++r) {
        ReplicateOutcome& row = table.rows[r];
        row.replicate = r;
        auto it = scores.q.find(r);
        if (it == scores.q.end()) {
            row.failed = true;
            row.failure_reason = "no external rows for replicate";
            ++table.n_failed;
            continue;
        }
        SimulationConfig replicate_cfg = cfg;
        replicate_cfg.seed = derive_seed(derive_seed(cfg.seed, r), 0);
        const SyntheticDataset dataset = generate_synthetic_dataset(replicate_cfg);
        std::vector<double> q;
        q.reserve(dataset.group1.taxon_names.size());
        for (const auto& taxon : dataset.group1.taxon_names) {
            auto found = it->second.find(taxon);
            q.push_back(found == it->second.end() ? std::numeric_limits<double>::quiet_NaN()
                                                  : found->second);
        }
        row.counts = confusion(dataset.truth.eta, q, alpha);
        row.metrics = summarize(row.counts);
    }
    return table;
}

void write_moments(std::ostream& out, const MetricMoments& m) {
    out << '\t';
    if (m.n > 0) out << m.mean;
    out << '\t';
    if (m.n > 1) out << m.sd;
    out << '\t' << m.n;
}

int run_benchmark(const BenchmarkArgs& args) {
    const AnalysisOptions opt = to_options(args.flags);
    const UndefinedPolicy policy = undefined_policy_from_string(args.undefined_policy);
    const bool external = !args.import_external.empty();
    const std::size_t cells =
        args.p_list.size() * args.n_list.size() * args.delta1_list.size() *
        args.delta2_list.size();
    if (external && cells != 1)
        throw std::runtime_error(
            "--import-external requires a single grid cell (one p, n, delta1, delta2)");

    ExternalScores ext_scores;
    if (external) ext_scores = load_external(args.import_external);

    std::filesystem::create_directories(args.out_dir);
    const std::string rep_path = args.out_dir + "/replicates.tsv";
    const std::string sum_path = args.out_dir + "/summary.tsv";
    std::ofstream reps(rep_path);
    std::ofstream summary(sum_path);
    if (!reps || !summary) throw std::runtime_error("cannot write into " + args.out_dir);
    reps.precision(6);
    summary.precision(6);

    const char* generator_note =
        "# note: metric values are generator-dependent; trends across (p, n, delta) are "
        "comparable, absolute cell values are not\n";
    reps << generator_note;
    summary << generator_note;
    summary << "# undefined metric cells (no declared positives): policy = "
            << to_string(policy) << '\n';

    reps << "p\tn\tdelta1\tdelta2\treplicate\tprecision\trecall\tf1\taccuracy\tn_undefined";
    if (external) reps << "\text_precision\text_recall\text_f1\text_accuracy\text_n_undefined";
    reps << '\n';
    summary << "p\tn\tdelta1\tdelta2\treplicates\tfailed\tundefined_cells"
            << "\tprecision_mean\tprecision_sd\tprecision_n"
            << "\trecall_mean\trecall_sd\trecall_n"
            << "\tf1_mean\tf1_sd\tf1_n"
            << "\taccuracy_mean\taccuracy_sd\taccuracy_n";
    if (external)
        summary << "\text_precision_mean\text_recall_mean\text_f1_mean\text_accuracy_mean";
    summary << '\n';

    cli::RunManifest manifest;
    manifest.command = "benchmark";
    manifest.version = SOHPIE_VERSION;
    manifest.seed = args.flags.seed;
    manifest.threads = resolve_threads(opt.threads);
    manifest.config = flags_json(args.flags);
    manifest.config["p"] = args.p_list;
    manifest.config["n"] = args.n_list;
    manifest.config["delta1"] = args.delta1_list;
    manifest.config["delta2"] = args.delta2_list;
    manifest.config["scenario"] = args.scenario;
    manifest.config["replicates"] = args.replicates;
    manifest.config["undefined_policy"] = args.undefined_policy;
    manifest.config["read_depth_mean"] = args.read_depth_mean;
    manifest.config["zero_inflation"] = args.zero_inflation;
    manifest.config["effect_strength"] = args.effect_strength;
    manifest.config["ba_edges_per_node"] = args.ba_edges_per_node;
    manifest.config["edge_weight"] = args.edge_weight;
    if (external) {
        manifest.config["import_external"] = args.import_external;
        manifest.add_input(args.import_external);
    }

    const auto start = std::chrono::steady_clock::now();
    std::size_t cell_index = 0;
    for (const auto p : args.p_list) {
        for (const auto n : args.n_list) {
            for (const double d1 : args.delta1_list) {
                for (const double d2 : args.delta2_list) {
                    SimulationConfig cfg;
                    cfg.p = p;
                    cfg.n = n;
                    cfg.delta1 = d1;
                    cfg.delta2 = d2;
                    cfg.scenario = scenario_from_string(args.scenario);
                    cfg.read_depth_mean = static_cast<std::int64_t>(args.read_depth_mean);
                    cfg.zero_inflation = args.zero_inflation;
                    cfg.effect_strength = args.effect_strength;
                    cfg.ba_edges_per_node = args.ba_edges_per_node;
                    cfg.edge_weight = args.edge_weight;
                    cfg.seed = derive_seed(args.flags.seed, cell_index++);

                    ReplicateTable table;
                    try {
                        table = run_replicates(cfg, args.replicates, opt.alpha, opt);
                    } catch (const std::exception& e) {
                        std::cerr << "cell p=" << p << " n=" << n << " delta1=" << d1
                                  << " delta2=" << d2 << " failed: " << e.what() << '\n';
                        continue;
                    }

                    ReplicateTable ext_table;
                    if (external)
                        ext_table = score_external(ext_scores, cfg, args.replicates, opt.alpha);

                    for (const auto& row : table.rows) {
                        if (row.failed) continue;
                        reps << p << '\t' << n << '\t' << d1 << '\t' << d2 << '\t'
                             << row.replicate << '\t' << format_cell(row.metrics.precision)
                             << '\t' << format_cell(row.metrics.recall) << '\t'
                             << format_cell(row.metrics.f1) << '\t'
                             << format_cell(row.metrics.accuracy) << '\t'
                             << row.metrics.n_undefined();
                        if (external) {
                            const auto& ext = ext_table.rows[row.replicate];
                            if (ext.failed)
                                reps << "\t\t\t\t\t";
                            else
                                reps << '\t' << format_cell(ext.metrics.precision) << '\t'
                                     << format_cell(ext.metrics.recall) << '\t'
                                     << format_cell(ext.metrics.f1) << '\t'
                                     << format_cell(ext.metrics.accuracy) << '\t'
                                     << ext.metrics.n_undefined();
                        }
                        reps << '\n';
                    }

                    const ReplicateSummary cell = summarize_replicates(table, policy);
                    summary << p << '\t' << n << '\t' << d1 << '\t' << d2 << '\t'
                            << cell.replicates << '\t' << cell.failed << '\t'
                            << cell.undefined_cells;
                    write_moments(summary, cell.precision);
                    write_moments(summary, cell.recall);
                    write_moments(summary, cell.f1);
                    write_moments(summary, cell.accuracy);
                    if (external) {
                        const ReplicateSummary ext = summarize_replicates(ext_table, policy);
                        summary << '\t' << ext.precision.mean << '\t' << ext.recall.mean << '\t'
                                << ext.f1.mean << '\t' << ext.accuracy.mean;
                    }
                    summary << '\n';
                    for (const auto& row : table.rows)
                        if (row.failed)
                            std::cerr << "replicate " << row.replicate << " (p=" << p
                                      << ", n=" << n << ") failed: " << row.failure_reason
                                      << '\n';
                }
            }
        }
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.stages = {{"replicates", seconds}};
    manifest.outputs = {rep_path, sum_path};
    manifest.write(args.out_dir);

    std::cout << cells << " grid cell(s), " << args.replicates
              << " replicates each; tables written to " << args.out_dir << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differential co-abundance network analysis for compositional count data"};
    app.set_version_flag("--version", SOHPIE_VERSION);
    app.require_subcommand(1);

    AnalyzeArgs analyze_args;
    auto* analyze_cmd = app.add_subcommand(
        "analyze", "Run the full pipeline on an OTU table and sample metadata");
    auto* otu_opt = analyze_cmd->add_option("otu", analyze_args.otu_path,
                                            "OTU count table (samples x taxa, tsv/csv)");
    auto* paired_opt =
        analyze_cmd
            ->add_option("--paired", analyze_args.paired,
                         "Before and after OTU tables for the two-time-point variant")
            ->expected(2);
    otu_opt->excludes(paired_opt);
    analyze_cmd->add_option("--metadata", analyze_args.metadata_path, "Sample metadata (tsv/csv)")
        ->required();
    analyze_cmd->add_option("--group", analyze_args.group_col, "Metadata column with two levels")
        ->required();
    analyze_cmd
        ->add_option("--covariates", analyze_args.covariates,
                     "Metadata columns to adjust for (comma separated)")
        ->delimiter(',');
    analyze_cmd->add_option("--out", analyze_args.out_dir, "Output directory")
        ->capture_default_str();
    add_pipeline_flags(analyze_cmd, analyze_args.flags);

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate one synthetic dataset with truth");
    sim_cmd->add_option("--p", sim_args.cfg.p, "Taxa count")->capture_default_str();
    sim_cmd->add_option("--n", sim_args.cfg.n, "Total samples")->capture_default_str();
    sim_cmd->add_option("--delta1", sim_args.cfg.delta1, "Spiked taxon fraction, group 1")
        ->capture_default_str();
    sim_cmd->add_option("--delta2", sim_args.cfg.delta2, "Spiked taxon fraction, group 2")
        ->capture_default_str();
    sim_cmd->add_option("--scenario", sim_args.scenario, "multivariable or univariable")
        ->check(CLI::IsMember({"multivariable", "univariable"}))
        ->capture_default_str();
    sim_cmd->add_option("--read-depth-mean", sim_args.cfg.read_depth_mean,
                        "Mean Poisson sequencing depth")
        ->capture_default_str();
    sim_cmd->add_option("--zero-inflation", sim_args.cfg.zero_inflation,
                        "Structural zero rate per cell")
        ->capture_default_str();
    sim_cmd->add_option("--effect-strength", sim_args.cfg.effect_strength,
                        "Log-abundance shift per standardized covariate unit")
        ->capture_default_str();
    sim_cmd->add_option("--ba-edges-per-node", sim_args.cfg.ba_edges_per_node,
                        "Preferential-attachment edges per new node")
        ->capture_default_str();
    sim_cmd->add_option("--edge-weight", sim_args.cfg.edge_weight,
                        "Latent correlation per network edge")
        ->capture_default_str();
    sim_cmd->add_option("--covariate-shift", sim_args.cfg.covariate_shift,
                        "Group-2 mean shift of X in the multivariable scenario")
        ->capture_default_str();
    sim_cmd->add_option("--seed", sim_args.cfg.seed, "Random seed")->capture_default_str();
    sim_cmd->add_option("--out", sim_args.out_dir, "Output directory")->capture_default_str();

    BenchmarkArgs bench_args;
    auto* bench_cmd = app.add_subcommand(
        "benchmark", "Replicate grid: simulate, analyze, score against truth");
    bench_cmd->add_option("--p", bench_args.p_list, "Taxa counts (comma separated)")
        ->delimiter(',')
        ->capture_default_str();
    bench_cmd->add_option("--n", bench_args.n_list, "Total sample sizes (comma separated)")
        ->delimiter(',')
        ->capture_default_str();
    bench_cmd
        ->add_option("--delta1", bench_args.delta1_list, "Group-1 spike fractions (crossed)")
        ->delimiter(',')
        ->capture_default_str();
    bench_cmd
        ->add_option("--delta2", bench_args.delta2_list, "Group-2 spike fractions (crossed)")
        ->delimiter(',')
        ->capture_default_str();
    bench_cmd->add_option("--scenario", bench_args.scenario, "multivariable or univariable")
        ->check(CLI::IsMember({"multivariable", "univariable"}))
        ->capture_default_str();
    bench_cmd->add_option("--replicates", bench_args.replicates, "Replicates per grid cell")
        ->capture_default_str();
    bench_cmd->add_option("--read-depth-mean", bench_args.read_depth_mean,
                          "Mean Poisson sequencing depth")
        ->capture_default_str();
    bench_cmd->add_option("--zero-inflation", bench_args.zero_inflation,
                          "Structural zero rate per cell")
        ->capture_default_str();
    bench_cmd->add_option("--effect-strength", bench_args.effect_strength,
                          "Log-abundance shift per standardized covariate unit")
        ->capture_default_str();
    bench_cmd->add_option("--ba-edges-per-node", bench_args.ba_edges_per_node,
                          "Preferential-attachment edges per new node")
        ->capture_default_str();
    bench_cmd->add_option("--edge-weight", bench_args.edge_weight,
                          "Latent correlation per network edge")
        ->capture_default_str();
    bench_cmd
        ->add_option("--undefined-policy", bench_args.undefined_policy,
                     "Undefined metric cells in means: skip or zero_fill")
        ->check(CLI::IsMember({"skip", "zero_fill"}))
        ->capture_default_str();
    bench_cmd->add_option("--import-external", bench_args.import_external,
                          "Score an external method's per-taxon q-values (tsv: replicate, "
                          "taxon, q_value) against the same truth");
    bench_cmd->add_option("--out", bench_args.out_dir, "Output directory")
        ->capture_default_str();
    add_pipeline_flags(bench_cmd, bench_args.flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (analyze_cmd->parsed()) {
            if (analyze_args.paired.empty() && analyze_args.otu_path.empty())
                throw std::runtime_error("provide an OTU table or --paired before after");
            return run_analyze(analyze_args);
        }
        if (sim_cmd->parsed()) return run_simulate(sim_args);
        if (bench_cmd->parsed()) return run_benchmark(bench_args);
    } catch (const std::exception& e) {
        std::cerr << "sohpie: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
