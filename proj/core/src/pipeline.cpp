#include "sohpie/pipeline.hpp"

#include <chrono>
#include <stdexcept>
#include <unordered_map>

namespace sohpie {

SparccConfig AnalysisOptions::sparcc_config() const {
    SparccConfig cfg;
    cfg.max_outer_iterations = static_cast<int>(sparcc_iterations);
    cfg.exclusion_threshold = sparcc_threshold;
    cfg.pseudocount = pseudocount;
    cfg.seed = seed;
    return cfg;
}

JackknifeConfig AnalysisOptions::jackknife_config() const {
    JackknifeConfig cfg;
    cfg.threads = threads;
    cfg.sparcc = sparcc_config();
    return cfg;
}

TaxonTestConfig AnalysisOptions::taxon_test_config() const {
    TaxonTestConfig cfg;
    cfg.lts.coverage = coverage;
    cfg.lts.seed = seed;
    cfg.threads = threads;
    return cfg;
}

double AnalysisResult::seconds(const std::string& stage) const {
    for (const auto& t : timings)
        if (t.stage == stage) return t.seconds;
    return 0.0;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("analyze: alpha must lie in (0, 1)");
}

// Joint prevalence filter: a taxon stays if it is nonzero in at least
// prevalence * total_rows rows across every supplied block.
void drop_rare_taxa(std::vector<OtuTable*> blocks, double prevalence,
                    std::vector<std::string>& dropped) {
    if (prevalence <= 0.0) return;
    if (prevalence > 1.0)
        throw std::invalid_argument("analyze: prevalence must be in [0, 1]");
    const Eigen::Index p = blocks.front()->p();
    Eigen::Index total_rows = 0;
    for (const OtuTable* b : blocks) total_rows += b->n();
    const double cutoff = prevalence * static_cast<double>(total_rows);

    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < p; ++j) {
        Eigen::Index present = 0;
        for (const OtuTable* b : blocks)
            for (Eigen::Index i = 0; i < b->n(); ++i)
                if (b->counts(i, j) != 0) ++present;
        if (static_cast<double>(present) >= cutoff)
            keep.push_back(j);
        else
            dropped.push_back(blocks.front()->taxon_names[static_cast<std::size_t>(j)]);
    }
    if (keep.empty())
        throw std::runtime_error("analyze: prevalence filter removed every taxon");
    if (static_cast<Eigen::Index>(keep.size()) == p) return;
    for (OtuTable* b : blocks) *b = select_taxa(*b, keep);
}

// Regression + multiplicity control shared by the plain and paired entry points.
void finish_analysis(AnalysisResult& res, const AlignedDataset& data,
                     const AnalysisOptions& opt) {
    auto t0 = Clock::now();
    res.design = build_design(data, opt.covariate_cols);
    res.tests = taxon_tests(res.pseudovalues, res.design, opt.taxon_test_config());
    res.timings.push_back({"regression", elapsed(t0)});

    t0 = Clock::now();
    std::vector<double> p;
    std::vector<std::size_t> source;
    for (std::size_t k = 0; k < res.tests.size(); ++k) {
        if (!res.tests[k].failed) {
            p.push_back(res.tests[k].p_value);
            source.push_back(k);
        }
    }
    if (!p.empty()) {
        res.fdr = opt.fdr_method == FdrMethod::bh ? bh_adjust(p) : qvalue(p);
        for (std::size_t i = 0; i < source.size(); ++i)
            res.tests[source[i]].q_value = res.fdr.q_values[i];
        for (std::size_t idx : significant_taxa(res.fdr, opt.alpha))
            res.significant.push_back(res.tests[source[idx]].taxon);
    } else {
        res.fdr.method = opt.fdr_method;
        res.fdr.warnings.push_back("fdr: every taxon fit failed; no q-values computed");
    }
    res.timings.push_back({"fdr", elapsed(t0)});
}

} // namespace

AnalysisResult analyze(const OtuTable& otu, const CovariateFrame& covs,
                       const std::string& group_col, const AnalysisOptions& opt) {
    check_alpha(opt.alpha);
    AnalysisResult res;

    auto t0 = Clock::now();
    AlignedDataset data = align(otu, covs, group_col, opt.covariate_cols, opt.reference_group);
    drop_rare_taxa({&data.group1, &data.group2}, opt.prevalence, res.dropped_taxa);
    res.report = data.report;
    res.group_level1 = data.group_level1;
    res.group_level2 = data.group_level2;
    res.timings.push_back({"align", elapsed(t0)});

    t0 = Clock::now();
    const SparccConfig scfg = opt.sparcc_config();
    res.assoc1 = sparcc(data.group1, scfg);
    res.assoc2 = sparcc(data.group2, scfg);
    res.timings.push_back({"sparcc", elapsed(t0)});

    t0 = Clock::now();
    const JackknifeConfig jcfg = opt.jackknife_config();
    PseudoValueMatrix pv1 = jackknife_pseudovalues(data.group1, jcfg, data.group_level1);
    PseudoValueMatrix pv2 = jackknife_pseudovalues(data.group2, jcfg, data.group_level2);
    res.pseudovalues = concat_pseudovalues(pv1, pv2);
    res.timings.push_back({"pseudovalue", elapsed(t0)});

    finish_analysis(res, data, opt);
    return res;
}

AnalysisResult analyze_paired(const OtuTable& before, const OtuTable& after,
                              const CovariateFrame& covs, const std::string& group_col,
                              const AnalysisOptions& opt) {
    check_alpha(opt.alpha);
    if (before.taxon_names != after.taxon_names)
        throw std::runtime_error("analyze_paired: before/after tables list different taxa");
    AnalysisResult res;

    auto t0 = Clock::now();
    AlignedDataset data = align(before, covs, group_col, opt.covariate_cols, opt.reference_group);

    std::unordered_map<std::string, Eigen::Index> after_row;
    for (Eigen::Index i = 0; i < after.n(); ++i) after_row.emplace(after.sample_ids[static_cast<std::size_t>(i)], i);
    auto match_after = [&](const OtuTable& group) {
        std::vector<Eigen::Index> rows;
        rows.reserve(group.sample_ids.size());
        for (const auto& id : group.sample_ids) {
            auto it = after_row.find(id);
            if (it == after_row.end())
                throw std::runtime_error("analyze_paired: sample '" + id +
                                         "' missing from the after table");
            rows.push_back(it->second);
        }
        return select_samples(after, rows);
    };
    OtuTable after1 = match_after(data.group1);
    OtuTable after2 = match_after(data.group2);
    drop_rare_taxa({&data.group1, &data.group2, &after1, &after2}, opt.prevalence,
                   res.dropped_taxa);
    res.report = data.report;
    res.group_level1 = data.group_level1;
    res.group_level2 = data.group_level2;
    res.timings.push_back({"align", elapsed(t0)});

    t0 = Clock::now();
    const SparccConfig scfg = opt.sparcc_config();
    auto difference = [&](const OtuTable& b, const OtuTable& a) {
        AssociationMatrix before_assoc = sparcc(b, scfg);
        AssociationMatrix after_assoc = sparcc(a, scfg);
        return AssociationMatrix{after_assoc.rho - before_assoc.rho, b.taxon_names};
    };
    res.assoc1 = difference(data.group1, after1);
    res.assoc2 = difference(data.group2, after2);
    res.timings.push_back({"sparcc", elapsed(t0)});

    t0 = Clock::now();
    const JackknifeConfig jcfg = opt.jackknife_config();
    PseudoValueMatrix pv1 =
        paired_difference_pseudovalues(data.group1, after1, jcfg, data.group_level1);
    PseudoValueMatrix pv2 =
        paired_difference_pseudovalues(data.group2, after2, jcfg, data.group_level2);
    res.pseudovalues = concat_pseudovalues(pv1, pv2);
    res.timings.push_back({"pseudovalue", elapsed(t0)});

    finish_analysis(res, data, opt);
    return res;
}

} // namespace sohpie
