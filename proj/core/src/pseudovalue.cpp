#include "sohpie/pseudovalue.hpp"

#include "sohpie/parallel.hpp"

#include <fstream>
#include <stdexcept>

namespace sohpie {

namespace {

CountMatrix drop_row(const CountMatrix& counts, Eigen::Index row) {
    CountMatrix out(counts.rows() - 1, counts.cols());
    out.topRows(row) = counts.topRows(row);
    out.bottomRows(counts.rows() - 1 - row) = counts.bottomRows(counts.rows() - 1 - row);
    return out;
}

} // namespace

CentralityVector degree_centrality(const AssociationMatrix& A) {
    CentralityVector out;
    out.theta = A.rho.colwise().sum();
    out.taxon_names = A.taxon_names;
    return out;
}

PseudoValueMatrix jackknife_pseudovalues(const OtuTable& group_counts,
                                         const JackknifeConfig& cfg,
                                         const std::string& group_label) {
    const Eigen::Index n = group_counts.n();
    const Eigen::Index p = group_counts.p();
    if (n < 3)
        throw std::runtime_error("jackknife_pseudovalues: group '" + group_label +
                                 "' has n=" + std::to_string(n) + "; need at least 3");

    Eigen::VectorXd theta_full = degree_centrality(sparcc(group_counts, cfg.sparcc)).theta;

    PseudoValueMatrix out;
    out.values.resize(n, p);
    out.sample_ids = group_counts.sample_ids;
    out.group_labels.assign(static_cast<std::size_t>(n), group_label);
    out.taxon_names = group_counts.taxon_names;

    const double nd = static_cast<double>(n);
    parallel_for(static_cast<std::size_t>(n), resolve_threads(cfg.threads), [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        try {
            CountMatrix loo = drop_row(group_counts.counts, row);
            Eigen::VectorXd theta_i =
                degree_centrality(sparcc(loo, group_counts.taxon_names, cfg.sparcc)).theta;
            out.values.row(row) = nd * theta_full.transpose() - (nd - 1.0) * theta_i.transpose();
        } catch (const std::exception& e) {
            throw std::runtime_error("jackknife_pseudovalues: re-estimation without sample '" +
                                     group_counts.sample_ids[i] + "' failed: " + e.what());
        }
    });
    return out;
}

PseudoValueMatrix paired_difference_pseudovalues(const OtuTable& before,
                                                 const OtuTable& after,
                                                 const JackknifeConfig& cfg,
                                                 const std::string& group_label) {
    if (before.sample_ids != after.sample_ids)
        throw std::runtime_error("paired_difference_pseudovalues: time points disagree on samples");
    if (before.taxon_names != after.taxon_names)
        throw std::runtime_error("paired_difference_pseudovalues: time points disagree on taxa");

    const Eigen::Index n = before.n();
    const Eigen::Index p = before.p();
    if (n < 3)
        throw std::runtime_error("paired_difference_pseudovalues: group '" + group_label +
                                 "' has n=" + std::to_string(n) + "; need at least 3");

    auto difference_theta = [&](const CountMatrix& b, const CountMatrix& a) {
        Eigen::MatrixXd d = sparcc(a, before.taxon_names, cfg.sparcc).rho -
                            sparcc(b, before.taxon_names, cfg.sparcc).rho;
        return Eigen::VectorXd(d.colwise().sum());
    };

    Eigen::VectorXd theta_full = difference_theta(before.counts, after.counts);

    PseudoValueMatrix out;
    out.values.resize(n, p);
    out.sample_ids = before.sample_ids;
    out.group_labels.assign(static_cast<std::size_t>(n), group_label);
    out.taxon_names = before.taxon_names;

    const double nd = static_cast<double>(n);
    parallel_for(static_cast<std::size_t>(n), resolve_threads(cfg.threads), [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        try {
            Eigen::VectorXd theta_i =
                difference_theta(drop_row(before.counts, row), drop_row(after.counts, row));
            out.values.row(row) = nd * theta_full.transpose() - (nd - 1.0) * theta_i.transpose();
        } catch (const std::exception& e) {
            throw std::runtime_error("paired_difference_pseudovalues: re-estimation without sample '" +
                                     before.sample_ids[i] + "' failed: " + e.what());
        }
    });
    return out;
}

PseudoValueMatrix concat_pseudovalues(const PseudoValueMatrix& a, const PseudoValueMatrix& b) {
    if (a.taxon_names != b.taxon_names)
        throw std::invalid_argument("concat_pseudovalues: taxon columns differ");
    PseudoValueMatrix out;
    out.taxon_names = a.taxon_names;
    out.sample_ids = a.sample_ids;
    out.sample_ids.insert(out.sample_ids.end(), b.sample_ids.begin(), b.sample_ids.end());
    out.group_labels = a.group_labels;
    out.group_labels.insert(out.group_labels.end(), b.group_labels.begin(), b.group_labels.end());
    out.values.resize(a.n() + b.n(), a.p());
    out.values.topRows(a.n()) = a.values;
    out.values.bottomRows(b.n()) = b.values;
    return out;
}

void write_pseudovalues(const PseudoValueMatrix& matrix, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.precision(10);
    out << "sample_id\tgroup";
    for (const auto& name : matrix.taxon_names) out << '\t' << name;
    out << '\n';
    for (Eigen::Index i = 0; i < matrix.n(); ++i) {
        out << matrix.sample_ids[static_cast<std::size_t>(i)] << '\t'
            << matrix.group_labels[static_cast<std::size_t>(i)];
        for (Eigen::Index k = 0; k < matrix.p(); ++k) out << '\t' << matrix.values(i, k);
        out << '\n';
    }
}

} // namespace sohpie
