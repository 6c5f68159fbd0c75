#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

#include <sohpie/pseudovalue.hpp>
#include <sohpie/sparcc.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

using namespace sohpie;

namespace {

OtuTable table_from(const CountMatrix& counts) {
    OtuTable t;
    t.counts = counts;
    for (Eigen::Index i = 0; i < counts.rows(); ++i)
        t.sample_ids.push_back("s" + std::to_string(i));
    for (Eigen::Index k = 0; k < counts.cols(); ++k)
        t.taxon_names.push_back("t" + std::to_string(k));
    return t;
}

OtuTable random_counts(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    CountMatrix counts(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < p; ++k)
            counts(i, k) = static_cast<std::int64_t>(2e3 * std::exp(normal(rng))) + 1;
    return table_from(counts);
}

OtuTable drop_row(const OtuTable& t, Eigen::Index row) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < t.n(); ++i)
        if (i != row) keep.push_back(i);
    return select_samples(t, keep);
}

// Sequential reference: theta_tilde(i, .) = n theta_hat - (n-1) theta_hat(-i).
Eigen::MatrixXd reference_pseudovalues(const OtuTable& t, const SparccConfig& cfg) {
    const double n = static_cast<double>(t.n());
    const Eigen::VectorXd full = degree_centrality(sparcc(t, cfg)).theta;
    Eigen::MatrixXd out(t.n(), t.p());
    for (Eigen::Index i = 0; i < t.n(); ++i) {
        const Eigen::VectorXd loo = degree_centrality(sparcc(drop_row(t, i), cfg)).theta;
        out.row(i) = n * full.transpose() - (n - 1.0) * loo.transpose();
    }
    return out;
}

} // namespace

TEST_CASE("degree centrality sums columns with the unit diagonal") {
    AssociationMatrix identity;
    identity.rho = Eigen::MatrixXd::Identity(5, 5);
    identity.taxon_names = {"a", "b", "c", "d", "e"};
    CHECK(degree_centrality(identity).theta.isApproxToConstant(1.0, 1e-15));
    CHECK(degree_centrality(identity).taxon_names == identity.taxon_names);

    AssociationMatrix ones;
    ones.rho = Eigen::MatrixXd::Ones(3, 3);
    ones.taxon_names = {"a", "b", "c"};
    CHECK(degree_centrality(ones).theta.isApproxToConstant(3.0, 1e-15));

    AssociationMatrix pair;
    pair.rho = Eigen::MatrixXd::Identity(3, 3);
    pair.rho(0, 1) = pair.rho(1, 0) = 0.5;
    pair.taxon_names = {"a", "b", "c"};
    const Eigen::VectorXd theta = degree_centrality(pair).theta;
    CHECK(theta(0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(theta(1) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(theta(2) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("identical samples collapse every pseudo-value onto theta hat") {
    CountMatrix counts(4, 4);
    for (Eigen::Index i = 0; i < 4; ++i) counts.row(i) << 120, 35, 260, 90;
    const OtuTable t = table_from(counts);

    JackknifeConfig cfg;
    cfg.threads = 1;
    const PseudoValueMatrix pv = jackknife_pseudovalues(t, cfg, "g");
    const Eigen::VectorXd theta = degree_centrality(sparcc(t, cfg.sparcc)).theta;
    for (Eigen::Index i = 0; i < pv.n(); ++i)
        for (Eigen::Index k = 0; k < pv.p(); ++k)
            CHECK(pv.values(i, k) == doctest::Approx(theta(k)).epsilon(1e-12));
    CHECK(pv.group_labels == std::vector<std::string>(4, "g"));
    CHECK(pv.sample_ids == t.sample_ids);
    CHECK(pv.taxon_names == t.taxon_names);
}

TEST_CASE("pseudo-values equal the inflation formula on a 3-sample fixture") {
    const OtuTable t = random_counts(3, 4, 21);
    JackknifeConfig cfg;
    const PseudoValueMatrix pv = jackknife_pseudovalues(t, cfg, "g");

    const Eigen::VectorXd full = degree_centrality(sparcc(t, cfg.sparcc)).theta;
    for (Eigen::Index i = 0; i < 3; ++i) {
        const Eigen::VectorXd loo = degree_centrality(sparcc(drop_row(t, i), cfg.sparcc)).theta;
        for (Eigen::Index k = 0; k < 4; ++k)
            CHECK(pv.values(i, k) ==
                  doctest::Approx(3.0 * full(k) - 2.0 * loo(k)).epsilon(1e-9));
    }
}

TEST_CASE("jackknife matches the sequential reference loop exactly") {
    const OtuTable t = random_counts(5, 4, 33);
    const Eigen::MatrixXd expected = reference_pseudovalues(t, {});

    for (std::size_t threads : {1, 2, 8}) {
        JackknifeConfig cfg;
        cfg.threads = threads;
        const PseudoValueMatrix pv = jackknife_pseudovalues(t, cfg, "g");
        CHECK(pv.values == expected); // bitwise, any thread count
    }
}

TEST_CASE("column means satisfy the jackknife identity") {
    const OtuTable t = random_counts(8, 5, 55);
    JackknifeConfig cfg;
    const PseudoValueMatrix pv = jackknife_pseudovalues(t, cfg, "g");

    const double n = 8.0;
    const Eigen::VectorXd full = degree_centrality(sparcc(t, cfg.sparcc)).theta;
    Eigen::VectorXd loo_mean = Eigen::VectorXd::Zero(5);
    for (Eigen::Index i = 0; i < 8; ++i)
        loo_mean += degree_centrality(sparcc(drop_row(t, i), cfg.sparcc)).theta / n;
    const Eigen::VectorXd expected = n * full - (n - 1.0) * loo_mean;
    CHECK((pv.values.colwise().mean().transpose() - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("a group below the jackknife minimum is rejected") {
    const OtuTable t = random_counts(2, 4, 3);
    JackknifeConfig cfg;
    cfg.threads = 1;
    CHECK_THROWS_WITH_AS(jackknife_pseudovalues(t, cfg, "g"),
                         doctest::Contains("need at least 3"), std::runtime_error);
}

TEST_CASE("paired pseudo-values vanish when nothing changes") {
    const OtuTable before = random_counts(5, 4, 8);
    JackknifeConfig cfg;
    const PseudoValueMatrix pv = paired_difference_pseudovalues(before, before, cfg, "g");
    CHECK(pv.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(pv.n() == 5);
    CHECK(pv.p() == 4);
}

TEST_CASE("paired pseudo-values match a sequential reference") {
    const OtuTable before = random_counts(4, 4, 81);
    OtuTable after = random_counts(4, 4, 82);
    after.sample_ids = before.sample_ids;

    JackknifeConfig cfg;
    const PseudoValueMatrix pv = paired_difference_pseudovalues(before, after, cfg, "g");

    const double n = 4.0;
    auto theta_diff = [&](const OtuTable& b, const OtuTable& a) {
        const Eigen::MatrixXd d = sparcc(a, cfg.sparcc).rho - sparcc(b, cfg.sparcc).rho;
        return Eigen::VectorXd(d.colwise().sum());
    };
    const Eigen::VectorXd full = theta_diff(before, after);
    for (Eigen::Index i = 0; i < 4; ++i) {
        const Eigen::VectorXd loo = theta_diff(drop_row(before, i), drop_row(after, i));
        for (Eigen::Index k = 0; k < 4; ++k)
            CHECK(pv.values(i, k) == doctest::Approx(n * full(k) - 3.0 * loo(k)).epsilon(1e-9));
    }
}

TEST_CASE("paired mode insists on matching subjects and taxa in order") {
    const OtuTable before = random_counts(4, 4, 91);
    OtuTable after = random_counts(4, 4, 92);
    after.sample_ids = before.sample_ids;

    const OtuTable shuffled = select_samples(after, {2, 0, 3, 1});
    CHECK_THROWS_WITH_AS(paired_difference_pseudovalues(before, shuffled, {}, "g"),
                         doctest::Contains("disagree on samples"), std::runtime_error);

    OtuTable renamed = after;
    renamed.taxon_names[2] = "stranger";
    CHECK_THROWS_WITH_AS(paired_difference_pseudovalues(before, renamed, {}, "g"),
                         doctest::Contains("disagree on taxa"), std::runtime_error);
}

TEST_CASE("an edge appearing only after intervention dominates its endpoints") {
    const Eigen::Index n = 80, p = 8;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal(0.0, 1.0);
    CountMatrix before(n, p), after(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double shared = normal(rng);
        for (Eigen::Index k = 0; k < p; ++k) {
            before(i, k) = static_cast<std::int64_t>(2e3 * std::exp(normal(rng))) + 1;
            double z = normal(rng);
            if (k == 1) z = shared;
            if (k == 2) z = 0.95 * shared + std::sqrt(1 - 0.95 * 0.95) * z;
            after(i, k) = static_cast<std::int64_t>(2e3 * std::exp(z)) + 1;
        }
    }
    OtuTable tb = table_from(before);
    OtuTable ta = table_from(after);

    JackknifeConfig cfg;
    cfg.sparcc.exclusion_threshold = 0.99; // keep the planted pair in the basis system
    const PseudoValueMatrix pv = paired_difference_pseudovalues(tb, ta, cfg, "g");
    const Eigen::VectorXd magnitude = pv.values.colwise().mean().cwiseAbs();
    std::vector<Eigen::Index> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return magnitude(a) > magnitude(b); });
    CHECK(((order[0] == 1 && order[1] == 2) || (order[0] == 2 && order[1] == 1)));
}

TEST_CASE("concatenated pseudo-value blocks keep order and labels") {
    const OtuTable t1 = random_counts(4, 4, 5);
    const OtuTable t2 = random_counts(3, 4, 6);
    const PseudoValueMatrix a = jackknife_pseudovalues(t1, {}, "g1");
    const PseudoValueMatrix b = jackknife_pseudovalues(t2, {}, "g2");
    const PseudoValueMatrix all = concat_pseudovalues(a, b);
    CHECK(all.n() == 7);
    CHECK(all.p() == 4);
    CHECK(all.values.topRows(4) == a.values);
    CHECK(all.values.bottomRows(3) == b.values);
    CHECK(all.group_labels.front() == "g1");
    CHECK(all.group_labels.back() == "g2");

    PseudoValueMatrix mismatched = b;
    mismatched.taxon_names[0] = "zz";
    CHECK_THROWS_AS(concat_pseudovalues(a, mismatched), std::invalid_argument);
}

TEST_CASE("pseudo-value tables write with ids, labels, and taxa") {
    testutil::TempDir tmp;
    const OtuTable t = random_counts(4, 4, 12);
    const PseudoValueMatrix pv = jackknife_pseudovalues(t, {}, "g1");
    const auto path = tmp.file("pv.tsv");
    write_pseudovalues(pv, path);
    const std::string text = testutil::read_text(path);
    CHECK(text.find("sample_id") != std::string::npos);
    CHECK(text.find("group") != std::string::npos);
    CHECK(text.find("t2") != std::string::npos);
    CHECK(text.find("s3") != std::string::npos);
}
