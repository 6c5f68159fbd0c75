#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

#include <sohpie/rng.hpp>
#include <sohpie/sparcc.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <random>
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

// Independent lognormal abundances scaled to integer counts.
OtuTable independent_counts(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    CountMatrix counts(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < p; ++k)
            counts(i, k) = static_cast<std::int64_t>(1e4 * std::exp(normal(rng))) + 1;
    return table_from(counts);
}

// Log-abundances jointly normal with one correlated pair; counts via scaling.
OtuTable planted_pair_counts(Eigen::Index n, Eigen::Index p, Eigen::Index a, Eigen::Index b,
                             double r, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    CountMatrix counts(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double shared = normal(rng);
        for (Eigen::Index k = 0; k < p; ++k) {
            double z = normal(rng);
            if (k == a) z = shared;
            if (k == b) z = r * shared + std::sqrt(1.0 - r * r) * z;
            counts(i, k) = static_cast<std::int64_t>(1e4 * std::exp(z)) + 1;
        }
    }
    return table_from(counts);
}

double max_offdiag(const Eigen::MatrixXd& rho) {
    double best = 0.0;
    for (Eigen::Index j = 0; j < rho.rows(); ++j)
        for (Eigen::Index k = j + 1; k < rho.cols(); ++k)
            best = std::max(best, std::abs(rho(j, k)));
    return best;
}

} // namespace

TEST_CASE("fractions are pseudocounted and row-normalized") {
    CountMatrix c(3, 2);
    c << 2, 2, 0, 0, 9, 0;
    CountMatrix c3(3, 3);
    c3 << 9, 0, 0, 1, 1, 1, 2, 0, 4;

    const Eigen::MatrixXd f = to_fractions(c, 1.0);
    CHECK(f(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f(1, 0) == doctest::Approx(0.5).epsilon(1e-12)); // zeros resolved by pseudocount

    const Eigen::MatrixXd g = to_fractions(c3, 1.0);
    CHECK(g(0, 0) == doctest::Approx(10.0 / 12.0).epsilon(1e-12));
    CHECK(g(0, 1) == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
    CHECK(g(0, 2) == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
    CHECK((g.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("variation matrix on identical components is zero") {
    Eigen::MatrixXd f(4, 2);
    f.col(0) << 0.3, 0.1, 0.45, 0.2;
    f.col(1) = f.col(0);
    const VariationMatrix T = variation_matrix(f);
    CHECK(T.t(0, 1) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(T.t(0, 0) == 0.0);
}

TEST_CASE("variation matrix matches the two-point variance by hand") {
    // log ratios of the pair across the two samples are {0, 2}
    Eigen::MatrixXd f(2, 2);
    const double e2 = std::exp(2.0);
    f << 0.5, 0.5, e2 / (1 + e2), 1 / (1 + e2);
    const VariationMatrix T = variation_matrix(f);
    CHECK(T.t(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(T.t(1, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("variation matrix equals a per-pair variance loop") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    Eigen::MatrixXd f(5, 3);
    for (Eigen::Index i = 0; i < 5; ++i) {
        for (Eigen::Index k = 0; k < 3; ++k) f(i, k) = unif(rng);
        f.row(i) /= f.row(i).sum();
    }
    const VariationMatrix T = variation_matrix(f);
    for (Eigen::Index j = 0; j < 3; ++j) {
        for (Eigen::Index k = 0; k < 3; ++k) {
            Eigen::VectorXd lr = (f.col(j).array() / f.col(k).array()).log();
            const double mean = lr.mean();
            const double var = (lr.array() - mean).square().sum() / (lr.size() - 1);
            CHECK(T.t(j, k) == doctest::Approx(var).epsilon(1e-12));
        }
    }
}

TEST_CASE("variation matrix needs at least two samples") {
    CHECK_THROWS_AS(variation_matrix(Eigen::MatrixXd::Constant(1, 3, 1.0 / 3)),
                    std::runtime_error);
}

TEST_CASE("basis variances solve the symmetric case exactly") {
    const double c = 0.8;
    VariationMatrix T;
    T.t = Eigen::MatrixXd::Constant(4, 4, c);
    T.t.diagonal().setZero();
    const BasisVariances s2 = basis_variances(T, {});
    for (Eigen::Index j = 0; j < 4; ++j)
        CHECK(s2.sigma2(j) == doctest::Approx(c / 2).epsilon(1e-12));
    CHECK(s2.clamped == 0);
}

TEST_CASE("basis variances match a dense solve of the unrestricted system") {
    // t(j,k) = v(j) + v(k) with v > 0 keeps the exact solution positive,
    // so no clamping interferes with the comparison.
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unif(0.3, 2.5);
    const Eigen::Index p = 6;
    Eigen::VectorXd v(p);
    for (Eigen::Index j = 0; j < p; ++j) v(j) = unif(rng);
    VariationMatrix T;
    T.t = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index k = j + 1; k < p; ++k) T.t(j, k) = T.t(k, j) = v(j) + v(k);

    // M sigma2 = row sums of T, with M = (p-2) I + ones
    Eigen::MatrixXd M = Eigen::MatrixXd::Ones(p, p);
    M.diagonal().setConstant(static_cast<double>(p) - 1.0);
    const Eigen::VectorXd rhs = T.t.rowwise().sum();
    const Eigen::VectorXd expected = M.fullPivLu().solve(rhs);

    const BasisVariances s2 = basis_variances(T, {});
    CHECK(s2.clamped == 0);
    for (Eigen::Index j = 0; j < p; ++j) {
        CHECK(s2.sigma2(j) == doctest::Approx(expected(j)).epsilon(1e-10));
        CHECK(s2.sigma2(j) == doctest::Approx(v(j)).epsilon(1e-9));
    }
}

TEST_CASE("non-positive basis variances are clamped to the floor") {
    // exact solution is (-1.9, 2, 2, 2): row sums are (0.3, 8.1, 8.1, 8.1)
    // and M = 2 I + ones, so row 0 gives 3(-1.9) + 6 = 0.3.
    VariationMatrix T;
    T.t = Eigen::MatrixXd::Constant(4, 4, 4.0);
    T.t.diagonal().setZero();
    for (Eigen::Index k = 1; k < 4; ++k) T.t(0, k) = T.t(k, 0) = 0.1;
    const BasisVariances s2 = basis_variances(T, {});
    CHECK(s2.sigma2(0) == doctest::Approx(1e-10).epsilon(1e-6));
    CHECK(s2.sigma2(1) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(s2.sigma2(2) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(s2.sigma2(3) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(s2.clamped == 1);
}

TEST_CASE("exclusions that isolate a taxon make the system singular") {
    VariationMatrix T;
    T.t = Eigen::MatrixXd::Constant(4, 4, 1.0);
    T.t.diagonal().setZero();
    ExcludedPairs excluded;
    excluded.pairs = {{0, 1}, {0, 2}, {0, 3}};
    CHECK(excluded.contains(0, 1));
    CHECK(excluded.contains(1, 0));
    CHECK(!excluded.contains(1, 2));
    CHECK_THROWS_WITH_AS(basis_variances(T, excluded), doctest::Contains("saturated"),
                         std::runtime_error);
}

TEST_CASE("correlation formula hits its fixed points") {
    VariationMatrix T;
    T.t = Eigen::MatrixXd::Zero(2, 2);
    BasisVariances s2;
    s2.sigma2 = Eigen::Vector2d(1.0, 1.0);

    SUBCASE("zero log-ratio variance with equal variances gives rho = 1") {
        CHECK(correlations(T, s2).rho(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("t equal to the variance sum gives rho = 0") {
        T.t(0, 1) = T.t(1, 0) = 2.0;
        CHECK(correlations(T, s2).rho(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("values past the boundary are clipped") {
        s2.sigma2 = Eigen::Vector2d(1.0, 4.0);
        T.t(0, 1) = T.t(1, 0) = 9.0;
        // raw value (1 + 4 - 9) / (2 * 1 * 2) = -1.0 stays -1.0
        CHECK(correlations(T, s2).rho(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
        T.t(0, 1) = T.t(1, 0) = 12.0;
        CHECK(correlations(T, s2).rho(0, 1) == -1.0); // clip
    }
}

TEST_CASE("independent taxa produce small correlations and no exclusions") {
    const OtuTable otu = independent_counts(500, 4, 11);
    SparccConfig cfg;
    cfg.exclusion_threshold = 0.7;
    const AssociationMatrix iterated = sparcc(otu, cfg);

    SparccConfig single = cfg;
    single.max_outer_iterations = 1;
    const AssociationMatrix one_pass = sparcc(otu, single);

    CHECK(max_offdiag(iterated.rho) < 0.3);
    // nothing reached the 0.7 threshold, so iterating changed nothing
    CHECK(iterated.rho == one_pass.rho);

    // permutation oracle: breaking sample alignment gives the same null scale
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        OtuTable shuffled = otu;
        for (Eigen::Index k = 0; k < shuffled.p(); ++k) {
            std::vector<std::int64_t> col(static_cast<std::size_t>(shuffled.n()));
            for (Eigen::Index i = 0; i < shuffled.n(); ++i)
                col[static_cast<std::size_t>(i)] = shuffled.counts(i, k);
            std::shuffle(col.begin(), col.end(), rng);
            for (Eigen::Index i = 0; i < shuffled.n(); ++i)
                shuffled.counts(i, k) = col[static_cast<std::size_t>(i)];
        }
        CHECK(max_offdiag(sparcc(shuffled, single).rho) < 0.3);
    }
}

TEST_CASE("the strongest planted pair is the first exclusion candidate") {
    // The iterative procedure excludes the argmax-|rho| pair of the current
    // estimate; verify the single-pass argmax is the planted pair.
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
        const OtuTable otu = planted_pair_counts(400, 5, 1, 3, 0.9, seed);
        SparccConfig single;
        single.max_outer_iterations = 1;
        const AssociationMatrix est = sparcc(otu, single);
        Eigen::Index best_j = -1, best_k = -1;
        double best = 0.0;
        for (Eigen::Index j = 0; j < est.p(); ++j) {
            for (Eigen::Index k = j + 1; k < est.p(); ++k) {
                if (std::abs(est.rho(j, k)) > best) {
                    best = std::abs(est.rho(j, k));
                    best_j = j;
                    best_k = k;
                }
            }
        }
        CHECK(best_j == 1);
        CHECK(best_k == 3);
        CHECK(best >= 0.1); // above the default threshold, so it would be excluded
    }
}

TEST_CASE("a single outer iteration applies no exclusions") {
    const OtuTable otu = planted_pair_counts(120, 5, 0, 1, 0.9, 42);
    SparccConfig single;
    single.max_outer_iterations = 1;
    const AssociationMatrix est = sparcc(otu, single);

    // manual single pass over the same fractions
    const Eigen::MatrixXd f = to_fractions(otu.counts, single.pseudocount);
    const VariationMatrix T = variation_matrix(f);
    const AssociationMatrix manual = correlations(T, basis_variances(T, {}));
    CHECK(est.rho == manual.rho);
}

TEST_CASE("sparcc output is symmetric with unit diagonal and bounded entries") {
    const OtuTable otu = planted_pair_counts(60, 6, 0, 2, 0.8, 7);
    const AssociationMatrix est = sparcc(otu, {});
    CHECK(est.rho == est.rho.transpose().eval());
    CHECK(est.rho.diagonal().isApproxToConstant(1.0, 1e-15));
    CHECK(est.rho.minCoeff() >= -1.0);
    CHECK(est.rho.maxCoeff() <= 1.0);
    CHECK(est.taxon_names == otu.taxon_names);
}

TEST_CASE("dirichlet resampling is seed-deterministic") {
    const OtuTable otu = independent_counts(40, 5, 3);
    SparccConfig cfg;
    cfg.inner_dirichlet_draws = 8;
    cfg.seed = 77;
    const AssociationMatrix a = sparcc(otu, cfg);
    const AssociationMatrix b = sparcc(otu, cfg);
    CHECK(a.rho == b.rho);

    cfg.seed = 78;
    const AssociationMatrix c = sparcc(otu, cfg);
    CHECK(a.rho != c.rho);
    CHECK(c.rho.diagonal().isApproxToConstant(1.0, 1e-15));
    CHECK(c.rho.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("association matrices roundtrip through disk") {
    testutil::TempDir tmp;
    const OtuTable otu = independent_counts(30, 4, 9);
    const AssociationMatrix est = sparcc(otu, {});
    const auto path = tmp.file("assoc.tsv");
    write_association_matrix(est, path);
    const AssociationMatrix back = load_association_matrix(path);
    CHECK(back.taxon_names == est.taxon_names);
    CHECK((back.rho - est.rho).cwiseAbs().maxCoeff() < 1e-9);
}
