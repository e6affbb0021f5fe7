#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "netfense/ppr.hpp"
#include "oracles.hpp"

using namespace netfense;

namespace {

AttributedGraph path_graph(int n) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    return AttributedGraph(n, edges, Eigen::MatrixXd::Zero(n, 1));
}

AttributedGraph cycle_graph(int n) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
    return AttributedGraph(n, edges, Eigen::MatrixXd::Zero(n, 1));
}

// 5-node fixture with distinct degrees: path 0-1-2-3-4 plus chord (1,3)
AttributedGraph mixed_fixture() {
    return AttributedGraph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 3}},
                           Eigen::MatrixXd::Zero(5, 1));
}

}  // namespace

TEST_CASE("build_ppr: restart-always gives the identity") {
    const PprModel model = build_ppr(mixed_fixture(), 1.0);
    CHECK(model.ppr_matrix() == Eigen::MatrixXd::Identity(5, 5));
}

TEST_CASE("build_ppr: rows of the PPR matrix match power iteration") {
    const AttributedGraph g = path_graph(3);
    const PprModel model = build_ppr(g, 0.1);
    const Eigen::MatrixXd pi = model.ppr_matrix();
    for (int r = 0; r < 3; ++r) {
        const Eigen::VectorXd want = oracles::power_iteration_ppr_row(g, 0.1, r);
        CHECK((pi.row(r).transpose() - want).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("build_ppr: rows sum to one, entries nonnegative, isolated fallback") {
    const AttributedGraph g(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}}, Eigen::MatrixXd::Zero(6, 2));
    // node 5 is isolated and handled by the self-loop row
    const PprModel model = build_ppr(g, 0.15);
    const Eigen::MatrixXd pi = model.ppr_matrix();
    for (int r = 0; r < 6; ++r) CHECK(pi.row(r).sum() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(pi.minCoeff() >= -1e-12);
    CHECK(pi(5, 5) == doctest::Approx(1.0));

    // column sums cached at build time agree with the materialized inverse
    CHECK((model.colsum().transpose() - model.fundamental().colwise().sum()).cwiseAbs().maxCoeff() <
          1e-9);

    CHECK_THROWS_AS(build_ppr(g, 0.0), ConfigError);
    CHECK_THROWS_AS(build_ppr(g, 1.5), ConfigError);
}

TEST_CASE("delta_ppr_directed: restart-always kills the walk term") {
    const AttributedGraph g = mixed_fixture();
    const PprModel model = build_ppr(g, 1.0);
    for (int u = 0; u < 5; ++u)
        for (int v = 0; v < 5; ++v) {
            if (u == v) continue;
            const EdgeAction action = g.has_edge(u, v) ? EdgeAction::Remove : EdgeAction::Add;
            CHECK(delta_ppr_directed(model, u, v, action) == doctest::Approx(0.0));
        }
}

TEST_CASE("delta_ppr_directed: equals the dense Sherman-Morrison oracle") {
    const AttributedGraph g = cycle_graph(4);
    const PprModel model = build_ppr(g, 0.1);
    const double got = delta_ppr_directed(model, 0, 1, EdgeAction::Remove);
    const double want = oracles::dense_delta_directed(g, 0.1, 0, 1, EdgeAction::Remove);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));

    // a few more pairs and actions on an irregular fixture
    const AttributedGraph h = mixed_fixture();
    const PprModel mh = build_ppr(h, 0.2);
    for (const auto& [u, v] : std::vector<std::pair<int, int>>{{0, 1}, {1, 3}, {0, 4}, {2, 4}}) {
        const EdgeAction action = h.has_edge(u, v) ? EdgeAction::Remove : EdgeAction::Add;
        CHECK(delta_ppr_directed(mh, u, v, action) ==
              doctest::Approx(oracles::dense_delta_directed(h, 0.2, u, v, action)).epsilon(1e-9));
    }
}

TEST_CASE("delta_ppr_directed: revised form adds high-PPR pairs with less influence") {
    // path: (M1^-1)_{0,v} strictly decreases with distance from 0
    const AttributedGraph g = path_graph(6);
    const PprModel model = build_ppr(g, 0.1);
    const int u = 0;
    std::vector<double> entries, magnitudes;
    for (int v = 2; v < 6; ++v) {  // non-neighbors only: all Add actions
        entries.push_back(model.entry(u, v));
        magnitudes.push_back(
            std::abs(delta_ppr_directed(model, u, v, EdgeAction::Add, DeltaFormula::Revised)));
    }
    for (size_t i = 0; i + 1 < entries.size(); ++i) {
        CHECK(entries[i] > entries[i + 1]);          // fixture premise
        CHECK(magnitudes[i] < magnitudes[i + 1]);    // larger entry, smaller |delta|
    }
}

TEST_CASE("delta_ppr_directed: degenerate denominator is rejected") {
    // 2-node single edge at alpha = 1 - sqrt(1/2): the revised denominator
    // 1 + c'(M1^-1)_uv vanishes for the removal
    const AttributedGraph g(2, {{0, 1}}, Eigen::MatrixXd::Zero(2, 1));
    const PprModel model = build_ppr(g, 1.0 - std::sqrt(0.5));
    CHECK_THROWS_AS(
        delta_ppr_directed(model, 0, 1, EdgeAction::Remove, DeltaFormula::Revised),
        DegeneratePerturbation);
}

TEST_CASE("delta_ppr_symmetric: symmetry and dense oracle") {
    const AttributedGraph g = mixed_fixture();
    const PprModel model = build_ppr(g, 0.1);

    const InfluenceScore ab = delta_ppr_symmetric(model, 1, 2);
    const InfluenceScore ba = delta_ppr_symmetric(model, 2, 1);
    CHECK(ab.delta == doctest::Approx(ba.delta).epsilon(1e-12));
    CHECK(ab.delta == doctest::Approx(std::abs(ab.direction_parts.first +
                                               ab.direction_parts.second)));

    const double dense = oracles::dense_delta_directed(g, 0.1, 1, 2, EdgeAction::Remove) +
                         oracles::dense_delta_directed(g, 0.1, 2, 1, EdgeAction::Remove);
    CHECK(ab.delta == doctest::Approx(std::abs(dense)).epsilon(1e-9));

    const PprModel restart = build_ppr(g, 1.0);
    CHECK(delta_ppr_symmetric(restart, 1, 2).delta == doctest::Approx(0.0));
}

TEST_CASE("rank-1 identity on random graphs") {
    int tested = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 4 + trial % 22;
        const AttributedGraph g = oracles::random_graph(n, 0.3, 9000 + trial);
        const Eigen::MatrixXd m1 = oracles::dense_m1(g, 0.1);
        const Eigen::MatrixXd m1_inv = m1.inverse();
        std::mt19937_64 rng(trial);
        std::uniform_int_distribution<int> pick(0, n - 1);
        for (int k = 0; k < 5; ++k) {
            const int u = pick(rng), v = pick(rng);
            if (u == v || g.degree(u) == 0) continue;
            const EdgeAction action = g.has_edge(u, v) ? EdgeAction::Remove : EdgeAction::Add;
            const Eigen::MatrixXd m2 = oracles::dense_m2(g, 0.1, u, v, action);
            const double trace_g = (m2 * m1_inv).trace();
            if (std::abs(1.0 + trace_g) < 1e-9) continue;
            const Eigen::MatrixXd closed = -(m1_inv * m2 * m1_inv) / (1.0 + trace_g);
            const Eigen::MatrixXd direct = (m1 + m2).inverse() - m1_inv;
            CHECK((closed - direct).cwiseAbs().maxCoeff() < 1e-9);
            ++tested;
        }
    }
    CHECK(tested > 50);
}

TEST_CASE("candidate_set: thresholds, anchoring, monotonicity") {
    const AttributedGraph g = mixed_fixture();
    const PprModel model = build_ppr(g, 0.1);

    SUBCASE("tau below the minimum delta gives the empty set") {
        CHECK(candidate_set(model, g, std::nullopt, 0.0).empty());
        CHECK(candidate_set(model, g, 2, -1.0).empty());
    }
    SUBCASE("tau infinite with anchor keeps every eligible partner") {
        const auto cands =
            candidate_set(model, g, 2, std::numeric_limits<double>::infinity());
        std::set<int> partners;
        for (const auto& c : cands) {
            CHECK(c.u == 2);
            partners.insert(c.v);
        }
        // all four other nodes are eligible: removals (1,3) have both
        // endpoints at degree >= 2, additions (0,4) are unconstrained
        CHECK(partners == std::set<int>{0, 1, 3, 4});
    }
    SUBCASE("monotone in tau") {
        const auto big = candidate_set(model, g, std::nullopt, 1e9);
        std::vector<double> deltas;
        for (const auto& c : big) deltas.push_back(c.delta);
        for (double tau : {deltas[1], deltas[deltas.size() / 2], deltas.back()}) {
            const auto small = candidate_set(model, g, std::nullopt, tau);
            CHECK(small.size() <= big.size());
            for (size_t i = 0; i < small.size(); ++i) {
                CHECK(small[i].u == big[i].u);
                CHECK(small[i].v == big[i].v);
            }
        }
    }
    SUBCASE("degree rules: removals need both endpoints above degree 1") {
        // removing (3,4) would strand node 4 (degree 1): not a candidate
        const auto cands = candidate_set(model, g, 4, std::numeric_limits<double>::infinity());
        for (const auto& c : cands) CHECK(c.action == EdgeAction::Add);
    }
    SUBCASE("isolated nodes never participate") {
        const AttributedGraph with_isolated(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}},
                                            Eigen::MatrixXd::Zero(6, 2));
        const PprModel m = build_ppr(with_isolated, 0.1);
        const auto cands =
            candidate_set(m, with_isolated, std::nullopt, std::numeric_limits<double>::infinity());
        for (const auto& c : cands) {
            CHECK(c.u != 5);
            CHECK(c.v != 5);
        }
    }
}

TEST_CASE("quantile_threshold: limits and median against exhaustive enumeration") {
    const AttributedGraph g = mixed_fixture();
    const PprModel model = build_ppr(g, 0.1);
    model.fundamental();  // one entry path for the enumeration and the library

    // exhaustive eligible-pair deltas
    std::vector<double> deltas;
    for (int u = 0; u < 5; ++u)
        for (int v = u + 1; v < 5; ++v) {
            if (!pair_eligible(g, u, v)) continue;
            deltas.push_back(delta_ppr_symmetric(model, u, v).delta);
        }
    std::sort(deltas.begin(), deltas.end());

    CHECK(quantile_threshold(model, g, 0.999999) == doctest::Approx(deltas.back()));
    const size_t k = static_cast<size_t>(std::ceil(0.5 * static_cast<double>(deltas.size())));
    CHECK(quantile_threshold(model, g, 0.5) == doctest::Approx(deltas[k - 1]));

    SUBCASE("candidate_set at the 0.9 quantile equals the enumerated subset") {
        const double tau = quantile_threshold(model, g, 0.9);
        const auto cands = candidate_set(model, g, std::nullopt, tau);
        size_t below = 0;
        for (double d : deltas)
            if (d < tau) ++below;
        CHECK(cands.size() == below);
        for (const auto& c : cands) CHECK(c.delta < tau);
    }
    SUBCASE("restart-always graph has threshold zero") {
        const PprModel degenerate = build_ppr(g, 1.0);
        CHECK(quantile_threshold(degenerate, g, 0.5) == doctest::Approx(0.0));
    }
    CHECK_THROWS_AS(quantile_threshold(model, g, 0.0), ConfigError);
    CHECK_THROWS_AS(quantile_threshold(model, g, 1.0), ConfigError);
}

TEST_CASE("ppr row stochasticity backs the aggregate simplification") {
    const AttributedGraph g = mixed_fixture();
    const PprModel model = build_ppr(g, 0.3);
    const Eigen::MatrixXd fund = model.fundamental();
    for (int v = 0; v < 5; ++v)
        CHECK(0.3 * fund.row(v).sum() == doctest::Approx(1.0).epsilon(1e-10));
}
