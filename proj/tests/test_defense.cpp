#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "netfense/defense.hpp"
#include "netfense/evalkit.hpp"
#include "oracles.hpp"

using namespace netfense;
namespace fs = std::filesystem;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed, double scale = 0.6) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-scale, scale);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = unif(rng);
    return m;
}

GcnModel toy_model(int in_features, int classes, std::uint64_t seed, Task task) {
    GcnModel m;
    m.hidden_dim = 5;
    m.trained_for = task;
    m.w1 = random_matrix(in_features, 5, seed);
    m.w2 = random_matrix(5, classes, seed + 1);
    m.w_prime = m.w1 * m.w2;
    return m;
}

struct Fixture {
    AttributedGraph graph;
    GcnModel f_c;
    GcnModel f_p;
    PprModel ppr;
};

Fixture make_fixture(std::uint64_t seed = 404, int n = 8, double p = 0.45) {
    Fixture f{oracles::random_graph(n, p, seed, 4),
              toy_model(4, 3, seed * 3 + 1, Task::Target),
              toy_model(4, 2, seed * 3 + 2, Task::Private),
              {}};
    f.ppr = build_ppr(f.graph, 0.1);
    return f;
}

// Dense replay of one greedy iteration: loss of every eligible candidate
// anchored at v, computed from scratch.
struct OracleCandidate {
    int partner;
    EdgeAction action;
    double loss;
    double delta;
};

std::vector<OracleCandidate> oracle_candidates(const AttributedGraph& graph, const GcnModel& f_c,
                                               const GcnModel& f_p, const PprModel& ppr, int v,
                                               double tau, const DefenseConfig& cfg) {
    // predicted target class on the iteration's input graph
    const NormalizedAdjacency norm = build_normalized(graph);
    const Eigen::MatrixXd z = predict_full(f_c, norm, graph.features());
    Eigen::Index c_check;
    z.row(v).maxCoeff(&c_check);

    std::vector<OracleCandidate> out;
    for (int u = 0; u < graph.n_nodes(); ++u) {
        if (!pair_eligible(graph, v, u)) continue;
        const double delta = delta_ppr_symmetric(ppr, v, u, cfg.delta_formula).delta;
        if (!(delta < tau)) continue;
        const EdgeAction action = graph.has_edge(v, u) ? EdgeAction::Remove : EdgeAction::Add;
        const AttributedGraph flipped = graph.apply_flip({v, u, action});
        const Eigen::MatrixXd a_hat = oracles::dense_normalized(flipped);
        const Eigen::MatrixXd scores = a_hat * a_hat * flipped.features();
        const Eigen::VectorXd s_p = (scores * f_p.w_prime).row(v);
        const Eigen::VectorXd s_c = (scores * f_c.w_prime).row(v);
        out.push_back({u, action,
                       netfense_loss(s_p, s_c, 0, 1, static_cast<int>(c_check), cfg.a_d, cfg.a_m,
                                     cfg.raw_denominator),
                       delta});
    }
    return out;
}

}  // namespace

TEST_CASE("netfense_loss: closed forms") {
    Eigen::VectorXd sp(2), sc(3);
    sc << 0.2, -0.4, 0.9;

    SUBCASE("equal private scores give zero loss") {
        sp << 0.7, 0.7;
        CHECK(netfense_loss(sp, sc, 0, 1, 2, 2.0, 1.0) == doctest::Approx(0.0));
        CHECK(netfense_loss(sp, sc, 0, 1, 0, 0.5, 2.0) == doctest::Approx(0.0));
    }
    SUBCASE("a_m = 0 reduces to the gap power") {
        sp << 1.4, 0.3;
        CHECK(netfense_loss(sp, sc, 0, 1, 2, 2.0, 0.0) == doctest::Approx(std::pow(1.1, 2.0)));
        CHECK(netfense_loss(sp, sc, 0, 1, 2, 1.0, 0.0) == doctest::Approx(1.1));
    }
    SUBCASE("denominator is the softmax confidence of the checked class") {
        sp << 0.9, 0.1;
        const double conf = std::exp(sc[2]) / (std::exp(sc[0]) + std::exp(sc[1]) + std::exp(sc[2]));
        CHECK(netfense_loss(sp, sc, 0, 1, 2, 2.0, 1.0) ==
              doctest::Approx(std::pow(0.8, 2.0) / conf));
        CHECK(netfense_loss(sp, sc, 0, 1, 2, 2.0, 2.0) ==
              doctest::Approx(std::pow(0.8, 2.0) / (conf * conf)));
    }
    SUBCASE("raw denominator variant guards non-positive confidence") {
        sp << 0.9, 0.1;
        CHECK(netfense_loss(sp, sc, 0, 1, 2, 2.0, 1.0, true) ==
              doctest::Approx(std::pow(0.8, 2.0) / 0.9));
        CHECK(std::isinf(netfense_loss(sp, sc, 0, 1, 1, 2.0, 1.0, true)));
    }
}

TEST_CASE("netfense_loss on the fixture equals the dense surrogate oracle") {
    const Fixture f = make_fixture();
    const Eigen::MatrixXd a_hat = oracles::dense_normalized(f.graph);
    const Eigen::MatrixXd scores = a_hat * a_hat * f.graph.features();
    const int v = 3;
    const Eigen::VectorXd s_p = (scores * f.f_p.w_prime).row(v);
    const Eigen::VectorXd s_c = (scores * f.f_c.w_prime).row(v);
    const double gap = std::abs(s_p[0] - s_p[1]);
    Eigen::ArrayXd e = (s_c.array() - s_c.maxCoeff()).exp();
    const double conf = e[1] / e.sum();
    CHECK(netfense_loss(s_p, s_c, 0, 1, 1, 2.0, 1.0) ==
          doctest::Approx(gap * gap / conf).epsilon(1e-12));
}

TEST_CASE("single_target_defense: budget zero and empty candidate set") {
    const Fixture f = make_fixture();
    DefenseConfig cfg;

    cfg.budget_b = 0;
    const PerturbationPlan none = single_target_defense(f.graph, f.f_c, f.f_p, f.ppr, 2, cfg);
    CHECK(none.steps.empty());
    CHECK(none.final_graph.edge_list() == f.graph.edge_list());

    cfg.budget_b = 5;
    cfg.tau_value = 0.0;  // below every delta
    const PerturbationPlan blocked = single_target_defense(f.graph, f.f_c, f.f_p, f.ppr, 2, cfg);
    CHECK(blocked.steps.empty());

    CHECK_THROWS_AS(single_target_defense(f.graph, f.f_c, f.f_p, f.ppr, 99, cfg), ConfigError);
}

TEST_CASE("single_target_defense: first committed flip is the exhaustive argmin") {
    for (std::uint64_t seed : {404ULL, 405ULL, 406ULL}) {
        const Fixture f = make_fixture(seed);
        const int v = 1;
        DefenseConfig cfg;
        cfg.budget_b = 1;
        const double tau = quantile_threshold(f.ppr, f.graph, cfg.tau_quantile);
        cfg.tau_value = tau;

        const PerturbationPlan plan = single_target_defense(f.graph, f.f_c, f.f_p, f.ppr, v, cfg);
        const auto oracle = oracle_candidates(f.graph, f.f_c, f.f_p, f.ppr, v, tau, cfg);
        if (oracle.empty()) {
            CHECK(plan.steps.empty());
            continue;
        }
        REQUIRE(plan.steps.size() == 1);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : oracle) best = std::min(best, c.loss);
        CHECK(plan.steps[0].loss == doctest::Approx(best).epsilon(1e-9));
        CHECK(plan.steps[0].candidate_count == oracle.size());
    }
}

TEST_CASE("single_target_defense: budget law, per-step optimality, candidate membership") {
    const Fixture f = make_fixture(904, 10, 0.5);
    const int v = 4;
    DefenseConfig cfg;
    cfg.budget_b = 4;
    const double tau = quantile_threshold(f.ppr, f.graph, cfg.tau_quantile);
    cfg.tau_value = tau;

    const PerturbationPlan plan = single_target_defense(f.graph, f.f_c, f.f_p, f.ppr, v, cfg);
    CHECK(plan.n_perturbations() <= cfg.budget_b);

    // N_p on the final graph equals the number of committed steps
    long diff = 0;
    for (int a = 0; a < f.graph.n_nodes(); ++a)
        for (int b = a + 1; b < f.graph.n_nodes(); ++b)
            if (f.graph.has_edge(a, b) != plan.final_graph.has_edge(a, b)) ++diff;
    CHECK(diff == plan.n_perturbations());

    // replay each iteration with the dense oracle
    AttributedGraph current = f.graph;
    PprModel ppr = f.ppr;
    for (const auto& step : plan.steps) {
        const auto oracle = oracle_candidates(current, f.f_c, f.f_p, ppr, v, tau, cfg);
        bool member = false;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : oracle) {
            best = std::min(best, c.loss);
            if (c.partner == step.flip.v && c.action == step.flip.action) member = true;
        }
        CHECK(member);
        CHECK(step.loss == doctest::Approx(best).epsilon(1e-9));
        CHECK(step.flip.u == v);  // anchored at the target
        current = current.apply_flip(step.flip);
        ppr = build_ppr(current, cfg.alpha);
    }
}

TEST_CASE("multi_target_defense: composition semantics") {
    const Fixture f = make_fixture(555, 9, 0.5);
    DefenseConfig cfg;
    cfg.budget_b = 2;

    SUBCASE("no targets, no change") {
        const PerturbationPlan plan =
            multi_target_defense(f.graph, f.f_c, f.f_p, f.ppr, {}, cfg, 7);
        CHECK(plan.steps.empty());
        CHECK(plan.final_graph.edge_list() == f.graph.edge_list());
    }
    SUBCASE("one target behaves like the single-target call") {
        const PerturbationPlan multi =
            multi_target_defense(f.graph, f.f_c, f.f_p, f.ppr, {3}, cfg, 7);
        DefenseConfig cfg1 = cfg;
        cfg1.tau_value = quantile_threshold(f.ppr, f.graph, cfg.tau_quantile);
        const PerturbationPlan single =
            single_target_defense(f.graph, f.f_c, f.f_p, f.ppr, 3, cfg1);
        REQUIRE(multi.steps.size() == single.steps.size());
        for (size_t i = 0; i < multi.steps.size(); ++i) {
            CHECK(multi.steps[i].flip.u == single.steps[i].flip.u);
            CHECK(multi.steps[i].flip.v == single.steps[i].flip.v);
        }
    }
    SUBCASE("two targets replay as sequential single-target runs") {
        const std::uint64_t seed = 11;
        const PerturbationPlan multi =
            multi_target_defense(f.graph, f.f_c, f.f_p, f.ppr, {2, 6}, cfg, seed);

        std::vector<int> order{2, 6};
        std::mt19937_64 rng(seed);
        std::shuffle(order.begin(), order.end(), rng);
        CHECK(multi.targets == order);

        DefenseConfig cfg1 = cfg;
        cfg1.tau_value = quantile_threshold(f.ppr, f.graph, cfg.tau_quantile);
        const PerturbationPlan first =
            single_target_defense(f.graph, f.f_c, f.f_p, f.ppr, order[0], cfg1);
        const PprModel ppr2 = build_ppr(first.final_graph, cfg.alpha);
        const PerturbationPlan second = single_target_defense(first.final_graph, f.f_c, f.f_p,
                                                              ppr2, order[1], cfg1);
        CHECK(multi.final_graph.edge_list() == second.final_graph.edge_list());
        CHECK(multi.steps.size() == first.steps.size() + second.steps.size());
    }
}

TEST_CASE("select_targets") {
    std::vector<int> test_set;
    for (int v = 0; v < 40; ++v) test_set.push_back(v);

    SUBCASE("multi mode returns the whole test set") {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(40);
        CHECK(select_targets(m, test_set, TargetMode::Multi, 1) == test_set);
    }
    SUBCASE("single mode picks margin extremes and random fills, deduplicated") {
        Eigen::VectorXd m(40);
        for (int v = 0; v < 40; ++v) m[v] = (v < 30) ? 0.9 - 0.02 * v : -0.5;  // 30 positive
        const auto chosen = select_targets(m, test_set, TargetMode::Single, 3);

        // top-10 by margin are nodes 0..9
        for (int v = 0; v < 10; ++v) CHECK(chosen[static_cast<size_t>(v)] == v);
        // next come the 10 lowest positive margins: nodes 29..20
        for (int i = 0; i < 10; ++i) CHECK(chosen[static_cast<size_t>(10 + i)] == 29 - i);
        // no duplicates overall
        std::vector<int> sorted = chosen;
        std::sort(sorted.begin(), sorted.end());
        CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
        CHECK(chosen.size() <= 40);
        CHECK(chosen.size() >= 20);
    }
    SUBCASE("fewer than ten positive margins still returns the existing ones") {
        Eigen::VectorXd m = Eigen::VectorXd::Constant(40, -0.2);
        m[4] = 0.5;
        m[7] = 0.1;
        const auto chosen = select_targets(m, test_set, TargetMode::Single, 9);
        CHECK(chosen[0] == 4);
        CHECK(chosen[1] == 7);
        CHECK(chosen.size() >= 2);
    }
}

TEST_CASE("perturbation plans serialize to JSON and back") {
    const Fixture f = make_fixture(321, 9, 0.5);
    DefenseConfig cfg;
    cfg.budget_b = 3;
    const PerturbationPlan plan = single_target_defense(f.graph, f.f_c, f.f_p, f.ppr, 0, cfg);

    const fs::path file = fs::temp_directory_path() / "netfense_plan_test.json";
    save_plan_json(plan, file.string());
    const PerturbationPlan back = load_plan_json(file.string());
    fs::remove(file);

    CHECK(back.strategy == plan.strategy);
    CHECK(back.targets == plan.targets);
    REQUIRE(back.steps.size() == plan.steps.size());
    for (size_t i = 0; i < plan.steps.size(); ++i) {
        CHECK(back.steps[i].flip.u == plan.steps[i].flip.u);
        CHECK(back.steps[i].flip.v == plan.steps[i].flip.v);
        CHECK(back.steps[i].flip.action == plan.steps[i].flip.action);
        CHECK(back.steps[i].loss == plan.steps[i].loss);
        CHECK(back.steps[i].candidate_count == plan.steps[i].candidate_count);
    }
}
