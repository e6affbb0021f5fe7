#include "netfense/defense.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "json.hpp"

namespace netfense {

void DefenseConfig::validate() const {
    if (budget_b < 0) throw ConfigError("budget must be >= 0");
    if (!(tau_quantile > 0.0) || !(tau_quantile < 1.0))
        throw ConfigError("tau quantile must lie in (0,1)");
    if (a_d < 0.0 || a_m < 0.0) throw ConfigError("loss exponents must be >= 0");
    if (!(alpha > 0.0) || alpha > 1.0) throw ConfigError("alpha must lie in (0,1]");
    if (ppr_refresh_every < 1) throw ConfigError("ppr_refresh_every must be >= 1");
}

double netfense_loss(const Eigen::VectorXd& private_scores, const Eigen::VectorXd& target_scores,
                     int p1, int p2, int c_check, double a_d, double a_m, bool raw_denominator) {
    const double gap = std::abs(private_scores[p1] - private_scores[p2]);
    const double numerator = std::pow(gap, a_d);
    if (a_m == 0.0) return numerator;

    double conf;
    if (raw_denominator) {
        conf = target_scores[c_check];
        if (!(conf > 0.0)) return std::numeric_limits<double>::infinity();
    } else {
        // softmax probability of the predicted class over the surrogate row
        const double mx = target_scores.maxCoeff();
        const double denom_sum = (target_scores.array() - mx).exp().sum();
        conf = std::exp(target_scores[c_check] - mx) / denom_sum;
    }
    return numerator / std::pow(conf, a_m);
}

namespace {

// Surrogate score rows of node v under a candidate flip, for both tasks.
// xw_* are the cached products X * W'.
void scores_after_flip(const NormalizedAdjacency& norm, const EdgeFlip& flip, int v,
                       const Eigen::MatrixXd& xw_target, const Eigen::MatrixXd& xw_private,
                       Eigen::VectorXd& s_target, Eigen::VectorXd& s_private) {
    s_target = Eigen::VectorXd::Zero(xw_target.cols());
    s_private = Eigen::VectorXd::Zero(xw_private.cols());
    for (const auto& [j, w] : a2_row_after_flip(norm, flip, v)) {
        s_target.noalias() += w * xw_target.row(j).transpose();
        s_private.noalias() += w * xw_private.row(j).transpose();
    }
}

struct BestCandidate {
    bool found = false;
    ScoredPair pair;
    double loss = std::numeric_limits<double>::infinity();
};

}  // namespace

PerturbationPlan single_target_defense(const AttributedGraph& graph, const GcnModel& model_target,
                                       const GcnModel& model_private, const PprModel& ppr,
                                       int target, const DefenseConfig& config) {
    config.validate();
    if (target < 0 || target >= graph.n_nodes()) throw ConfigError("target node out of range");
    if (ppr.n_nodes() != graph.n_nodes()) throw ConfigError("ppr model does not match graph");

    PerturbationPlan plan;
    plan.targets = {target};
    plan.strategy = "netfense";
    plan.final_graph = graph;
    if (config.budget_b == 0) return plan;

    const Eigen::MatrixXd& x = graph.features();
    const Eigen::MatrixXd xw_target = x * model_target.w_prime;
    const Eigen::MatrixXd xw_private = x * model_private.w_prime;
    constexpr int p1 = 0, p2 = 1;

    AttributedGraph current = graph;
    NormalizedAdjacency norm = build_normalized(current);

    // Predicted target class of v on the pre-perturbation graph (full model).
    const int c_check = [&] {
        const Eigen::MatrixXd z = predict_full(model_target, norm, x);
        Eigen::Index best = 0;
        z.row(target).maxCoeff(&best);
        return static_cast<int>(best);
    }();

    PprModel ppr_current = ppr;
    double tau = config.tau_value
                     ? *config.tau_value
                     : quantile_threshold(ppr_current, current, config.tau_quantile,
                                          config.delta_formula);
    int flips_since_refresh = 0;

    while (plan.n_perturbations() < config.budget_b) {
        if (config.refresh_tau_each_iter)
            tau = quantile_threshold(ppr_current, current, config.tau_quantile,
                                     config.delta_formula);
        const auto candidates =
            candidate_set(ppr_current, current, target, tau, config.delta_formula);
        if (candidates.empty()) break;

        BestCandidate best;
        Eigen::VectorXd s_target, s_private;
        for (const auto& cand : candidates) {
            const EdgeFlip flip{cand.u, cand.v, cand.action};
            scores_after_flip(norm, flip, target, xw_target, xw_private, s_target, s_private);
            const double loss = netfense_loss(s_private, s_target, p1, p2, c_check, config.a_d,
                                              config.a_m, config.raw_denominator);
            // candidates arrive sorted by (delta, u, v): strict < is the
            // (loss, delta, index) lexicographic tie-break
            if (!best.found || loss < best.loss) {
                best.found = true;
                best.loss = loss;
                best.pair = cand;
            }
        }
        if (!best.found || std::isinf(best.loss)) break;  // nothing scoreable

        const EdgeFlip flip{best.pair.u, best.pair.v, best.pair.action};
        current = current.apply_flip(flip);
        norm = incremental_a2_update(norm, flip);
        plan.steps.push_back({flip, best.loss, best.pair.delta, candidates.size()});

        if (++flips_since_refresh >= config.ppr_refresh_every) {
            ppr_current = build_ppr(current, config.alpha);
            flips_since_refresh = 0;
        }
    }

    plan.final_graph = current;
    return plan;
}

PerturbationPlan multi_target_defense(const AttributedGraph& graph, const GcnModel& model_target,
                                      const GcnModel& model_private, const PprModel& ppr,
                                      const std::vector<int>& targets, const DefenseConfig& config,
                                      std::uint64_t seed) {
    config.validate();
    std::vector<int> order = targets;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    PerturbationPlan plan;
    plan.strategy = "netfense";
    plan.targets = order;
    plan.final_graph = graph;

    // The unnoticeability threshold defaults to one clean-graph quantile
    // shared by every target.
    DefenseConfig cfg = config;
    if (!cfg.tau_value && !cfg.refresh_tau_each_iter)
        cfg.tau_value = quantile_threshold(ppr, graph, cfg.tau_quantile, cfg.delta_formula);

    AttributedGraph current = graph;
    bool first = true;
    for (int v : order) {
        const PprModel ppr_v = first ? ppr : build_ppr(current, cfg.alpha);
        first = false;
        PerturbationPlan sub =
            single_target_defense(current, model_target, model_private, ppr_v, v, cfg);
        for (const auto& step : sub.steps) plan.steps.push_back(step);
        current = std::move(sub.final_graph);
    }
    plan.final_graph = current;
    return plan;
}

std::vector<int> select_targets(const Eigen::VectorXd& margins, const std::vector<int>& test_set,
                                TargetMode mode, std::uint64_t seed) {
    if (mode == TargetMode::Multi) return test_set;

    std::vector<int> positive;
    for (int v : test_set)
        if (std::isfinite(margins[v]) && margins[v] > 0.0) positive.push_back(v);
    std::sort(positive.begin(), positive.end(), [&](int a, int b) {
        if (margins[a] != margins[b]) return margins[a] > margins[b];
        return a < b;
    });
    if (positive.size() < 20)
        std::fprintf(stderr,
                     "select_targets: only %zu positive-margin test nodes; "
                     "high/low confidence groups overlap\n",
                     positive.size());

    // Union of the three groups, first appearance wins.
    std::vector<int> chosen;
    auto add_unique = [&chosen](int v) {
        if (std::find(chosen.begin(), chosen.end(), v) == chosen.end()) chosen.push_back(v);
    };
    const size_t k = std::min<size_t>(10, positive.size());
    for (size_t i = 0; i < k; ++i) add_unique(positive[i]);                         // high confidence
    for (size_t i = 0; i < k; ++i) add_unique(positive[positive.size() - 1 - i]);   // low confidence

    std::vector<int> pool = test_set;
    std::mt19937_64 rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    for (size_t i = 0; i < std::min<size_t>(20, pool.size()); ++i) add_unique(pool[i]);
    return chosen;
}

void save_plan_json(const PerturbationPlan& plan, const std::string& path) {
    nlohmann::ordered_json j;
    j["strategy"] = plan.strategy;
    j["targets"] = plan.targets;
    j["n_perturbations"] = plan.n_perturbations();
    j["steps"] = nlohmann::ordered_json::array();
    for (const auto& step : plan.steps) {
        j["steps"].push_back({{"u", step.flip.u},
                              {"v", step.flip.v},
                              {"action", to_string(step.flip.action)},
                              {"loss", step.loss},
                              {"delta_ppr", step.delta_ppr},
                              {"candidate_count", step.candidate_count}});
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

PerturbationPlan load_plan_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, 0, e.what());
    }
    PerturbationPlan plan;
    plan.strategy = j.at("strategy").get<std::string>();
    plan.targets = j.at("targets").get<std::vector<int>>();
    for (const auto& s : j.at("steps")) {
        PlanStep step;
        step.flip.u = s.at("u").get<int>();
        step.flip.v = s.at("v").get<int>();
        step.flip.action =
            s.at("action").get<std::string>() == "add" ? EdgeAction::Add : EdgeAction::Remove;
        step.loss = s.at("loss").get<double>();
        step.delta_ppr = s.at("delta_ppr").get<double>();
        step.candidate_count = s.at("candidate_count").get<std::size_t>();
        plan.steps.push_back(step);
    }
    return plan;
}

}  // namespace netfense
