#include "netfense/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace netfense {

namespace {

struct PowerlawFit {
    long n = 0;
    double sum_log = 0.0;  // sum of ln(d / d_min)
    double alpha = 0.0;
};

PowerlawFit fit_powerlaw(const AttributedGraph& graph, int d_min) {
    PowerlawFit f;
    for (int v = 0; v < graph.n_nodes(); ++v) {
        const int d = graph.degree(v);
        if (d < d_min) continue;
        ++f.n;
        f.sum_log += std::log(static_cast<double>(d) / d_min);
    }
    if (f.n > 0 && f.sum_log > 0.0) f.alpha = 1.0 + static_cast<double>(f.n) / f.sum_log;
    return f;
}

double powerlaw_ll(const PowerlawFit& f, double alpha, int d_min) {
    return static_cast<double>(f.n) * std::log(alpha - 1.0) -
           static_cast<double>(f.n) * std::log(static_cast<double>(d_min)) - alpha * f.sum_log;
}

std::vector<int> filtered_degrees(const AttributedGraph& graph, int d_min) {
    std::vector<int> out;
    for (int v = 0; v < graph.n_nodes(); ++v)
        if (graph.degree(v) >= d_min) out.push_back(graph.degree(v));
    std::sort(out.begin(), out.end());
    return out;
}

Eigen::VectorXd surrogate_row_scores(const NormalizedAdjacency& norm, const EdgeFlip& flip,
                                     int node, const Eigen::MatrixXd& xw) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(xw.cols());
    for (const auto& [j, w] : a2_row_after_flip(norm, flip, node))
        s.noalias() += w * xw.row(j).transpose();
    return s;
}

Eigen::VectorXd surrogate_row_scores(const NormalizedAdjacency& norm, int node,
                                     const Eigen::MatrixXd& xw) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(xw.cols());
    for (SpMat::InnerIterator it(norm.a_hat_sq, node); it; ++it)
        s.noalias() += it.value() * xw.row(it.col()).transpose();
    return s;
}

}  // namespace

PowerlawTest powerlaw_unnoticeable(const AttributedGraph& before, const AttributedGraph& after,
                                   int d_min, double threshold) {
    if (before.n_nodes() == 0 || after.n_nodes() == 0)
        throw DataError("degree test needs nonempty graphs");

    PowerlawTest result;
    result.d_min = d_min;
    const PowerlawFit f1 = fit_powerlaw(before, d_min);
    const PowerlawFit f2 = fit_powerlaw(after, d_min);
    if (f1.n == 0 || f2.n == 0) throw DataError("all degrees fall below d_min");

    // Identical multisets fit identically; report an exact zero.
    if (filtered_degrees(before, d_min) == filtered_degrees(after, d_min)) {
        result.alpha_before = f1.alpha;
        result.alpha_after = f2.alpha;
        result.alpha_combined = f1.alpha;
        result.statistic = 0.0;
        result.pass = true;
        return result;
    }

    const bool degenerate1 = f1.sum_log <= 0.0;
    const bool degenerate2 = f2.sum_log <= 0.0;
    if (degenerate1 && degenerate2) {  // both flat at d_min: same shape
        result.statistic = 0.0;
        result.pass = true;
        return result;
    }
    if (degenerate1 || degenerate2) {  // one flat, one spread: maximally separated
        result.statistic = std::numeric_limits<double>::infinity();
        result.pass = false;
        return result;
    }

    PowerlawFit combined;
    combined.n = f1.n + f2.n;
    combined.sum_log = f1.sum_log + f2.sum_log;
    combined.alpha = 1.0 + static_cast<double>(combined.n) / combined.sum_log;

    result.alpha_before = f1.alpha;
    result.alpha_after = f2.alpha;
    result.alpha_combined = combined.alpha;
    result.ll_separate = powerlaw_ll(f1, f1.alpha, d_min) + powerlaw_ll(f2, f2.alpha, d_min);
    result.ll_combined = powerlaw_ll(f1, combined.alpha, d_min) + powerlaw_ll(f2, combined.alpha, d_min);
    result.statistic = -2.0 * (result.ll_combined - result.ll_separate);
    result.pass = result.statistic < threshold;
    return result;
}

PerturbationPlan random_defense(const AttributedGraph& graph, int target,
                                const DefenseConfig& config, std::uint64_t seed) {
    config.validate();
    if (target < 0 || target >= graph.n_nodes()) throw ConfigError("target node out of range");

    PerturbationPlan plan;
    plan.strategy = "random";
    plan.targets = {target};
    plan.final_graph = graph;

    std::mt19937_64 rng(seed);
    AttributedGraph current = graph;
    while (plan.n_perturbations() < config.budget_b) {
        std::vector<int> pool;
        for (int u = 0; u < current.n_nodes(); ++u)
            if (pair_eligible(current, target, u)) pool.push_back(u);
        std::shuffle(pool.begin(), pool.end(), rng);

        bool committed = false;
        for (int u : pool) {
            const EdgeFlip flip{target, u,
                                current.has_edge(target, u) ? EdgeAction::Remove : EdgeAction::Add};
            AttributedGraph flipped = current.apply_flip(flip);
            const PowerlawTest test = powerlaw_unnoticeable(graph, flipped, config.degree_test_d_min,
                                                            config.degree_test_threshold);
            if (!test.pass) continue;
            current = std::move(flipped);
            plan.steps.push_back({flip, 0.0, 0.0, pool.size()});
            committed = true;
            break;
        }
        if (!committed) break;
    }
    plan.final_graph = current;
    return plan;
}

PerturbationPlan attack_defense_nt(const AttributedGraph& graph, const GcnModel& model_private,
                                   int target, const LabelSet& labels, const DefenseConfig& config,
                                   std::uint64_t /*seed*/) {
    config.validate();
    if (target < 0 || target >= graph.n_nodes()) throw ConfigError("target node out of range");
    const int p_true = labels.priv[target];
    if (p_true < 0) throw ConfigError("target node has no known private label");
    const int p_other = 1 - p_true;

    PerturbationPlan plan;
    plan.strategy = "nt";
    plan.targets = {target};
    plan.final_graph = graph;

    const Eigen::MatrixXd xw = graph.features() * model_private.w_prime;
    AttributedGraph current = graph;
    NormalizedAdjacency norm = build_normalized(current);
    Eigen::VectorXd s = surrogate_row_scores(norm, target, xw);
    double current_margin = s[p_true] - s[p_other];

    while (plan.n_perturbations() < config.budget_b) {
        bool found = false;
        double best_margin = std::numeric_limits<double>::infinity();
        EdgeFlip best_flip;
        for (int u = 0; u < current.n_nodes(); ++u) {
            if (!pair_eligible(current, target, u)) continue;
            const EdgeFlip flip{target, u,
                                current.has_edge(target, u) ? EdgeAction::Remove : EdgeAction::Add};
            const PowerlawTest test = powerlaw_unnoticeable(
                graph, current.apply_flip(flip), config.degree_test_d_min,
                config.degree_test_threshold);
            if (!test.pass) continue;
            const Eigen::VectorXd cand = surrogate_row_scores(norm, flip, target, xw);
            const double margin = cand[p_true] - cand[p_other];
            if (!found || margin < best_margin) {
                found = true;
                best_margin = margin;
                best_flip = flip;
            }
        }
        // Only PLC-damaging flips are worth the budget.
        if (!found || best_margin > current_margin) break;

        current = current.apply_flip(best_flip);
        norm = incremental_a2_update(norm, best_flip);
        current_margin = best_margin;
        plan.steps.push_back({best_flip, best_margin, 0.0, 0});
    }
    plan.final_graph = current;
    return plan;
}

const char* to_string(CandidateStrategy s) {
    switch (s) {
        case CandidateStrategy::Random: return "random";
        case CandidateStrategy::DegreeTest: return "degree_test";
        case CandidateStrategy::PprOriginal: return "ppr_original";
        case CandidateStrategy::PprRevised: return "ppr_revised";
    }
    return "?";
}

std::vector<CaTrajectory> candidate_strategy_compare(const AttributedGraph& graph,
                                                     const std::vector<CandidateStrategy>& strategies,
                                                     int n_flips, double alpha, std::uint64_t seed) {
    const auto edges = graph.edge_list();
    if (n_flips < 0 || static_cast<long>(n_flips) > graph.n_edges())
        throw ConfigError("n_flips must lie in [0, |E|]");

    // PPR scores are shared by both PPR strategies.
    PprModel ppr;
    const bool needs_ppr =
        std::any_of(strategies.begin(), strategies.end(), [](CandidateStrategy s) {
            return s == CandidateStrategy::PprOriginal || s == CandidateStrategy::PprRevised;
        });
    if (needs_ppr) {
        ppr = build_ppr(graph, alpha);
        ppr.fundamental();
    }

    std::vector<CaTrajectory> out;
    for (const CandidateStrategy strategy : strategies) {
        std::vector<std::pair<double, std::pair<int, int>>> ranked;
        ranked.reserve(edges.size());
        if (strategy == CandidateStrategy::Random) {
            auto shuffled = edges;
            std::mt19937_64 rng(seed);
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            for (size_t i = 0; i < shuffled.size(); ++i)
                ranked.push_back({static_cast<double>(i), shuffled[i]});
        } else if (strategy == CandidateStrategy::DegreeTest) {
            for (const auto& e : edges) {
                const AttributedGraph removed =
                    graph.apply_flip({e.first, e.second, EdgeAction::Remove});
                double stat;
                try {
                    stat = powerlaw_unnoticeable(graph, removed).statistic;
                } catch (const DataError&) {
                    stat = std::numeric_limits<double>::infinity();
                }
                ranked.push_back({stat, e});
            }
        } else {
            const DeltaFormula formula = strategy == CandidateStrategy::PprOriginal
                                             ? DeltaFormula::Exact
                                             : DeltaFormula::Revised;
            for (const auto& e : edges) {
                double delta;
                try {
                    delta = delta_ppr_symmetric(ppr, e.first, e.second, formula).delta;
                } catch (const DegeneratePerturbation&) {
                    delta = std::numeric_limits<double>::infinity();
                }
                ranked.push_back({delta, e});
            }
        }
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });

        CaTrajectory traj;
        traj.strategy = strategy;
        traj.ca.push_back(avg_clustering_coefficient(graph));
        AttributedGraph current = graph;
        for (const auto& [score, e] : ranked) {
            if (static_cast<int>(traj.flips.size()) >= n_flips) break;
            // Earlier removals can strip eligibility; skip those entries.
            if (!current.has_edge(e.first, e.second)) continue;
            if (current.degree(e.first) <= 1 || current.degree(e.second) <= 1) continue;
            const EdgeFlip flip{e.first, e.second, EdgeAction::Remove};
            current = current.apply_flip(flip);
            traj.flips.push_back(flip);
            traj.ca.push_back(avg_clustering_coefficient(current));
        }
        out.push_back(std::move(traj));
    }
    return out;
}

void save_trajectories_csv(const std::vector<CaTrajectory>& trajectories,
                           const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "strategy,flip_index,ca\n";
    out.precision(17);
    for (const auto& traj : trajectories)
        for (size_t i = 0; i < traj.ca.size(); ++i)
            out << to_string(traj.strategy) << ',' << i << ',' << traj.ca[i] << '\n';
}

FeaturePlan feature_perturbation_defense(const AttributedGraph& graph,
                                         const GcnModel& model_target,
                                         const GcnModel& model_private, int target,
                                         const DefenseConfig& config) {
    config.validate();
    if (target < 0 || target >= graph.n_nodes()) throw ConfigError("target node out of range");

    const NormalizedAdjacency norm = build_normalized(graph);
    FeaturePlan plan;
    plan.target = target;
    plan.final_features = graph.features();
    Eigen::MatrixXd& x = plan.final_features;
    const int d = static_cast<int>(x.cols());
    constexpr int p1 = 0, p2 = 1;

    const int c_check = [&] {
        const Eigen::MatrixXd z = predict_full(model_target, norm, x);
        Eigen::Index best = 0;
        z.row(target).maxCoeff(&best);
        return static_cast<int>(best);
    }();

    // Only nodes within two hops carry weight in the target's surrogate row.
    Eigen::VectorXd a2row = Eigen::VectorXd::Zero(graph.n_nodes());
    std::vector<int> reach;
    for (SpMat::InnerIterator it(norm.a_hat_sq, target); it; ++it) {
        a2row[it.col()] = it.value();
        reach.push_back(static_cast<int>(it.col()));
    }

    Eigen::VectorXd s_target = Eigen::VectorXd::Zero(model_target.n_classes());
    Eigen::VectorXd s_private = Eigen::VectorXd::Zero(model_private.n_classes());
    for (int j : reach) {
        s_target.noalias() += a2row[j] * (x.row(j) * model_target.w_prime).transpose();
        s_private.noalias() += a2row[j] * (x.row(j) * model_private.w_prime).transpose();
    }

    for (int step = 0; step < config.budget_b; ++step) {
        double best_loss = std::numeric_limits<double>::infinity();
        int best_node = -1, best_feature = -1;
        for (int k : reach) {
            for (int l = 0; l < d; ++l) {
                const double h = a2row[k] * (1.0 - 2.0 * x(k, l));
                const Eigen::VectorXd st = s_target + h * model_target.w_prime.row(l).transpose();
                const Eigen::VectorXd sp = s_private + h * model_private.w_prime.row(l).transpose();
                const double loss = netfense_loss(sp, st, p1, p2, c_check, config.a_d, config.a_m,
                                                  config.raw_denominator);
                if (loss < best_loss) {
                    best_loss = loss;
                    best_node = k;
                    best_feature = l;
                }
            }
        }
        if (best_node < 0) break;
        const double h = a2row[best_node] * (1.0 - 2.0 * x(best_node, best_feature));
        s_target.noalias() += h * model_target.w_prime.row(best_feature).transpose();
        s_private.noalias() += h * model_private.w_prime.row(best_feature).transpose();
        x(best_node, best_feature) = 1.0 - x(best_node, best_feature);
        plan.steps.push_back({best_node, best_feature, best_loss});
    }
    return plan;
}

}  // namespace netfense
