#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "netfense/gcn.hpp"
#include "netfense/graph.hpp"
#include "netfense/ppr.hpp"

namespace netfense {

struct DefenseConfig {
    int budget_b = 20;
    double tau_quantile = 0.9;
    double a_d = 2.0;  // privacy-gap exponent
    double a_m = 1.0;  // utility-maintenance exponent
    double alpha = 0.1;

    // Threshold handling: tau_value short-circuits the quantile computation
    // (callers reuse one clean-graph threshold across targets by default);
    // refresh_tau_each_iter recomputes it from the evolving graph instead.
    std::optional<double> tau_value;
    bool refresh_tau_each_iter = false;

    // Rebuild the PPR model after this many committed flips (1 = every flip).
    int ppr_refresh_every = 1;

    DeltaFormula delta_formula = DeltaFormula::Exact;

    // Use the raw target-class surrogate score as the loss denominator
    // instead of its softmax probability. Raw scores can be non-positive;
    // such candidates score +inf and are never selected.
    bool raw_denominator = false;

    // Degree-distribution likelihood-ratio test (RD and NT baselines). The
    // default threshold is the value the unnoticeability test was tuned to;
    // the conventional chi-square(1) value 3.84 is available via config.
    double degree_test_threshold = 0.004;
    int degree_test_d_min = 2;

    void validate() const;
};

struct PlanStep {
    EdgeFlip flip;
    double loss = 0.0;
    double delta_ppr = 0.0;
    std::size_t candidate_count = 0;
};

struct PerturbationPlan {
    std::vector<PlanStep> steps;
    std::vector<int> targets;
    std::string strategy;
    AttributedGraph final_graph;

    long n_perturbations() const { return static_cast<long>(steps.size()); }
};

// Bi-task score of a candidate graph at node v (lower is better): the
// private-class score gap to the a_d power over the (softmax-transformed)
// target-class score to the a_m power.
double netfense_loss(const Eigen::VectorXd& private_scores, const Eigen::VectorXd& target_scores,
                     int p1, int p2, int c_check, double a_d, double a_m,
                     bool raw_denominator = false);

// Greedy budgeted defense of one node: per iteration, score every candidate
// flip anchored at v by netfense_loss on its lazily-updated surrogate row,
// commit the argmin (ties by smaller PPR delta, then node index), stop on
// budget exhaustion or an empty candidate set. The models must be pre-trained
// on the input graph's clean ancestor; ppr must describe `graph`.
PerturbationPlan single_target_defense(const AttributedGraph& graph, const GcnModel& model_target,
                                       const GcnModel& model_private, const PprModel& ppr,
                                       int target, const DefenseConfig& config);

// Applies the single-target defense to a seeded shuffle of `targets`,
// feeding each perturbed graph to the next target. Per-target budget.
PerturbationPlan multi_target_defense(const AttributedGraph& graph, const GcnModel& model_target,
                                      const GcnModel& model_private, const PprModel& ppr,
                                      const std::vector<int>& targets, const DefenseConfig& config,
                                      std::uint64_t seed);

enum class TargetMode { Single, Multi };

// Single mode: the 10 highest-positive-margin, 10 lowest-positive-margin and
// 20 random test nodes, deduplicated (order: high, low, random). Multi mode:
// the whole test set. Margins are clean-graph target-label margins.
std::vector<int> select_targets(const Eigen::VectorXd& margins, const std::vector<int>& test_set,
                                TargetMode mode, std::uint64_t seed);

void save_plan_json(const PerturbationPlan& plan, const std::string& path);
PerturbationPlan load_plan_json(const std::string& path);  // final_graph not restored

}  // namespace netfense
