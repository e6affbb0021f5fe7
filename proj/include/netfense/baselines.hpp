#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "netfense/defense.hpp"
#include "netfense/gcn.hpp"
#include "netfense/graph.hpp"
#include "netfense/ppr.hpp"

namespace netfense {

// Likelihood-ratio test that two degree sequences come from one power law
// (Clauset-style continuous MLE over degrees >= d_min).
struct PowerlawTest {
    double statistic = 0.0;  // -2 (ll_combined - ll_separate)
    bool pass = false;
    double alpha_before = 0.0;
    double alpha_after = 0.0;
    double alpha_combined = 0.0;
    double ll_separate = 0.0;
    double ll_combined = 0.0;
    int d_min = 2;
};

// The paper carries the threshold 0.004; the conventional chi-square(1)
// critical value 3.84 can be passed instead.
constexpr double kPowerlawThreshold = 0.004;
constexpr double kChiSquare95 = 3.841458820694124;

PowerlawTest powerlaw_unnoticeable(const AttributedGraph& before, const AttributedGraph& after,
                                   int d_min = 2, double threshold = kPowerlawThreshold);

// RD baseline: per step, a uniformly random eligible pair (v,u) whose flip
// keeps the degree distribution unnoticeable versus the clean graph.
PerturbationPlan random_defense(const AttributedGraph& graph, int target,
                                const DefenseConfig& config, std::uint64_t seed);

// NT baseline: greedy structure-only perturbation minimizing the surrogate
// private-label margin of the target, among degree-test-passing pairs; no
// utility term. Stops early once no candidate lowers the current margin.
PerturbationPlan attack_defense_nt(const AttributedGraph& graph, const GcnModel& model_private,
                                   int target, const LabelSet& labels, const DefenseConfig& config,
                                   std::uint64_t seed);

enum class CandidateStrategy { Random, DegreeTest, PprOriginal, PprRevised };

const char* to_string(CandidateStrategy s);

struct CaTrajectory {
    CandidateStrategy strategy;
    std::vector<EdgeFlip> flips;
    std::vector<double> ca;  // clustering coefficient; ca[0] is the clean graph
};

// Ranks the clean graph's edges by each strategy's unnoticeability score and
// removes the best-ranked n_flips sequentially (skipping flips invalidated by
// earlier removals), recording the average clustering coefficient after each.
std::vector<CaTrajectory> candidate_strategy_compare(const AttributedGraph& graph,
                                                     const std::vector<CandidateStrategy>& strategies,
                                                     int n_flips, double alpha, std::uint64_t seed);

void save_trajectories_csv(const std::vector<CaTrajectory>& trajectories, const std::string& path);

// Feature-space twin of the structural defense (comparison study only):
// greedily flips feature bits of nodes within two hops of the target,
// scoring with the same bi-task loss via the closed-form surrogate delta.
struct FeatureFlipStep {
    int node = 0;
    int feature = 0;
    double loss = 0.0;
};

struct FeaturePlan {
    std::vector<FeatureFlipStep> steps;
    int target = 0;
    Eigen::MatrixXd final_features;
};

FeaturePlan feature_perturbation_defense(const AttributedGraph& graph,
                                         const GcnModel& model_target,
                                         const GcnModel& model_private, int target,
                                         const DefenseConfig& config);

}  // namespace netfense
