#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "netfense/baselines.hpp"
#include "netfense/defense.hpp"
#include "netfense/gcn.hpp"
#include "netfense/graph.hpp"

namespace netfense {

enum class Strategy { Clean, Random, Nettack, NetFense };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

// f_C and f_P trained with seeds derived from (repeat_seed, task) only, so
// identical data reproduces identical weights.
struct TrainedModels {
    GcnModel target;
    GcnModel priv;
};

TrainedModels train_model_pair(const AttributedGraph& graph, const LabelSet& labels,
                               const DataSplit& split, const TrainOptions& base,
                               std::uint64_t repeat_seed);

struct ExperimentConfig {
    Strategy strategy = Strategy::NetFense;
    DefenseConfig defense;
    TrainOptions train;
    SplitRatios ratios;
    int n_repeats = 5;
    std::uint64_t base_seed = 1;
    TargetMode mode = TargetMode::Single;
    double checkpoint_ratio = 0.01;  // multi-target evaluation cadence
    bool retrain_after_perturbation = true;  // poisoning setting; false = inference only
    int max_targets = 0;  // 0 = full protocol; otherwise truncate the target list
};

// One perturbed target: margins and correctness before/after, plus the
// overall test accuracy of the retrained models on its perturbed graph.
struct TargetRecord {
    int repeat = 0;
    int node = 0;
    int degree = 0;
    long flips_used = 0;
    double tlc_margin_clean = 0, plc_margin_clean = 0;
    double tlc_margin_perturbed = 0, plc_margin_perturbed = 0;
    bool tlc_correct_clean = false, plc_correct_clean = false;
    bool tlc_correct_perturbed = false, plc_correct_perturbed = false;
    double tlc_overall_clean = 0, plc_overall_clean = 0;
    double tlc_overall_perturbed = 0, plc_overall_perturbed = 0;
};

struct TrajectoryPoint {
    int repeat = 0;
    double ratio = 0.0;  // share of targets perturbed so far
    double set_tlc = 0, set_plc = 0;          // accuracy over perturbed targets
    double overall_tlc = 0, overall_plc = 0;  // accuracy over all test nodes
};

struct EvalReport {
    std::string dataset;
    std::string strategy;
    std::uint64_t base_seed = 0;
    int n_repeats = 0;
    std::string mode;
    std::string config_summary;
    std::vector<TargetRecord> records;
    std::vector<TrajectoryPoint> trajectory;
};

struct TaskAggregate {
    double margin_clean = 0, margin_perturbed = 0;
    double acc_set_clean = 0, acc_set_perturbed = 0;
    double acc_overall_clean = 0, acc_overall_perturbed = 0;
    double margin_diff() const { return margin_perturbed - margin_clean; }
};

struct Aggregates {
    TaskAggregate tlc, plc;
};

Aggregates aggregate(const EvalReport& report);

// Protocol of the single-target evaluation: per repeat, split and train both
// models on the clean graph, pick the 40-node confidence-stratified target
// set, perturb each target independently from the clean graph, retrain on
// each perturbed graph and record margins/accuracies.
EvalReport run_single_target_experiment(const Dataset& data, const ExperimentConfig& config);

// Multi-target protocol: every test node is a target (seeded order), each
// perturbation feeds the next; models are retrained and accuracies recorded
// at every checkpoint_ratio share of targets.
EvalReport run_multi_target_experiment(const Dataset& data, const ExperimentConfig& config);

struct SweepPoint {
    double a_d, a_m;
    int budget;
    double tau_quantile;
};

struct SweepRow {
    SweepPoint point;
    Aggregates aggregates;
};

std::vector<SweepRow> sweep_hyperparams(const Dataset& data, const ExperimentConfig& config,
                                        const std::vector<SweepPoint>& grid);

struct DegreeBucketRow {
    int degree_lo = 0, degree_hi = 0;
    long count = 0;
    double tlc_margin_delta = 0;  // clean - perturbed
    double plc_margin_delta = 0;
};

// Mean margin reduction per degree bucket; empty buckets are omitted (with a
// note on stderr).
std::vector<DegreeBucketRow> degree_bucket_analysis(const EvalReport& report,
                                                    const std::vector<std::pair<int, int>>& buckets);

std::vector<std::pair<int, int>> degree_quartile_buckets(const EvalReport& report);

// Cohen's kappa between two categorical labelings; pairs with an unknown
// side are skipped. Degenerate chance agreement returns 0 with a warning.
double kappa_coefficient(const Eigen::VectorXi& labels_a, const Eigen::VectorXi& labels_b);

// Private-label column selection for datasets that carry no explicit private
// label: the most balanced binary feature column whose held-out private-task
// accuracy reaches min_accuracy. The column is removed from the features.
struct PrivateColumnChoice {
    int column = -1;
    double balance = 0.0;  // |mean - 0.5|
    double accuracy = 0.0;
    bool met_threshold = false;
};

PrivateColumnChoice select_private_feature(Dataset& data, const SplitRatios& ratios,
                                           const TrainOptions& train, std::uint64_t seed,
                                           double min_accuracy = 0.6, int max_candidates = 10,
                                           bool remove_column = true);

// Structure-versus-feature perturbation study: the same bi-task greedy run
// in edge space (no candidate filtering) and in feature space, both scored
// after retraining.
struct StructureFeatureResult {
    double structure_plc_change = 0, feature_plc_change = 0;
    double structure_tlc_change = 0, feature_tlc_change = 0;
};

StructureFeatureResult run_structure_feature_study(const Dataset& data,
                                                   const ExperimentConfig& config);

void emit_report_json(const EvalReport& report, const std::string& path);
EvalReport load_report_json(const std::string& path);
// Long-format margins (one row per record, task and condition).
void emit_report_csv(const EvalReport& report, const std::string& path);
void emit_trajectory_csv(const EvalReport& report, const std::string& path);
void emit_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace netfense
