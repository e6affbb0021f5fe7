#include "netfense/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace netfense {

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::Clean: return "clean";
        case Strategy::Random: return "random";
        case Strategy::Nettack: return "nt";
        case Strategy::NetFense: return "netfense";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& name) {
    if (name == "clean") return Strategy::Clean;
    if (name == "random") return Strategy::Random;
    if (name == "nt") return Strategy::Nettack;
    if (name == "netfense") return Strategy::NetFense;
    throw ConfigError("unknown strategy '" + name + "'");
}

namespace {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = base + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xBF58476D1CE4E5B9ULL * (b + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

using ModelPair = TrainedModels;

ModelPair train_pair(const AttributedGraph& graph, const LabelSet& labels, const DataSplit& split,
                     const TrainOptions& base, std::uint64_t repeat_seed) {
    return train_model_pair(graph, labels, split, base, repeat_seed);
}

struct Predictions {
    Eigen::MatrixXd z_target;
    Eigen::MatrixXd z_private;
};

Predictions predict_pair(const ModelPair& models, const AttributedGraph& graph) {
    const NormalizedAdjacency norm = build_normalized(graph);
    return {predict_full(models.target, norm, graph.features()),
            predict_full(models.priv, norm, graph.features())};
}

PerturbationPlan run_strategy(Strategy strategy, const AttributedGraph& graph,
                              const ModelPair& models, const PprModel* ppr,
                              const LabelSet& labels, int target, const DefenseConfig& config,
                              std::uint64_t seed) {
    switch (strategy) {
        case Strategy::Clean: {
            PerturbationPlan plan;
            plan.strategy = "clean";
            plan.targets = {target};
            plan.final_graph = graph;
            return plan;
        }
        case Strategy::Random:
            return random_defense(graph, target, config, seed);
        case Strategy::Nettack:
            return attack_defense_nt(graph, models.priv, target, labels, config, seed);
        case Strategy::NetFense:
            if (!ppr) throw ConfigError("netfense strategy needs a PPR model");
            return single_target_defense(graph, models.target, models.priv, *ppr, target, config);
    }
    throw ConfigError("unhandled strategy");
}

std::string summarize_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "strategy=" << to_string(c.strategy) << " mode="
       << (c.mode == TargetMode::Single ? "single" : "multi") << " b=" << c.defense.budget_b
       << " tau_q=" << c.defense.tau_quantile << " a_d=" << c.defense.a_d
       << " a_m=" << c.defense.a_m << " alpha=" << c.defense.alpha
       << " hidden=" << c.train.hidden_dim << " epochs=" << c.train.epochs
       << " repeats=" << c.n_repeats << " seed=" << c.base_seed;
    return os.str();
}

std::vector<int> known_label_targets(const std::vector<int>& targets, const LabelSet& labels) {
    std::vector<int> out;
    for (int v : targets)
        if (labels.target_known(v) && labels.private_known(v)) out.push_back(v);
    return out;
}

}  // namespace

TrainedModels train_model_pair(const AttributedGraph& graph, const LabelSet& labels,
                               const DataSplit& split, const TrainOptions& base,
                               std::uint64_t repeat_seed) {
    TrainOptions t = base;
    t.seed = mix_seed(repeat_seed, 1, 0);
    TrainOptions p = base;
    p.seed = mix_seed(repeat_seed, 2, 0);
    return {train_gcn(graph, labels, split, Task::Target, t),
            train_gcn(graph, labels, split, Task::Private, p)};
}

Aggregates aggregate(const EvalReport& report) {
    Aggregates agg;
    const auto n = static_cast<double>(report.records.size());
    if (report.records.empty()) return agg;
    for (const auto& r : report.records) {
        agg.tlc.margin_clean += r.tlc_margin_clean;
        agg.tlc.margin_perturbed += r.tlc_margin_perturbed;
        agg.plc.margin_clean += r.plc_margin_clean;
        agg.plc.margin_perturbed += r.plc_margin_perturbed;
        agg.tlc.acc_set_clean += r.tlc_correct_clean ? 1.0 : 0.0;
        agg.tlc.acc_set_perturbed += r.tlc_correct_perturbed ? 1.0 : 0.0;
        agg.plc.acc_set_clean += r.plc_correct_clean ? 1.0 : 0.0;
        agg.plc.acc_set_perturbed += r.plc_correct_perturbed ? 1.0 : 0.0;
        agg.tlc.acc_overall_clean += r.tlc_overall_clean;
        agg.tlc.acc_overall_perturbed += r.tlc_overall_perturbed;
        agg.plc.acc_overall_clean += r.plc_overall_clean;
        agg.plc.acc_overall_perturbed += r.plc_overall_perturbed;
    }
    for (TaskAggregate* t : {&agg.tlc, &agg.plc}) {
        t->margin_clean /= n;
        t->margin_perturbed /= n;
        t->acc_set_clean /= n;
        t->acc_set_perturbed /= n;
        t->acc_overall_clean /= n;
        t->acc_overall_perturbed /= n;
    }
    return agg;
}

EvalReport run_single_target_experiment(const Dataset& data, const ExperimentConfig& config) {
    EvalReport report;
    report.dataset = data.name;
    report.strategy = to_string(config.strategy);
    report.base_seed = config.base_seed;
    report.n_repeats = config.n_repeats;
    report.mode = "single";
    report.config_summary = summarize_config(config);

    const AttributedGraph& graph = data.graph;
    const LabelSet& labels = data.labels;

    for (int rep = 0; rep < config.n_repeats; ++rep) {
        const std::uint64_t rep_seed = config.base_seed + static_cast<std::uint64_t>(rep);
        const DataSplit split = make_split(graph, config.ratios, rep_seed);
        const ModelPair models = train_pair(graph, labels, split, config.train, rep_seed);
        const Predictions clean = predict_pair(models, graph);

        const Eigen::VectorXd m_target = margins(clean.z_target, labels.target);
        std::vector<int> targets = known_label_targets(
            select_targets(m_target, split.test, TargetMode::Single, rep_seed), labels);
        if (config.max_targets > 0 && static_cast<int>(targets.size()) > config.max_targets)
            targets.resize(static_cast<size_t>(config.max_targets));

        const double tlc_overall_clean = accuracy(clean.z_target, labels.target, split.test);
        const double plc_overall_clean = accuracy(clean.z_private, labels.priv, split.test);

        std::optional<PprModel> ppr;
        DefenseConfig defense = config.defense;
        if (config.strategy == Strategy::NetFense) {
            ppr.emplace(build_ppr(graph, defense.alpha));
            if (!defense.tau_value && !defense.refresh_tau_each_iter)
                defense.tau_value = quantile_threshold(*ppr, graph, defense.tau_quantile,
                                                       defense.delta_formula);
        }

        for (int v : targets) {
            const PerturbationPlan plan =
                run_strategy(config.strategy, graph, models, ppr ? &*ppr : nullptr, labels, v,
                             defense, mix_seed(rep_seed, 3, static_cast<std::uint64_t>(v)));
            const AttributedGraph& perturbed = plan.final_graph;

            const ModelPair models_p =
                config.retrain_after_perturbation
                    ? train_pair(perturbed, labels, split, config.train, rep_seed)
                    : models;
            const Predictions pert = predict_pair(models_p, perturbed);

            TargetRecord rec;
            rec.repeat = rep;
            rec.node = v;
            rec.degree = graph.degree(v);
            rec.flips_used = plan.n_perturbations();
            rec.tlc_margin_clean = classification_margin(clean.z_target, v, labels.target[v]);
            rec.plc_margin_clean = classification_margin(clean.z_private, v, labels.priv[v]);
            rec.tlc_margin_perturbed = classification_margin(pert.z_target, v, labels.target[v]);
            rec.plc_margin_perturbed = classification_margin(pert.z_private, v, labels.priv[v]);
            rec.tlc_correct_clean = rec.tlc_margin_clean > 0;
            rec.plc_correct_clean = rec.plc_margin_clean > 0;
            rec.tlc_correct_perturbed = rec.tlc_margin_perturbed > 0;
            rec.plc_correct_perturbed = rec.plc_margin_perturbed > 0;
            rec.tlc_overall_clean = tlc_overall_clean;
            rec.plc_overall_clean = plc_overall_clean;
            rec.tlc_overall_perturbed = accuracy(pert.z_target, labels.target, split.test);
            rec.plc_overall_perturbed = accuracy(pert.z_private, labels.priv, split.test);
            report.records.push_back(rec);
        }
    }
    return report;
}

EvalReport run_multi_target_experiment(const Dataset& data, const ExperimentConfig& config) {
    EvalReport report;
    report.dataset = data.name;
    report.strategy = to_string(config.strategy);
    report.base_seed = config.base_seed;
    report.n_repeats = config.n_repeats;
    report.mode = "multi";
    report.config_summary = summarize_config(config);

    const AttributedGraph& graph = data.graph;
    const LabelSet& labels = data.labels;

    for (int rep = 0; rep < config.n_repeats; ++rep) {
        const std::uint64_t rep_seed = config.base_seed + static_cast<std::uint64_t>(rep);
        const DataSplit split = make_split(graph, config.ratios, rep_seed);
        const ModelPair models = train_pair(graph, labels, split, config.train, rep_seed);
        const Predictions clean = predict_pair(models, graph);

        std::vector<int> targets = known_label_targets(split.test, labels);
        std::mt19937_64 rng(mix_seed(rep_seed, 4, 0));
        std::shuffle(targets.begin(), targets.end(), rng);
        if (config.max_targets > 0 && static_cast<int>(targets.size()) > config.max_targets)
            targets.resize(static_cast<size_t>(config.max_targets));
        if (targets.empty()) continue;

        DefenseConfig defense = config.defense;
        std::optional<PprModel> ppr;
        if (config.strategy == Strategy::NetFense) {
            ppr.emplace(build_ppr(graph, defense.alpha));
            if (!defense.tau_value && !defense.refresh_tau_each_iter)
                defense.tau_value = quantile_threshold(*ppr, graph, defense.tau_quantile,
                                                       defense.delta_formula);
        }

        const long step =
            std::max<long>(1, static_cast<long>(std::floor(config.checkpoint_ratio *
                                                           static_cast<double>(targets.size()))));

        TrajectoryPoint start;
        start.repeat = rep;
        start.ratio = 0.0;
        start.set_tlc = accuracy(clean.z_target, labels.target, targets);
        start.set_plc = accuracy(clean.z_private, labels.priv, targets);
        start.overall_tlc = accuracy(clean.z_target, labels.target, split.test);
        start.overall_plc = accuracy(clean.z_private, labels.priv, split.test);
        report.trajectory.push_back(start);

        AttributedGraph current = graph;
        std::vector<int> perturbed_so_far;
        std::map<int, long> flips_by_target;
        for (size_t i = 0; i < targets.size(); ++i) {
            const int v = targets[i];
            if (config.strategy == Strategy::NetFense && i > 0)
                ppr.emplace(build_ppr(current, defense.alpha));
            const PerturbationPlan plan =
                run_strategy(config.strategy, current, models, ppr ? &*ppr : nullptr, labels, v,
                             defense, mix_seed(rep_seed, 5, static_cast<std::uint64_t>(v)));
            current = plan.final_graph;
            perturbed_so_far.push_back(v);
            flips_by_target[v] = plan.n_perturbations();

            const bool checkpoint =
                (static_cast<long>(i + 1) % step == 0) || (i + 1 == targets.size());
            if (!checkpoint) continue;

            const ModelPair models_p =
                config.retrain_after_perturbation
                    ? train_pair(current, labels, split, config.train, rep_seed)
                    : models;
            const Predictions pert = predict_pair(models_p, current);

            TrajectoryPoint point;
            point.repeat = rep;
            point.ratio = static_cast<double>(i + 1) / static_cast<double>(targets.size());
            point.set_tlc = accuracy(pert.z_target, labels.target, perturbed_so_far);
            point.set_plc = accuracy(pert.z_private, labels.priv, perturbed_so_far);
            point.overall_tlc = accuracy(pert.z_target, labels.target, split.test);
            point.overall_plc = accuracy(pert.z_private, labels.priv, split.test);
            report.trajectory.push_back(point);

            // Per-target records at the final checkpoint give the Set view.
            if (i + 1 == targets.size()) {
                for (int t : perturbed_so_far) {
                    TargetRecord rec;
                    rec.repeat = rep;
                    rec.node = t;
                    rec.degree = graph.degree(t);
                    rec.flips_used = flips_by_target[t];
                    rec.tlc_margin_clean = classification_margin(clean.z_target, t, labels.target[t]);
                    rec.plc_margin_clean = classification_margin(clean.z_private, t, labels.priv[t]);
                    rec.tlc_margin_perturbed =
                        classification_margin(pert.z_target, t, labels.target[t]);
                    rec.plc_margin_perturbed =
                        classification_margin(pert.z_private, t, labels.priv[t]);
                    rec.tlc_correct_clean = rec.tlc_margin_clean > 0;
                    rec.plc_correct_clean = rec.plc_margin_clean > 0;
                    rec.tlc_correct_perturbed = rec.tlc_margin_perturbed > 0;
                    rec.plc_correct_perturbed = rec.plc_margin_perturbed > 0;
                    rec.tlc_overall_clean = start.overall_tlc;
                    rec.plc_overall_clean = start.overall_plc;
                    rec.tlc_overall_perturbed = point.overall_tlc;
                    rec.plc_overall_perturbed = point.overall_plc;
                    report.records.push_back(rec);
                }
            }
        }
    }
    return report;
}

std::vector<SweepRow> sweep_hyperparams(const Dataset& data, const ExperimentConfig& config,
                                        const std::vector<SweepPoint>& grid) {
    std::vector<SweepRow> rows;
    for (const SweepPoint& point : grid) {
        ExperimentConfig c = config;
        c.defense.a_d = point.a_d;
        c.defense.a_m = point.a_m;
        c.defense.budget_b = point.budget;
        c.defense.tau_quantile = point.tau_quantile;
        const EvalReport report = run_single_target_experiment(data, c);
        rows.push_back({point, aggregate(report)});
    }
    return rows;
}

std::vector<DegreeBucketRow> degree_bucket_analysis(
    const EvalReport& report, const std::vector<std::pair<int, int>>& buckets) {
    std::vector<DegreeBucketRow> rows;
    for (const auto& [lo, hi] : buckets) {
        DegreeBucketRow row;
        row.degree_lo = lo;
        row.degree_hi = hi;
        for (const auto& r : report.records) {
            if (r.degree < lo || r.degree > hi) continue;
            ++row.count;
            row.tlc_margin_delta += r.tlc_margin_clean - r.tlc_margin_perturbed;
            row.plc_margin_delta += r.plc_margin_clean - r.plc_margin_perturbed;
        }
        if (row.count == 0) {
            std::fprintf(stderr, "degree_bucket_analysis: bucket [%d,%d] empty, omitted\n", lo, hi);
            continue;
        }
        row.tlc_margin_delta /= static_cast<double>(row.count);
        row.plc_margin_delta /= static_cast<double>(row.count);
        rows.push_back(row);
    }
    return rows;
}

std::vector<std::pair<int, int>> degree_quartile_buckets(const EvalReport& report) {
    std::vector<int> degrees;
    for (const auto& r : report.records) degrees.push_back(r.degree);
    if (degrees.empty()) return {};
    std::sort(degrees.begin(), degrees.end());
    auto cut = [&degrees](double q) {
        const auto idx = static_cast<size_t>(
            std::min<double>(std::floor(q * static_cast<double>(degrees.size())),
                             static_cast<double>(degrees.size() - 1)));
        return degrees[idx];
    };
    const int q1 = cut(0.25), q2 = cut(0.5), q3 = cut(0.75);
    std::vector<std::pair<int, int>> buckets;
    buckets.emplace_back(degrees.front(), q1);
    if (q2 > q1) buckets.emplace_back(q1 + 1, q2);
    if (q3 > q2) buckets.emplace_back(q2 + 1, q3);
    if (degrees.back() > q3) buckets.emplace_back(q3 + 1, degrees.back());
    return buckets;
}

double kappa_coefficient(const Eigen::VectorXi& labels_a, const Eigen::VectorXi& labels_b) {
    if (labels_a.size() != labels_b.size())
        throw ShapeError("kappa needs labelings over the same node set");
    long n = 0, agree = 0;
    std::map<int, long> count_a, count_b;
    for (Eigen::Index i = 0; i < labels_a.size(); ++i) {
        if (labels_a[i] < 0 || labels_b[i] < 0) continue;
        ++n;
        if (labels_a[i] == labels_b[i]) ++agree;
        ++count_a[labels_a[i]];
        ++count_b[labels_b[i]];
    }
    if (n == 0) throw DataError("kappa: no jointly labeled nodes");
    const double p_o = static_cast<double>(agree) / static_cast<double>(n);
    double p_e = 0.0;
    for (const auto& [cls, ca] : count_a) {
        const auto it = count_b.find(cls);
        if (it == count_b.end()) continue;
        p_e += (static_cast<double>(ca) / n) * (static_cast<double>(it->second) / n);
    }
    if (1.0 - p_e < 1e-12) {
        std::fprintf(stderr, "kappa_coefficient: degenerate chance agreement, returning 0\n");
        return 0.0;
    }
    return (p_o - p_e) / (1.0 - p_e);
}

PrivateColumnChoice select_private_feature(Dataset& data, const SplitRatios& ratios,
                                           const TrainOptions& train, std::uint64_t seed,
                                           double min_accuracy, int max_candidates,
                                           bool remove_column) {
    const Eigen::MatrixXd& x = data.graph.features();
    const int d = static_cast<int>(x.cols());
    std::vector<std::pair<double, int>> by_balance;  // |mean-0.5| ascending
    for (int c = 0; c < d; ++c) {
        const double mean = x.col(c).mean();
        if (mean == 0.0 || mean == 1.0) continue;  // constant column cannot be a label
        by_balance.emplace_back(std::abs(mean - 0.5), c);
    }
    std::sort(by_balance.begin(), by_balance.end());
    if (by_balance.empty()) throw DataError("no non-constant binary column available");

    auto evaluate = [&](int column) {
        Eigen::MatrixXd reduced(x.rows(), d - 1);
        reduced << x.leftCols(column), x.rightCols(d - 1 - column);
        Dataset variant;
        variant.name = data.name;
        variant.graph = data.graph.with_features(reduced);
        variant.labels = data.labels;
        variant.labels.priv = x.col(column).cast<int>();
        const DataSplit split = make_split(variant.graph, ratios, seed);
        TrainOptions t = train;
        t.seed = mix_seed(seed, 7, static_cast<std::uint64_t>(column));
        const GcnModel model = train_gcn(variant.graph, variant.labels, split, Task::Private, t);
        const NormalizedAdjacency norm = build_normalized(variant.graph);
        const Eigen::MatrixXd z = predict_full(model, norm, variant.graph.features());
        return accuracy(z, variant.labels.priv, split.test);
    };

    PrivateColumnChoice best;
    const int limit = std::min<int>(max_candidates, static_cast<int>(by_balance.size()));
    for (int i = 0; i < limit; ++i) {
        const auto [balance, column] = by_balance[static_cast<size_t>(i)];
        const double acc = evaluate(column);
        if (acc > best.accuracy) {
            best.column = column;
            best.balance = balance;
            best.accuracy = acc;
        }
        if (acc >= min_accuracy) {
            best = {column, balance, acc, true};
            break;
        }
    }
    if (!best.met_threshold)
        std::fprintf(stderr,
                     "select_private_feature: no candidate reached accuracy %.2f; "
                     "using column %d (acc %.3f)\n",
                     min_accuracy, best.column, best.accuracy);

    if (remove_column && best.column >= 0) {
        Eigen::MatrixXd reduced(x.rows(), d - 1);
        reduced << x.leftCols(best.column), x.rightCols(d - 1 - best.column);
        data.labels.priv = x.col(best.column).cast<int>();
        data.graph = data.graph.with_features(reduced);
    }
    return best;
}

StructureFeatureResult run_structure_feature_study(const Dataset& data,
                                                   const ExperimentConfig& config) {
    StructureFeatureResult result;
    long count = 0;

    const AttributedGraph& graph = data.graph;
    const LabelSet& labels = data.labels;

    for (int rep = 0; rep < config.n_repeats; ++rep) {
        const std::uint64_t rep_seed = config.base_seed + static_cast<std::uint64_t>(rep);
        const DataSplit split = make_split(graph, config.ratios, rep_seed);
        const ModelPair models = train_pair(graph, labels, split, config.train, rep_seed);
        const Predictions clean = predict_pair(models, graph);
        const Eigen::VectorXd m_target = margins(clean.z_target, labels.target);

        std::vector<int> targets = known_label_targets(
            select_targets(m_target, split.test, TargetMode::Single, rep_seed), labels);
        if (config.max_targets > 0 && static_cast<int>(targets.size()) > config.max_targets)
            targets.resize(static_cast<size_t>(config.max_targets));

        // No candidate filtering in this study: every pair / feature entry
        // competes on the loss alone.
        DefenseConfig defense = config.defense;
        defense.tau_value = std::numeric_limits<double>::infinity();
        const PprModel ppr = build_ppr(graph, defense.alpha);

        for (int v : targets) {
            const double plc_clean = classification_margin(clean.z_private, v, labels.priv[v]);
            const double tlc_clean = classification_margin(clean.z_target, v, labels.target[v]);

            const PerturbationPlan plan_s =
                single_target_defense(graph, models.target, models.priv, ppr, v, defense);
            const ModelPair models_s =
                train_pair(plan_s.final_graph, labels, split, config.train, rep_seed);
            const Predictions pred_s = predict_pair(models_s, plan_s.final_graph);

            const FeaturePlan plan_f =
                feature_perturbation_defense(graph, models.target, models.priv, v, defense);
            const AttributedGraph graph_f = graph.with_features(plan_f.final_features);
            const ModelPair models_f = train_pair(graph_f, labels, split, config.train, rep_seed);
            const Predictions pred_f = predict_pair(models_f, graph_f);

            result.structure_plc_change +=
                plc_clean - classification_margin(pred_s.z_private, v, labels.priv[v]);
            result.structure_tlc_change +=
                tlc_clean - classification_margin(pred_s.z_target, v, labels.target[v]);
            result.feature_plc_change +=
                plc_clean - classification_margin(pred_f.z_private, v, labels.priv[v]);
            result.feature_tlc_change +=
                tlc_clean - classification_margin(pred_f.z_target, v, labels.target[v]);
            ++count;
        }
    }
    if (count > 0) {
        result.structure_plc_change /= static_cast<double>(count);
        result.structure_tlc_change /= static_cast<double>(count);
        result.feature_plc_change /= static_cast<double>(count);
        result.feature_tlc_change /= static_cast<double>(count);
    }
    return result;
}

// --- report io ---------------------------------------------------------------

namespace {

nlohmann::ordered_json record_to_json(const TargetRecord& r) {
    return {{"repeat", r.repeat},
            {"node", r.node},
            {"degree", r.degree},
            {"flips_used", r.flips_used},
            {"tlc_margin_clean", r.tlc_margin_clean},
            {"plc_margin_clean", r.plc_margin_clean},
            {"tlc_margin_perturbed", r.tlc_margin_perturbed},
            {"plc_margin_perturbed", r.plc_margin_perturbed},
            {"tlc_correct_clean", r.tlc_correct_clean},
            {"plc_correct_clean", r.plc_correct_clean},
            {"tlc_correct_perturbed", r.tlc_correct_perturbed},
            {"plc_correct_perturbed", r.plc_correct_perturbed},
            {"tlc_overall_clean", r.tlc_overall_clean},
            {"plc_overall_clean", r.plc_overall_clean},
            {"tlc_overall_perturbed", r.tlc_overall_perturbed},
            {"plc_overall_perturbed", r.plc_overall_perturbed}};
}

TargetRecord record_from_json(const nlohmann::json& j) {
    TargetRecord r;
    r.repeat = j.at("repeat").get<int>();
    r.node = j.at("node").get<int>();
    r.degree = j.at("degree").get<int>();
    r.flips_used = j.at("flips_used").get<long>();
    r.tlc_margin_clean = j.at("tlc_margin_clean").get<double>();
    r.plc_margin_clean = j.at("plc_margin_clean").get<double>();
    r.tlc_margin_perturbed = j.at("tlc_margin_perturbed").get<double>();
    r.plc_margin_perturbed = j.at("plc_margin_perturbed").get<double>();
    r.tlc_correct_clean = j.at("tlc_correct_clean").get<bool>();
    r.plc_correct_clean = j.at("plc_correct_clean").get<bool>();
    r.tlc_correct_perturbed = j.at("tlc_correct_perturbed").get<bool>();
    r.plc_correct_perturbed = j.at("plc_correct_perturbed").get<bool>();
    r.tlc_overall_clean = j.at("tlc_overall_clean").get<double>();
    r.plc_overall_clean = j.at("plc_overall_clean").get<double>();
    r.tlc_overall_perturbed = j.at("tlc_overall_perturbed").get<double>();
    r.plc_overall_perturbed = j.at("plc_overall_perturbed").get<double>();
    return r;
}

void validate_report(const EvalReport& report) {
    for (const auto& r : report.records) {
        for (double m : {r.tlc_margin_clean, r.plc_margin_clean, r.tlc_margin_perturbed,
                         r.plc_margin_perturbed})
            if (!(m >= -1.0 - 1e-9 && m <= 1.0 + 1e-9))
                throw DataError("report margin outside [-1,1]");
        for (double a : {r.tlc_overall_clean, r.plc_overall_clean, r.tlc_overall_perturbed,
                         r.plc_overall_perturbed})
            if (!(a >= 0.0 && a <= 1.0)) throw DataError("report accuracy outside [0,1]");
    }
}

}  // namespace

void emit_report_json(const EvalReport& report, const std::string& path) {
    validate_report(report);
    nlohmann::ordered_json j;
    j["schema"] = "netfense-report/1";
    j["dataset"] = report.dataset;
    j["strategy"] = report.strategy;
    j["mode"] = report.mode;
    j["base_seed"] = report.base_seed;
    j["n_repeats"] = report.n_repeats;
    j["config"] = report.config_summary;
    const Aggregates agg = aggregate(report);
    j["aggregates"] = {
        {"tlc",
         {{"margin_clean", agg.tlc.margin_clean},
          {"margin_perturbed", agg.tlc.margin_perturbed},
          {"acc_set_clean", agg.tlc.acc_set_clean},
          {"acc_set_perturbed", agg.tlc.acc_set_perturbed},
          {"acc_overall_clean", agg.tlc.acc_overall_clean},
          {"acc_overall_perturbed", agg.tlc.acc_overall_perturbed}}},
        {"plc",
         {{"margin_clean", agg.plc.margin_clean},
          {"margin_perturbed", agg.plc.margin_perturbed},
          {"acc_set_clean", agg.plc.acc_set_clean},
          {"acc_set_perturbed", agg.plc.acc_set_perturbed},
          {"acc_overall_clean", agg.plc.acc_overall_clean},
          {"acc_overall_perturbed", agg.plc.acc_overall_perturbed}}}};
    j["records"] = nlohmann::ordered_json::array();
    for (const auto& r : report.records) j["records"].push_back(record_to_json(r));
    j["trajectory"] = nlohmann::ordered_json::array();
    for (const auto& p : report.trajectory)
        j["trajectory"].push_back({{"repeat", p.repeat},
                                   {"ratio", p.ratio},
                                   {"set_tlc", p.set_tlc},
                                   {"set_plc", p.set_plc},
                                   {"overall_tlc", p.overall_tlc},
                                   {"overall_plc", p.overall_plc}});
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

EvalReport load_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, 0, e.what());
    }
    EvalReport report;
    report.dataset = j.at("dataset").get<std::string>();
    report.strategy = j.at("strategy").get<std::string>();
    report.mode = j.at("mode").get<std::string>();
    report.base_seed = j.at("base_seed").get<std::uint64_t>();
    report.n_repeats = j.at("n_repeats").get<int>();
    report.config_summary = j.at("config").get<std::string>();
    for (const auto& r : j.at("records")) report.records.push_back(record_from_json(r));
    for (const auto& p : j.at("trajectory")) {
        TrajectoryPoint tp;
        tp.repeat = p.at("repeat").get<int>();
        tp.ratio = p.at("ratio").get<double>();
        tp.set_tlc = p.at("set_tlc").get<double>();
        tp.set_plc = p.at("set_plc").get<double>();
        tp.overall_tlc = p.at("overall_tlc").get<double>();
        tp.overall_plc = p.at("overall_plc").get<double>();
        report.trajectory.push_back(tp);
    }
    return report;
}

void emit_report_csv(const EvalReport& report, const std::string& path) {
    validate_report(report);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "repeat,node,degree,task,condition,margin,correct\n";
    out.precision(17);
    for (const auto& r : report.records) {
        out << r.repeat << ',' << r.node << ',' << r.degree << ",tlc,clean,"
            << r.tlc_margin_clean << ',' << r.tlc_correct_clean << '\n';
        out << r.repeat << ',' << r.node << ',' << r.degree << ",tlc,perturbed,"
            << r.tlc_margin_perturbed << ',' << r.tlc_correct_perturbed << '\n';
        out << r.repeat << ',' << r.node << ',' << r.degree << ",plc,clean,"
            << r.plc_margin_clean << ',' << r.plc_correct_clean << '\n';
        out << r.repeat << ',' << r.node << ',' << r.degree << ",plc,perturbed,"
            << r.plc_margin_perturbed << ',' << r.plc_correct_perturbed << '\n';
    }
}

void emit_trajectory_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "repeat,ratio,set_tlc,set_plc,overall_tlc,overall_plc\n";
    out.precision(17);
    for (const auto& p : report.trajectory)
        out << p.repeat << ',' << p.ratio << ',' << p.set_tlc << ',' << p.set_plc << ','
            << p.overall_tlc << ',' << p.overall_plc << '\n';
}

void emit_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "a_d,a_m,b,tau_quantile,tlc_margin,plc_margin,tlc_acc_set,plc_acc_set\n";
    out.precision(17);
    for (const auto& row : rows)
        out << row.point.a_d << ',' << row.point.a_m << ',' << row.point.budget << ','
            << row.point.tau_quantile << ',' << row.aggregates.tlc.margin_perturbed << ','
            << row.aggregates.plc.margin_perturbed << ','
            << row.aggregates.tlc.acc_set_perturbed << ','
            << row.aggregates.plc.acc_set_perturbed << '\n';
}

}  // namespace netfense
