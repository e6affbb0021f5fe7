// Command-line front end: train / defend / evaluate / compare / sweep over a
// single key=value config with flag overrides. Exit codes: 0 success,
// 2 config error, 3 data error, 4 numeric error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "netfense/baselines.hpp"
#include "netfense/defense.hpp"
#include "netfense/evalkit.hpp"
#include "netfense/gcn.hpp"
#include "netfense/graph.hpp"
#include "netfense/ppr.hpp"

namespace fs = std::filesystem;
using namespace netfense;

namespace {

using ConfigMap = std::map<std::string, std::string>;

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

ConfigMap parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    ConfigMap out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line.substr(0, line.find('#')));
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        out[trim(stripped.substr(0, eq))] = trim(stripped.substr(eq + 1));
    }
    return out;
}

template <typename T>
T parse_value(const std::string& key, const std::string& raw);

template <>
std::string parse_value<std::string>(const std::string&, const std::string& raw) {
    return raw;
}

template <>
double parse_value<double>(const std::string& key, const std::string& raw) {
    try {
        size_t pos = 0;
        double v = std::stod(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "': expected number, got '" + raw + "'");
    }
}

template <>
int parse_value<int>(const std::string& key, const std::string& raw) {
    try {
        size_t pos = 0;
        int v = std::stoi(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "': expected integer, got '" + raw + "'");
    }
}

template <>
std::uint64_t parse_value<std::uint64_t>(const std::string& key, const std::string& raw) {
    try {
        size_t pos = 0;
        auto v = std::stoull(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "': expected integer, got '" + raw + "'");
    }
}

template <>
bool parse_value<bool>(const std::string& key, const std::string& raw) {
    if (raw == "true" || raw == "1") return true;
    if (raw == "false" || raw == "0") return false;
    throw ConfigError("config field '" + key + "': expected true/false, got '" + raw + "'");
}

template <typename T>
T get_or(const ConfigMap& cfg, const std::string& key, T fallback) {
    const auto it = cfg.find(key);
    return it == cfg.end() ? fallback : parse_value<T>(key, it->second);
}

std::string require(const ConfigMap& cfg, const std::string& key) {
    const auto it = cfg.find(key);
    if (it == cfg.end()) throw ConfigError("missing required config field '" + key + "'");
    return it->second;
}

std::vector<double> parse_list(const std::string& key, const std::string& raw) {
    std::vector<double> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty()) out.push_back(parse_value<double>(key, trim(item)));
    return out;
}

struct Run {
    ConfigMap cfg;
    Dataset data;
    ExperimentConfig experiment;
    fs::path out_dir;
    std::uint64_t seed = 1;
};

Dataset resolve_dataset(const ConfigMap& cfg, std::uint64_t seed) {
    if (cfg.count("dataset.edges")) {
        Dataset data = load_graph(require(cfg, "dataset.edges"), require(cfg, "dataset.features"),
                                  require(cfg, "dataset.labels"));
        data.name = get_or<std::string>(cfg, "dataset.name", data.name);
        return data;
    }
    if (cfg.count("sbm.blocks")) {
        std::vector<int> blocks;
        for (double b : parse_list("sbm.blocks", require(cfg, "sbm.blocks")))
            blocks.push_back(static_cast<int>(b));
        FeatureModel fm;
        fm.target_cols = get_or<int>(cfg, "sbm.target_cols", fm.target_cols);
        fm.private_cols = get_or<int>(cfg, "sbm.private_cols", fm.private_cols);
        fm.noise_cols = get_or<int>(cfg, "sbm.noise_cols", fm.noise_cols);
        fm.p_active = get_or<double>(cfg, "sbm.p_active", fm.p_active);
        fm.p_inactive = get_or<double>(cfg, "sbm.p_inactive", fm.p_inactive);
        fm.noise_cols = get_or<int>(cfg, "sbm.noise_cols", fm.noise_cols);
        Dataset data = generate_sbm(blocks, get_or<double>(cfg, "sbm.intra_p", 0.1),
                                    get_or<double>(cfg, "sbm.inter_p", 0.01), fm,
                                    get_or<std::uint64_t>(cfg, "sbm.seed", seed));
        data.name = get_or<std::string>(cfg, "dataset.name", "sbm");
        return data;
    }
    throw ConfigError("missing required config field 'dataset.edges' (or 'sbm.blocks')");
}

Run build_run(const std::string& config_path, const ConfigMap& overrides) {
    Run run;
    if (!config_path.empty()) run.cfg = parse_config_file(config_path);
    for (const auto& [k, v] : overrides) run.cfg[k] = v;

    run.seed = get_or<std::uint64_t>(run.cfg, "seed", 1);
    run.out_dir = get_or<std::string>(run.cfg, "out", "out");

    ExperimentConfig& e = run.experiment;
    e.base_seed = run.seed;
    e.strategy = strategy_from_string(get_or<std::string>(run.cfg, "strategy", "netfense"));
    const std::string mode = get_or<std::string>(run.cfg, "mode", "single");
    if (mode != "single" && mode != "multi")
        throw ConfigError("config field 'mode': expected single|multi");
    e.mode = mode == "single" ? TargetMode::Single : TargetMode::Multi;

    // Defaults follow the evaluation protocol: budget 20 (single) / 10
    // (multi); repeats 5 / 20.
    e.defense.budget_b =
        get_or<int>(run.cfg, "defense.budget", e.mode == TargetMode::Single ? 20 : 10);
    e.defense.tau_quantile = get_or<double>(run.cfg, "defense.tau_quantile", 0.9);
    e.defense.a_d = get_or<double>(run.cfg, "defense.a_d", 2.0);
    e.defense.a_m = get_or<double>(run.cfg, "defense.a_m", 1.0);
    e.defense.alpha = get_or<double>(run.cfg, "defense.alpha", 0.1);
    e.defense.raw_denominator = get_or<bool>(run.cfg, "defense.raw_denominator", false);
    e.defense.refresh_tau_each_iter = get_or<bool>(run.cfg, "defense.refresh_tau_each_iter", false);
    e.defense.ppr_refresh_every = get_or<int>(run.cfg, "defense.ppr_refresh_every", 1);
    e.defense.degree_test_threshold =
        get_or<double>(run.cfg, "defense.degree_test_threshold", 0.004);
    e.defense.degree_test_d_min = get_or<int>(run.cfg, "defense.degree_test_d_min", 2);
    if (get_or<std::string>(run.cfg, "defense.delta_formula", "exact") == "revised")
        e.defense.delta_formula = DeltaFormula::Revised;
    e.defense.validate();

    e.train.hidden_dim = get_or<int>(run.cfg, "train.hidden", 16);
    e.train.epochs = get_or<int>(run.cfg, "train.epochs", 200);
    e.train.learning_rate = get_or<double>(run.cfg, "train.lr", 0.01);
    e.train.weight_decay = get_or<double>(run.cfg, "train.weight_decay", 5e-4);

    e.ratios.train = get_or<double>(run.cfg, "split.train", 0.1);
    e.ratios.validation = get_or<double>(run.cfg, "split.validation", 0.1);
    e.ratios.test = get_or<double>(run.cfg, "split.test", 0.8);

    e.n_repeats = get_or<int>(run.cfg, "eval.repeats", e.mode == TargetMode::Single ? 5 : 20);
    e.max_targets = get_or<int>(run.cfg, "eval.max_targets", 0);
    e.checkpoint_ratio = get_or<double>(run.cfg, "eval.checkpoint_ratio", 0.01);
    e.retrain_after_perturbation = get_or<bool>(run.cfg, "eval.retrain", true);

    run.data = resolve_dataset(run.cfg, run.seed);

    const std::string priv_source = get_or<std::string>(run.cfg, "private.from_feature", "none");
    if (priv_source == "auto") {
        const auto choice = select_private_feature(run.data, e.ratios, e.train, run.seed);
        std::cout << "private label: feature column " << choice.column << " (balance "
                  << choice.balance << ", accuracy " << choice.accuracy << ")\n";
    } else if (priv_source != "none") {
        const int column = parse_value<int>("private.from_feature", priv_source);
        const Eigen::MatrixXd& x = run.data.graph.features();
        if (column < 0 || column >= x.cols())
            throw ConfigError("config field 'private.from_feature': column out of range");
        Eigen::MatrixXd reduced(x.rows(), x.cols() - 1);
        reduced << x.leftCols(column), x.rightCols(x.cols() - 1 - column);
        run.data.labels.priv = x.col(column).cast<int>();
        run.data.graph = run.data.graph.with_features(reduced);
    }

    fs::create_directories(run.out_dir);
    return run;
}

void write_metadata(const Run& run, const std::string& command) {
    std::ofstream out(run.out_dir / "run_config.txt");
    out << "command=" << command << '\n';
    for (const auto& [k, v] : run.cfg) out << k << '=' << v << '\n';
}

int cmd_train(const Run& run) {
    const ExperimentConfig& e = run.experiment;
    const DataSplit split = make_split(run.data.graph, e.ratios, run.seed);
    const TrainedModels models =
        train_model_pair(run.data.graph, run.data.labels, split, e.train, run.seed);

    save_model(models.target, (run.out_dir / "model_target.json").string(),
               (run.out_dir / "model_target.weights").string());
    save_model(models.priv, (run.out_dir / "model_private.json").string(),
               (run.out_dir / "model_private.weights").string());

    const NormalizedAdjacency norm = build_normalized(run.data.graph);
    const Eigen::MatrixXd z_c = predict_full(models.target, norm, run.data.graph.features());
    const Eigen::MatrixXd z_p = predict_full(models.priv, norm, run.data.graph.features());
    const Eigen::VectorXd m_c = margins(z_c, run.data.labels.target);
    const Eigen::VectorXd m_p = margins(z_p, run.data.labels.priv);

    std::ofstream mf(run.out_dir / "clean_margins.csv");
    mf << "node,degree,tlc_margin,plc_margin\n";
    mf.precision(17);
    for (int v = 0; v < run.data.graph.n_nodes(); ++v)
        mf << v << ',' << run.data.graph.degree(v) << ',' << m_c[v] << ',' << m_p[v] << '\n';

    std::cout << "trained f_C (" << models.target.n_classes() << " classes) and f_P; "
              << "test TLC acc " << accuracy(z_c, run.data.labels.target, split.test)
              << ", test PLC acc " << accuracy(z_p, run.data.labels.priv, split.test) << '\n';
    return 0;
}

int cmd_defend(const Run& run) {
    const ExperimentConfig& e = run.experiment;
    const DataSplit split = make_split(run.data.graph, e.ratios, run.seed);

    const std::string models_dir = get_or<std::string>(run.cfg, "models", run.out_dir.string());
    TrainedModels models;
    if (fs::exists(fs::path(models_dir) / "model_target.json")) {
        models.target = load_model((fs::path(models_dir) / "model_target.json").string());
        models.priv = load_model((fs::path(models_dir) / "model_private.json").string());
    } else {
        models = train_model_pair(run.data.graph, run.data.labels, split, e.train, run.seed);
    }

    PerturbationPlan plan;
    if (e.mode == TargetMode::Single) {
        const int target = get_or<int>(run.cfg, "target", -1);
        if (target < 0) throw ConfigError("missing required config field 'target'");
        switch (e.strategy) {
            case Strategy::Clean:
                plan.strategy = "clean";
                plan.targets = {target};
                plan.final_graph = run.data.graph;
                break;
            case Strategy::Random:
                plan = random_defense(run.data.graph, target, e.defense, run.seed);
                break;
            case Strategy::Nettack:
                plan = attack_defense_nt(run.data.graph, models.priv, target, run.data.labels,
                                         e.defense, run.seed);
                break;
            case Strategy::NetFense: {
                const PprModel ppr = build_ppr(run.data.graph, e.defense.alpha);
                plan = single_target_defense(run.data.graph, models.target, models.priv, ppr,
                                             target, e.defense);
                break;
            }
        }
    } else {
        if (e.strategy != Strategy::NetFense)
            throw ConfigError("multi-target defend supports strategy=netfense only");
        const PprModel ppr = build_ppr(run.data.graph, e.defense.alpha);
        plan = multi_target_defense(run.data.graph, models.target, models.priv, ppr, split.test,
                                    e.defense, run.seed);
    }

    save_plan_json(plan, (run.out_dir / "plan.json").string());
    Dataset perturbed = run.data;
    perturbed.graph = plan.final_graph;
    save_graph(perturbed, (run.out_dir / "perturbed_edges.txt").string(),
               (run.out_dir / "perturbed_features.csv").string(),
               (run.out_dir / "perturbed_labels.csv").string());
    std::cout << "committed " << plan.n_perturbations() << " flips ("
              << plan.strategy << ")\n";
    return 0;
}

int cmd_evaluate(const Run& run) {
    const EvalReport report = run.experiment.mode == TargetMode::Single
                                  ? run_single_target_experiment(run.data, run.experiment)
                                  : run_multi_target_experiment(run.data, run.experiment);
    emit_report_json(report, (run.out_dir / "report.json").string());
    emit_report_csv(report, (run.out_dir / "margins.csv").string());
    if (!report.trajectory.empty())
        emit_trajectory_csv(report, (run.out_dir / "trajectory.csv").string());

    const Aggregates agg = aggregate(report);
    std::cout << "TLC margin " << agg.tlc.margin_clean << " -> " << agg.tlc.margin_perturbed
              << "; PLC margin " << agg.plc.margin_clean << " -> " << agg.plc.margin_perturbed
              << "; TLC set acc " << agg.tlc.acc_set_clean << " -> " << agg.tlc.acc_set_perturbed
              << "; PLC set acc " << agg.plc.acc_set_clean << " -> " << agg.plc.acc_set_perturbed
              << '\n';
    return 0;
}

int cmd_compare(const Run& run) {
    std::vector<CandidateStrategy> strategies;
    const std::string raw =
        get_or<std::string>(run.cfg, "compare.strategies",
                            "random,degree_test,ppr_original,ppr_revised");
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item == "random") strategies.push_back(CandidateStrategy::Random);
        else if (item == "degree_test") strategies.push_back(CandidateStrategy::DegreeTest);
        else if (item == "ppr_original") strategies.push_back(CandidateStrategy::PprOriginal);
        else if (item == "ppr_revised") strategies.push_back(CandidateStrategy::PprRevised);
        else throw ConfigError("config field 'compare.strategies': unknown strategy '" + item + "'");
    }
    const int n_flips = get_or<int>(run.cfg, "compare.n_flips", 50);
    const auto trajectories = candidate_strategy_compare(
        run.data.graph, strategies, n_flips, run.experiment.defense.alpha, run.seed);
    save_trajectories_csv(trajectories, (run.out_dir / "ca_trajectories.csv").string());
    for (const auto& t : trajectories)
        std::cout << to_string(t.strategy) << ": CA " << t.ca.front() << " -> " << t.ca.back()
                  << " over " << t.flips.size() << " flips\n";
    return 0;
}

int cmd_sweep(const Run& run) {
    const auto a_d = parse_list("sweep.a_d", get_or<std::string>(run.cfg, "sweep.a_d", "2"));
    const auto a_m = parse_list("sweep.a_m", get_or<std::string>(run.cfg, "sweep.a_m", "1"));
    const auto budgets = parse_list(
        "sweep.b", get_or<std::string>(run.cfg, "sweep.b",
                                       std::to_string(run.experiment.defense.budget_b)));
    const auto taus = parse_list(
        "sweep.tau_quantile",
        get_or<std::string>(run.cfg, "sweep.tau_quantile",
                            std::to_string(run.experiment.defense.tau_quantile)));
    std::vector<SweepPoint> grid;
    for (double ad : a_d)
        for (double am : a_m)
            for (double b : budgets)
                for (double tq : taus) grid.push_back({ad, am, static_cast<int>(b), tq});

    const auto rows = sweep_hyperparams(run.data, run.experiment, grid);
    emit_sweep_csv(rows, (run.out_dir / "sweep.csv").string());
    std::cout << "swept " << rows.size() << " grid points\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph privacy defense via budgeted edge perturbation"};
    app.require_subcommand(1);

    std::string config_path;
    ConfigMap overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir, strategy, mode;
    std::optional<int> target;

    for (auto* sub : {app.add_subcommand("train", "train f_C and f_P, write checkpoints"),
                      app.add_subcommand("defend", "perturb the graph for target(s)"),
                      app.add_subcommand("evaluate", "run the experiment protocol"),
                      app.add_subcommand("compare", "candidate-strategy CA trajectories"),
                      app.add_subcommand("sweep", "hyperparameter grid sweep")}) {
        sub->add_option("--config", config_path, "key=value config file");
        sub->add_option("--seed", seed, "base random seed");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--strategy", strategy, "clean|random|nt|netfense");
        sub->add_option("--mode", mode, "single|multi");
        sub->add_option("--target", target, "target node (defend, single mode)");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (seed) overrides["seed"] = std::to_string(*seed);
        if (out_dir) overrides["out"] = *out_dir;
        if (strategy) overrides["strategy"] = *strategy;
        if (mode) overrides["mode"] = *mode;
        if (target) overrides["target"] = std::to_string(*target);

        const std::string command = app.get_subcommands().front()->get_name();
        Run run = build_run(config_path, overrides);
        write_metadata(run, command);

        if (command == "train") return cmd_train(run);
        if (command == "defend") return cmd_defend(run);
        if (command == "evaluate") return cmd_evaluate(run);
        if (command == "compare") return cmd_compare(run);
        if (command == "sweep") return cmd_sweep(run);
        throw ConfigError("unknown command");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
