#include "netfense/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "json.hpp"

namespace netfense {

namespace {

double flip_sign(bool edge_present) { return edge_present ? -1.0 : 1.0; }

// Neighborhood of t in Ã (pattern of a_hat row t, includes t), extended by
// the flip's other endpoint so both the old and the new pattern are covered.
std::vector<int> tilde_union(const SpMat& a_hat, int t, int other) {
    std::vector<int> out;
    for (SpMat::InnerIterator it(a_hat, t); it; ++it) out.push_back(static_cast<int>(it.col()));
    if (!std::binary_search(out.begin(), out.end(), other)) {
        out.insert(std::lower_bound(out.begin(), out.end(), other), other);
    }
    return out;
}

struct FlipContext {
    int k, m;
    bool edge_present;       // before the flip
    Eigen::VectorXd d_new;   // d̃ after
    double factor_k, factor_m;

    double factor(int i) const { return i == k ? factor_k : i == m ? factor_m : 1.0; }
};

FlipContext make_context(const NormalizedAdjacency& norm, const EdgeFlip& flip) {
    const int n = norm.n_nodes();
    if (flip.u < 0 || flip.u >= n || flip.v < 0 || flip.v >= n || flip.u == flip.v)
        throw StateError("invalid flip endpoints");
    FlipContext ctx;
    ctx.k = flip.u;
    ctx.m = flip.v;
    ctx.edge_present = norm.a_hat.coeff(flip.u, flip.v) != 0.0;
    if (flip.action == EdgeAction::Add && ctx.edge_present)
        throw StateError("cannot add existing edge");
    if (flip.action == EdgeAction::Remove && !ctx.edge_present)
        throw StateError("cannot remove absent edge");
    const double s = flip_sign(ctx.edge_present);
    ctx.d_new = norm.d_tilde;
    ctx.d_new[ctx.k] += s;
    ctx.d_new[ctx.m] += s;
    ctx.factor_k = std::sqrt(norm.d_tilde[ctx.k] / ctx.d_new[ctx.k]);
    ctx.factor_m = std::sqrt(norm.d_tilde[ctx.m] / ctx.d_new[ctx.m]);
    return ctx;
}

// ã_tx before/after the flip, for t in {k,m}.
inline bool tilde_old(const SpMat& a_hat, int t, int x) { return a_hat.coeff(t, x) != 0.0; }

inline bool tilde_new(const FlipContext& ctx, const SpMat& a_hat, int t, int x) {
    if ((t == ctx.k && x == ctx.m) || (t == ctx.m && x == ctx.k)) return !ctx.edge_present;
    return tilde_old(a_hat, t, x);
}

// Correction triplets for one hinge node t: entries (i,j) over the tilde
// neighborhood square, value (ã'_it ã'_tj / d̃'_t - ã_it ã_tj / d̃_t).
void append_corrections(const NormalizedAdjacency& norm, const FlipContext& ctx, int t, int other,
                        std::vector<Eigen::Triplet<double>>& trips) {
    const auto hood = tilde_union(norm.a_hat, t, other);
    const double inv_old = 1.0 / norm.d_tilde[t];
    const double inv_new = 1.0 / ctx.d_new[t];
    std::vector<char> old_flag(hood.size()), new_flag(hood.size());
    for (size_t a = 0; a < hood.size(); ++a) {
        old_flag[a] = tilde_old(norm.a_hat, t, hood[a]) ? 1 : 0;
        new_flag[a] = tilde_new(ctx, norm.a_hat, t, hood[a]) ? 1 : 0;
    }
    for (size_t a = 0; a < hood.size(); ++a) {
        for (size_t b = 0; b < hood.size(); ++b) {
            const double corr = (new_flag[a] && new_flag[b] ? inv_new : 0.0) -
                                (old_flag[a] && old_flag[b] ? inv_old : 0.0);
            if (corr == 0.0) continue;
            const int i = hood[a];
            const int j = hood[b];
            trips.emplace_back(i, j, corr / std::sqrt(ctx.d_new[i] * ctx.d_new[j]));
        }
    }
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores) {
    Eigen::MatrixXd z(scores.rows(), scores.cols());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double mx = scores.row(i).maxCoeff();
        Eigen::ArrayXd e = (scores.row(i).array() - mx).exp();
        z.row(i) = e / e.sum();
    }
    return z;
}

int argmax_row(const Eigen::MatrixXd& z, int row) {
    Eigen::Index best = 0;
    z.row(row).maxCoeff(&best);
    return static_cast<int>(best);
}

Eigen::MatrixXd glorot_uniform(int rows, int cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> unif(-limit, limit);
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = unif(rng);
    return w;
}

struct AdamState {
    Eigen::MatrixXd m, v;
    explicit AdamState(const Eigen::MatrixXd& shape)
        : m(Eigen::MatrixXd::Zero(shape.rows(), shape.cols())),
          v(Eigen::MatrixXd::Zero(shape.rows(), shape.cols())) {}

    void step(Eigen::MatrixXd& w, const Eigen::MatrixXd& grad, double lr, int t) {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        m = b1 * m + (1.0 - b1) * grad;
        v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
        const double bc1 = 1.0 - std::pow(b1, t);
        const double bc2 = 1.0 - std::pow(b2, t);
        w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    }
};

}  // namespace

NormalizedAdjacency build_normalized(const AttributedGraph& graph) {
    const int n = graph.n_nodes();
    NormalizedAdjacency norm;
    norm.d_tilde = graph.degrees().array() + 1.0;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(2 * graph.n_edges() + n));
    for (int i = 0; i < n; ++i) {
        trips.emplace_back(i, i, 1.0 / norm.d_tilde[i]);
        for (int j : graph.neighbors(i))
            trips.emplace_back(i, j, 1.0 / std::sqrt(norm.d_tilde[i] * norm.d_tilde[j]));
    }
    norm.a_hat.resize(n, n);
    norm.a_hat.setFromTriplets(trips.begin(), trips.end());
    norm.a_hat_sq = norm.a_hat * norm.a_hat;  // nonnegative: no cancellation fill
    return norm;
}

NormalizedAdjacency incremental_a2_update(const NormalizedAdjacency& norm, const EdgeFlip& flip) {
    const FlipContext ctx = make_context(norm, flip);
    const int n = norm.n_nodes();

    NormalizedAdjacency out;
    out.d_tilde = ctx.d_new;

    // Â': rescale rows/cols k,m, toggle the flipped entry.
    {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<size_t>(norm.a_hat.nonZeros()) + 2);
        for (int i = 0; i < n; ++i) {
            for (SpMat::InnerIterator it(norm.a_hat, i); it; ++it) {
                const int j = static_cast<int>(it.col());
                if (ctx.edge_present &&
                    ((i == ctx.k && j == ctx.m) || (i == ctx.m && j == ctx.k)))
                    continue;  // removed edge
                const double f = ctx.factor(i) * ctx.factor(j);
                trips.emplace_back(i, j, f == 1.0 ? it.value() : it.value() * f);
            }
        }
        if (!ctx.edge_present) {
            const double val = 1.0 / std::sqrt(ctx.d_new[ctx.k] * ctx.d_new[ctx.m]);
            trips.emplace_back(ctx.k, ctx.m, val);
            trips.emplace_back(ctx.m, ctx.k, val);
        }
        out.a_hat.resize(n, n);
        out.a_hat.setFromTriplets(trips.begin(), trips.end());
    }

    // Â'²: base rescale plus the exact hinge corrections at k and m.
    {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<size_t>(norm.a_hat_sq.nonZeros()) + 1024);
        for (int i = 0; i < n; ++i) {
            for (SpMat::InnerIterator it(norm.a_hat_sq, i); it; ++it) {
                const int j = static_cast<int>(it.col());
                const double f = ctx.factor(i) * ctx.factor(j);
                trips.emplace_back(i, j, f == 1.0 ? it.value() : it.value() * f);
            }
        }
        append_corrections(norm, ctx, ctx.k, ctx.m, trips);
        append_corrections(norm, ctx, ctx.m, ctx.k, trips);
        out.a_hat_sq.resize(n, n);
        out.a_hat_sq.setFromTriplets(trips.begin(), trips.end());
        out.a_hat_sq.prune([](Eigen::Index, Eigen::Index, const double& v) { return v != 0.0; });
    }
    return out;
}

std::vector<std::pair<int, double>> a2_row_after_flip(const NormalizedAdjacency& norm,
                                                      const EdgeFlip& flip, int row) {
    const FlipContext ctx = make_context(norm, flip);
    std::vector<std::pair<int, double>> acc;
    const double fr = ctx.factor(row);
    for (SpMat::InnerIterator it(norm.a_hat_sq, row); it; ++it) {
        const int j = static_cast<int>(it.col());
        const double f = fr * ctx.factor(j);
        acc.emplace_back(j, f == 1.0 ? it.value() : it.value() * f);
    }
    for (const int t : {ctx.k, ctx.m}) {
        const int other = t == ctx.k ? ctx.m : ctx.k;
        const bool row_old = tilde_old(norm.a_hat, t, row);
        const bool row_new = tilde_new(ctx, norm.a_hat, t, row);
        if (!row_old && !row_new) continue;
        const double inv_old = 1.0 / norm.d_tilde[t];
        const double inv_new = 1.0 / ctx.d_new[t];
        for (int j : tilde_union(norm.a_hat, t, other)) {
            const double corr = (row_new && tilde_new(ctx, norm.a_hat, t, j) ? inv_new : 0.0) -
                                (row_old && tilde_old(norm.a_hat, t, j) ? inv_old : 0.0);
            if (corr == 0.0) continue;
            acc.emplace_back(j, corr / std::sqrt(ctx.d_new[row] * ctx.d_new[j]));
        }
    }
    std::sort(acc.begin(), acc.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<int, double>> out;
    out.reserve(acc.size());
    for (const auto& [j, val] : acc) {
        if (!out.empty() && out.back().first == j)
            out.back().second += val;
        else
            out.emplace_back(j, val);
    }
    return out;
}

Eigen::VectorXi task_labels(const LabelSet& labels, Task task) {
    return task == Task::Target ? labels.target : labels.priv;
}

namespace {

// Raw prediction scores with the aggregated features Â X precomputed once
// per graph (it is weight-independent, so the training loop reuses it).
Eigen::MatrixXd forward_scores(const SpMat& a_hat, const Eigen::MatrixXd& ax,
                               const Eigen::MatrixXd& w1, const Eigen::MatrixXd& w2) {
    const Eigen::MatrixXd h1 = (ax * w1).cwiseMax(0.0);
    return (a_hat * h1) * w2;
}

GcnGradients loss_and_gradients_core(const SpMat& a_hat, const Eigen::MatrixXd& ax,
                                     const Eigen::VectorXi& labels,
                                     const std::vector<int>& train_nodes,
                                     const Eigen::MatrixXd& w1, const Eigen::MatrixXd& w2,
                                     double weight_decay) {
    if (ax.cols() != w1.rows() || w1.cols() != w2.rows())
        throw ShapeError("weight shapes do not match features");

    const Eigen::MatrixXd s1 = ax * w1;                   // n x h
    const Eigen::MatrixXd h1 = s1.cwiseMax(0.0);          // rectifier
    const Eigen::MatrixXd ah1 = a_hat * h1;               // n x h
    const Eigen::MatrixXd s2 = ah1 * w2;                  // n x c

    GcnGradients out;
    Eigen::MatrixXd g2 = Eigen::MatrixXd::Zero(s2.rows(), s2.cols());
    for (int v : train_nodes) {
        const int y = labels[v];
        if (y < 0 || y >= s2.cols()) throw ConfigError("training node lacks a valid label");
        const double mx = s2.row(v).maxCoeff();
        Eigen::ArrayXd e = (s2.row(v).array() - mx).exp();
        const double lse = mx + std::log(e.sum());
        out.loss += lse - s2(v, y);
        g2.row(v) = (e / e.sum()).matrix().transpose();
        g2(v, y) -= 1.0;
    }
    out.loss += 0.5 * weight_decay * (w1.squaredNorm() + w2.squaredNorm());

    out.grad_w2 = ah1.transpose() * g2 + weight_decay * w2;
    Eigen::MatrixXd gh1 = a_hat * (g2 * w2.transpose());  // Â symmetric
    gh1 = (s1.array() > 0.0).cast<double>() * gh1.array();
    out.grad_w1 = ax.transpose() * gh1 + weight_decay * w1;
    return out;
}

}  // namespace

GcnGradients gcn_loss_and_gradients(const SpMat& a_hat, const Eigen::MatrixXd& x,
                                    const Eigen::VectorXi& labels,
                                    const std::vector<int>& train_nodes,
                                    const Eigen::MatrixXd& w1, const Eigen::MatrixXd& w2,
                                    double weight_decay) {
    return loss_and_gradients_core(a_hat, a_hat * x, labels, train_nodes, w1, w2, weight_decay);
}

GcnModel train_gcn(const AttributedGraph& graph, const LabelSet& labels, const DataSplit& split,
                   Task task, const TrainOptions& opts) {
    const Eigen::VectorXi y = task_labels(labels, task);
    const int n_classes = task == Task::Private ? 2 : labels.n_target_classes();
    if (n_classes < 2) throw ConfigError("need at least two classes to train");

    std::vector<int> train_nodes, val_nodes;
    for (int v : split.train)
        if (y[v] >= 0) train_nodes.push_back(v);
    for (int v : split.validation)
        if (y[v] >= 0) val_nodes.push_back(v);
    if (train_nodes.empty()) throw ConfigError("no labeled training nodes for task");

    const NormalizedAdjacency norm = build_normalized(graph);
    const Eigen::MatrixXd& x = graph.features();

    std::mt19937_64 rng(opts.seed);
    GcnModel model;
    model.hidden_dim = opts.hidden_dim;
    model.trained_for = task;
    model.seed = opts.seed;
    model.w1 = glorot_uniform(static_cast<int>(x.cols()), opts.hidden_dim, rng);
    model.w2 = glorot_uniform(opts.hidden_dim, n_classes, rng);

    AdamState adam1(model.w1), adam2(model.w2);
    Eigen::MatrixXd best_w1 = model.w1, best_w2 = model.w2;
    double best_score = -1.0;

    // Selection set: validation accuracy; falls back to training accuracy
    // when no labeled validation node exists.
    const std::vector<int>& select_nodes = val_nodes.empty() ? train_nodes : val_nodes;

    const Eigen::MatrixXd ax = norm.a_hat * x;
    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        GcnGradients g = loss_and_gradients_core(norm.a_hat, ax, y, train_nodes, model.w1,
                                                 model.w2, opts.weight_decay);
        adam1.step(model.w1, g.grad_w1, opts.learning_rate, epoch);
        adam2.step(model.w2, g.grad_w2, opts.learning_rate, epoch);

        // argmax of the raw scores matches argmax of the softmax
        const Eigen::MatrixXd scores = forward_scores(norm.a_hat, ax, model.w1, model.w2);
        const double score = accuracy(scores, y, select_nodes);
        if (score > best_score) {
            best_score = score;
            best_w1 = model.w1;
            best_w2 = model.w2;
        }
    }
    model.w1 = best_w1;
    model.w2 = best_w2;
    model.w_prime = model.w1 * model.w2;
    return model;
}

Eigen::MatrixXd predict_full_weights(const NormalizedAdjacency& norm, const Eigen::MatrixXd& x,
                                     const Eigen::MatrixXd& w1, const Eigen::MatrixXd& w2) {
    if (x.cols() != w1.rows() || w1.cols() != w2.rows()) throw ShapeError("shape mismatch");
    if (x.rows() != norm.a_hat.rows()) throw ShapeError("feature rows != graph nodes");
    const Eigen::MatrixXd h1 = (norm.a_hat * (x * w1)).cwiseMax(0.0);
    return softmax_rows(norm.a_hat * (h1 * w2));
}

Eigen::MatrixXd predict_full(const GcnModel& model, const NormalizedAdjacency& norm,
                             const Eigen::MatrixXd& x) {
    return predict_full_weights(norm, x, model.w1, model.w2);
}

Eigen::MatrixXd predict_surrogate(const GcnModel& model, const NormalizedAdjacency& norm,
                                  const Eigen::MatrixXd& x) {
    if (model.w_prime.size() == 0) throw StateError("model has no collapsed surrogate weight");
    if (x.cols() != model.w_prime.rows()) throw ShapeError("shape mismatch");
    return norm.a_hat_sq * (x * model.w_prime);
}

double classification_margin(const Eigen::MatrixXd& z, int node, int true_label) {
    const double p_true = z(node, true_label);
    double best_other = -1.0;
    for (Eigen::Index c = 0; c < z.cols(); ++c)
        if (c != true_label) best_other = std::max(best_other, z(node, c));
    return p_true - best_other;
}

Eigen::VectorXd margins(const Eigen::MatrixXd& z, const Eigen::VectorXi& labels) {
    Eigen::VectorXd out(z.rows());
    for (Eigen::Index v = 0; v < z.rows(); ++v)
        out[v] = labels[v] >= 0 ? classification_margin(z, static_cast<int>(v), labels[v])
                                : std::numeric_limits<double>::quiet_NaN();
    return out;
}

double accuracy(const Eigen::MatrixXd& z, const Eigen::VectorXi& labels,
                const std::vector<int>& nodes) {
    long correct = 0, counted = 0;
    for (int v : nodes) {
        if (labels[v] < 0) continue;
        ++counted;
        if (argmax_row(z, v) == labels[v]) ++correct;
    }
    return counted == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(counted);
}

Eigen::MatrixXd feature_flip_delta(const GcnModel& model, const NormalizedAdjacency& norm,
                                   const Eigen::MatrixXd& x, int node, int feature) {
    const double h = 1.0 - 2.0 * x(node, feature);  // +1 turning on, -1 turning off
    // Â² is symmetric, so its column at `node` equals its row there.
    Eigen::VectorXd col = Eigen::VectorXd::Zero(norm.a_hat_sq.rows());
    for (SpMat::InnerIterator it(norm.a_hat_sq, node); it; ++it)
        col[it.col()] = it.value();
    return (h * col) * model.w_prime.row(feature);
}

void save_model(const GcnModel& model, const std::string& json_path,
                const std::string& weights_path) {
    std::ofstream wf(weights_path);
    if (!wf) throw IoError("cannot write " + weights_path);
    wf.precision(17);
    auto dump = [&wf](const char* name, const Eigen::MatrixXd& w) {
        wf << name << ' ' << w.rows() << ' ' << w.cols() << '\n';
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) wf << (j ? " " : "") << w(i, j);
            wf << '\n';
        }
    };
    dump("W1", model.w1);
    dump("W2", model.w2);

    nlohmann::ordered_json header;
    header["format"] = "netfense-gcn";
    header["version"] = 1;
    header["task"] = to_string(model.trained_for);
    header["hidden_dim"] = model.hidden_dim;
    header["in_features"] = model.in_features();
    header["n_classes"] = model.n_classes();
    header["seed"] = model.seed;
    header["weights_file"] = std::filesystem::path(weights_path).filename().string();
    std::ofstream jf(json_path);
    if (!jf) throw IoError("cannot write " + json_path);
    jf << header.dump(2) << '\n';
}

GcnModel load_model(const std::string& json_path) {
    std::ifstream jf(json_path);
    if (!jf) throw IoError("cannot open " + json_path);
    nlohmann::json header;
    try {
        jf >> header;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(json_path, 0, e.what());
    }
    if (header.value("format", "") != "netfense-gcn")
        throw DataError(json_path + ": not a model header");

    GcnModel model;
    model.hidden_dim = header.at("hidden_dim").get<int>();
    model.seed = header.at("seed").get<std::uint64_t>();
    model.trained_for =
        header.at("task").get<std::string>() == "private" ? Task::Private : Task::Target;

    const auto weights_path = std::filesystem::path(json_path).parent_path() /
                              header.at("weights_file").get<std::string>();
    std::ifstream wf(weights_path);
    if (!wf) throw IoError("cannot open " + weights_path.string());
    auto read_matrix = [&wf, &weights_path](const std::string& expect) {
        std::string name;
        long rows, cols;
        if (!(wf >> name >> rows >> cols) || name != expect)
            throw DataError(weights_path.string() + ": malformed weight dump");
        Eigen::MatrixXd w(rows, cols);
        for (long i = 0; i < rows; ++i)
            for (long j = 0; j < cols; ++j)
                if (!(wf >> w(i, j)))
                    throw DataError(weights_path.string() + ": truncated weight dump");
        return w;
    };
    model.w1 = read_matrix("W1");
    model.w2 = read_matrix("W2");
    if (model.w1.cols() != model.hidden_dim || model.w2.rows() != model.hidden_dim)
        throw ShapeError(json_path + ": weight shapes disagree with header");
    model.w_prime = model.w1 * model.w2;
    return model;
}

}  // namespace netfense
