#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <string>
#include <vector>

#include "netfense/graph.hpp"

namespace netfense {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Â = D̃^(-1/2) Ã D̃^(-1/2) with Ã = A + I, plus its square. Snapshots are
// immutable; incremental updates return new values.
struct NormalizedAdjacency {
    SpMat a_hat;
    SpMat a_hat_sq;
    Eigen::VectorXd d_tilde;  // deg + 1

    int n_nodes() const { return static_cast<int>(a_hat.rows()); }
};

NormalizedAdjacency build_normalized(const AttributedGraph& graph);

// Exact update of Â and Â² under one edge flip (k,m): entries are rescaled by
// the degree shift and corrected by sum over t in {k,m} of
// (ã'_it ã'_tj / d̃'_t - ã_it ã_tj / d̃_t), which equals a full recompute.
// Entries untouched by the flip are preserved bitwise.
NormalizedAdjacency incremental_a2_update(const NormalizedAdjacency& norm, const EdgeFlip& flip);

// Single row of Â'² under a candidate flip, without materializing the whole
// matrix. Returned sparse and sorted by column.
std::vector<std::pair<int, double>> a2_row_after_flip(const NormalizedAdjacency& norm,
                                                      const EdgeFlip& flip, int row);

enum class Task { Target, Private };

inline const char* to_string(Task t) { return t == Task::Target ? "target" : "private"; }

// Per-node labels for one task; -1 marks unknown.
Eigen::VectorXi task_labels(const LabelSet& labels, Task task);

struct TrainOptions {
    int hidden_dim = 16;
    int epochs = 200;
    double learning_rate = 0.01;
    double weight_decay = 5e-4;
    std::uint64_t seed = 1;
};

// Two-layer GCN weights plus the collapsed activation-free surrogate
// W' = W1 W2 (always derived from the trained weights, never trained).
struct GcnModel {
    Eigen::MatrixXd w1;
    Eigen::MatrixXd w2;
    Eigen::MatrixXd w_prime;
    int hidden_dim = 16;
    Task trained_for = Task::Target;
    std::uint64_t seed = 0;

    int n_classes() const { return static_cast<int>(w2.cols()); }
    int in_features() const { return static_cast<int>(w1.rows()); }
};

// Full-batch adaptive-moment training of softmax(Â relu(Â X W1) W2) with
// summed cross entropy and L2 decay; the returned weights are the epoch with
// the best validation accuracy (earliest on ties). Deterministic per seed.
GcnModel train_gcn(const AttributedGraph& graph, const LabelSet& labels, const DataSplit& split,
                   Task task, const TrainOptions& opts);

// Row-stochastic class probabilities of the full model.
Eigen::MatrixXd predict_full(const GcnModel& model, const NormalizedAdjacency& norm,
                             const Eigen::MatrixXd& x);

// Same forward pass with explicit weights (training loop, gradient checks).
Eigen::MatrixXd predict_full_weights(const NormalizedAdjacency& norm, const Eigen::MatrixXd& x,
                                     const Eigen::MatrixXd& w1, const Eigen::MatrixXd& w2);

// Raw surrogate scores Z' = Â² X W'.
Eigen::MatrixXd predict_surrogate(const GcnModel& model, const NormalizedAdjacency& norm,
                                  const Eigen::MatrixXd& x);

// Probability of the true class minus the best other class; positive iff
// the argmax prediction is correct.
double classification_margin(const Eigen::MatrixXd& z, int node, int true_label);

// Margin per node (NaN where the label is unknown).
Eigen::VectorXd margins(const Eigen::MatrixXd& z, const Eigen::VectorXi& labels);

// Share of `nodes` with known labels classified correctly by argmax.
double accuracy(const Eigen::MatrixXd& z, const Eigen::VectorXi& labels,
                const std::vector<int>& nodes);

struct GcnGradients {
    double loss = 0.0;
    Eigen::MatrixXd grad_w1;
    Eigen::MatrixXd grad_w2;
};

// Loss (summed cross entropy over train nodes + (decay/2)*||W||^2) and its
// exact gradients; the single source of truth used by the training loop.
GcnGradients gcn_loss_and_gradients(const SpMat& a_hat, const Eigen::MatrixXd& x,
                                    const Eigen::VectorXi& labels,
                                    const std::vector<int>& train_nodes,
                                    const Eigen::MatrixXd& w1, const Eigen::MatrixXd& w2,
                                    double weight_decay);

// Closed-form surrogate score change from flipping feature x(node,feature):
// column Â²_{:,node} times (1-2x) W'_{feature,:}. Returned dense n x classes.
Eigen::MatrixXd feature_flip_delta(const GcnModel& model, const NormalizedAdjacency& norm,
                                   const Eigen::MatrixXd& x, int node, int feature);

// Checkpoints: JSON header next to a plain-text weight dump; doubles are
// written with 17 significant digits so reloads are bit-exact.
void save_model(const GcnModel& model, const std::string& json_path,
                const std::string& weights_path);
GcnModel load_model(const std::string& json_path);

}  // namespace netfense
