#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "netfense/errors.hpp"

namespace netfense {

enum class EdgeAction { Add, Remove };

inline const char* to_string(EdgeAction a) { return a == EdgeAction::Add ? "add" : "remove"; }

// A single undirected edge toggle. Valid only when the action matches the
// current adjacency (Remove needs the edge present, Add needs it absent).
struct EdgeFlip {
    int u = 0;
    int v = 0;
    EdgeAction action = EdgeAction::Add;

    EdgeFlip inverse() const {
        return {u, v, action == EdgeAction::Add ? EdgeAction::Remove : EdgeAction::Add};
    }
};

// Undirected simple graph with binary node features. Adjacency is kept as
// sorted neighbor lists; the feature matrix is shared between copies so that
// structure-only perturbations stay cheap. Immutable after construction:
// apply_flip returns a new graph.
class AttributedGraph {
public:
    AttributedGraph() = default;
    AttributedGraph(int n_nodes, const std::vector<std::pair<int, int>>& edges,
                    Eigen::MatrixXd features);

    int n_nodes() const { return n_nodes_; }
    long n_edges() const { return n_edges_; }
    int n_features() const { return static_cast<int>(features_->cols()); }

    bool has_edge(int u, int v) const;
    int degree(int v) const { return static_cast<int>(adj_[static_cast<size_t>(v)].size()); }
    const std::vector<int>& neighbors(int v) const { return adj_[static_cast<size_t>(v)]; }
    std::vector<std::pair<int, int>> edge_list() const;  // u < v, sorted

    const Eigen::MatrixXd& features() const { return *features_; }
    std::shared_ptr<const Eigen::MatrixXd> features_ptr() const { return features_; }

    Eigen::SparseMatrix<double> adjacency() const;  // symmetric 0/1, no diagonal
    Eigen::VectorXd degrees() const;

    // Structure perturbations (Def. 1 semantics): returns a copy with the
    // flip applied and the perturbation counter advanced.
    AttributedGraph apply_flip(const EdgeFlip& flip) const;
    long n_perturbations() const { return n_perturbations_; }

    // Derived graph with the same structure but different features
    // (feature-perturbation study, private-column removal).
    AttributedGraph with_features(Eigen::MatrixXd features) const;

    void check_flip(const EdgeFlip& flip) const;  // throws StateError when invalid

private:
    int n_nodes_ = 0;
    long n_edges_ = 0;
    long n_perturbations_ = 0;
    std::vector<std::vector<int>> adj_;
    std::shared_ptr<const Eigen::MatrixXd> features_ = std::make_shared<Eigen::MatrixXd>();
};

// Per-node labels for the two classification tasks. target(v) may be
// multi-class; private labels are strictly binary. -1 marks unknown.
struct LabelSet {
    Eigen::VectorXi target;
    Eigen::VectorXi priv;

    int n_target_classes() const { return target.size() == 0 ? 0 : target.maxCoeff() + 1; }
    bool target_known(int v) const { return target[v] >= 0; }
    bool private_known(int v) const { return priv[v] >= 0; }
    void validate(int n_nodes) const;
};

struct DataSplit {
    std::vector<int> train;
    std::vector<int> validation;
    std::vector<int> test;
    std::uint64_t seed = 0;
};

struct Dataset {
    std::string name;
    AttributedGraph graph;
    LabelSet labels;
};

// --- ingestion -------------------------------------------------------------

// Edge file: one whitespace-separated 0-based pair per line (each undirected
// edge once); '#' comments and blank lines allowed. Features and labels are
// CSV with a node_id first column. Self-loops, duplicates (including the
// mirrored duplicate "v u"), and out-of-range endpoints are rejected.
Dataset load_graph(const std::string& edge_file, const std::string& feature_file,
                   const std::string& label_file);

void save_graph(const Dataset& data, const std::string& edge_file,
                const std::string& feature_file, const std::string& label_file);

struct SplitRatios {
    double train = 0.1;
    double validation = 0.1;
    double test = 0.8;
};

// Deterministic shuffle split. Sizes: floor(train*n), floor(validation*n),
// remainder to test.
DataSplit make_split(const AttributedGraph& graph, const SplitRatios& ratios, std::uint64_t seed);

// --- structural statistics ---------------------------------------------------

// Mean over all nodes of 2*triangles(v) / (deg(v)*(deg(v)-1)); degree < 2
// contributes 0.
double avg_clustering_coefficient(const AttributedGraph& graph);

// --- synthetic data ----------------------------------------------------------

// Feature generator for SBM fixtures: a block-indicative group, a group tied
// to the planted private bit, and background noise columns.
struct FeatureModel {
    int target_cols = 16;
    int private_cols = 16;
    int noise_cols = 8;
    double p_active = 0.5;    // column matches the node's group
    double p_inactive = 0.1;  // column belongs to another group
    double p_noise = 0.1;
};

// Stochastic block model: block id is the target label; the private label is
// an independent fair coin per node, reflected only in the feature columns.
Dataset generate_sbm(const std::vector<int>& block_sizes, double intra_p, double inter_p,
                     const FeatureModel& features, std::uint64_t seed);

}  // namespace netfense
