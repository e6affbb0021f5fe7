#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <vector>

#include "netfense/graph.hpp"

namespace netfense {

// Denominator of the rank-1 influence formula. Exact is the Sherman-Morrison
// value 1 + trace(M2*M1^-1) = 1 - c'(M1^-1)_vu and agrees with a dense
// inverse difference; Revised flips sign and index to 1 + c'(M1^-1)_uv,
// which scores additions of high-PPR pairs and removals of low-PPR pairs as
// less noticeable.
enum class DeltaFormula { Exact, Revised };

// Personalized PageRank with restart probability alpha on H = D^-1 A.
// Holds an LU factorization of M1 = I - (1-alpha)H; rows, columns and the
// full fundamental matrix M1^-1 are produced on demand.
class PprModel {
public:
    PprModel() = default;

    double alpha() const { return alpha_; }
    int n_nodes() const { return n_; }

    double degree(int v) const { return degrees_[v]; }  // pre-flip degrees (D' ~ D)
    bool has_edge(int u, int v) const;

    const Eigen::VectorXd& colsum() const { return colsum_; }  // 1^T M1^-1
    Eigen::VectorXd row(int r) const;                          // e_r^T M1^-1
    Eigen::VectorXd col(int c) const;                          // M1^-1 e_c
    double entry(int i, int j) const;

    // Dense M1^-1; materialized once and cached (desk-scale sizes only).
    const Eigen::MatrixXd& fundamental() const;
    Eigen::MatrixXd ppr_matrix() const { return alpha_ * fundamental(); }

    friend PprModel build_ppr(const AttributedGraph& graph, double alpha);

private:
    double alpha_ = 0.1;
    int n_ = 0;
    Eigen::VectorXd degrees_;
    Eigen::VectorXd colsum_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    std::vector<std::vector<int>> adj_;
    mutable std::shared_ptr<const Eigen::MatrixXd> fundamental_cache_;
};

// Direct solve of the fundamental matrix. Isolated nodes fall back to a
// self-loop row in H (they are never perturbation candidates); rows of
// alpha*M1^-1 are checked to sum to 1.
PprModel build_ppr(const AttributedGraph& graph, double alpha);

struct InfluenceScore {
    std::pair<int, int> pair;
    double delta = 0.0;  // |forward + backward|
    std::pair<double, double> direction_parts{0.0, 0.0};
};

// Aggregate PPR influence of perturbing the directed edge u->v:
//   sum_i c'(M1^-1)_iu / denom,  c' = b_s * (1-alpha)/d_u,
// with b_s = +1 for Add and -1 for Remove. Throws DegeneratePerturbation
// when |denom| < 1e-12.
double delta_ppr_directed(const PprModel& model, int u, int v, EdgeAction action,
                          DeltaFormula formula = DeltaFormula::Exact);

// Undirected combination |delta(u->v) + delta(v->u)|; the action is inferred
// from the adjacency the model was built on.
InfluenceScore delta_ppr_symmetric(const PprModel& model, int u, int v,
                                   DeltaFormula formula = DeltaFormula::Exact);

struct ScoredPair {
    int u = 0;
    int v = 0;
    EdgeAction action = EdgeAction::Add;
    double delta = 0.0;
};

// Pairs whose influence stays below tau. With an anchor, only pairs
// (anchor, u); otherwise all unordered pairs. Self-pairs, isolated endpoints
// and removals touching a degree<=1 endpoint are excluded, as are pairs with
// a degenerate denominator. Result is sorted by (delta, u, v).
std::vector<ScoredPair> candidate_set(const PprModel& model, const AttributedGraph& graph,
                                      std::optional<int> anchor, double tau,
                                      DeltaFormula formula = DeltaFormula::Exact);

// Empirical q-quantile of the symmetric deltas over eligible pairs:
// exhaustive for n <= 2000, otherwise a uniform sample of 1e6 pairs
// (fixed internal seed, deterministic).
double quantile_threshold(const PprModel& model, const AttributedGraph& graph, double q,
                          DeltaFormula formula = DeltaFormula::Exact);

// Shared eligibility rule (see candidate_set).
bool pair_eligible(const AttributedGraph& graph, int u, int v);

void export_deltas_csv(const std::vector<ScoredPair>& pairs, const std::string& path);

}  // namespace netfense
