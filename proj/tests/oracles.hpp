// Test-only reference implementations, kept independent of the library code
// paths they check: power iteration for PPR, dense inverses for the rank-1
// identities, brute-force triangle counts, dense products for Â², central
// finite differences for gradients.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <vector>

#include "netfense/graph.hpp"

namespace oracles {

using netfense::AttributedGraph;
using netfense::EdgeAction;

// Dense row-stochastic H = D^-1 A with the self-loop fallback on isolated
// nodes.
inline Eigen::MatrixXd dense_transition(const AttributedGraph& g) {
    const int n = g.n_nodes();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const auto& nb = g.neighbors(i);
        if (nb.empty()) {
            h(i, i) = 1.0;
            continue;
        }
        for (int j : nb) h(i, j) = 1.0 / static_cast<double>(nb.size());
    }
    return h;
}

inline Eigen::MatrixXd dense_m1(const AttributedGraph& g, double alpha) {
    const int n = g.n_nodes();
    return Eigen::MatrixXd::Identity(n, n) - (1.0 - alpha) * dense_transition(g);
}

// One-hot perturbation matrix B for the directed edge u->v and the matching
// M2 = -(1-alpha) D^-1 B.
inline Eigen::MatrixXd dense_m2(const AttributedGraph& g, double alpha, int u, int v,
                                EdgeAction action) {
    const int n = g.n_nodes();
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(n, n);
    const double b_s = action == EdgeAction::Add ? 1.0 : -1.0;
    m2(u, v) = -(1.0 - alpha) * b_s / static_cast<double>(g.degree(u));
    return m2;
}

// Row r of the PPR matrix by iterating pi^T <- (1-alpha) pi^T H + alpha e_r^T.
inline Eigen::VectorXd power_iteration_ppr_row(const AttributedGraph& g, double alpha, int r,
                                               double tol = 1e-13, int max_iter = 100000) {
    const Eigen::MatrixXd h = dense_transition(g);
    const int n = g.n_nodes();
    Eigen::RowVectorXd pi = Eigen::RowVectorXd::Zero(n);
    pi[r] = 1.0;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::RowVectorXd next = (1.0 - alpha) * (pi * h);
        next[r] += alpha;
        if ((next - pi).cwiseAbs().maxCoeff() < tol) return next.transpose();
        pi = next;
    }
    return pi.transpose();
}

// Aggregate directed PPR influence via dense inverses:
// sum_ij alpha [(M1+M2)^-1 - M1^-1]_ij.
inline double dense_delta_directed(const AttributedGraph& g, double alpha, int u, int v,
                                   EdgeAction action) {
    const Eigen::MatrixXd m1 = dense_m1(g, alpha);
    const Eigen::MatrixXd m2 = dense_m2(g, alpha, u, v, action);
    const Eigen::MatrixXd diff = alpha * ((m1 + m2).inverse() - m1.inverse());
    return diff.sum();
}

inline double brute_force_avg_clustering(const AttributedGraph& g) {
    const int n = g.n_nodes();
    double total = 0.0;
    for (int v = 0; v < n; ++v) {
        const int d = g.degree(v);
        if (d < 2) continue;
        long tri = 0;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                if (g.has_edge(v, a) && g.has_edge(v, b) && g.has_edge(a, b)) ++tri;
        total += 2.0 * static_cast<double>(tri) / (static_cast<double>(d) * (d - 1));
    }
    return n == 0 ? 0.0 : total / n;
}

inline Eigen::MatrixXd dense_normalized(const AttributedGraph& g) {
    const int n = g.n_nodes();
    Eigen::MatrixXd a_tilde = Eigen::MatrixXd::Identity(n, n);
    for (int u = 0; u < n; ++u)
        for (int v : g.neighbors(u)) a_tilde(u, v) = 1.0;
    Eigen::VectorXd d_tilde(n);
    for (int u = 0; u < n; ++u) d_tilde[u] = static_cast<double>(g.degree(u)) + 1.0;
    Eigen::VectorXd inv_sqrt = d_tilde.array().rsqrt();
    return inv_sqrt.asDiagonal() * a_tilde * inv_sqrt.asDiagonal();
}

inline std::vector<int> bfs_distances(const AttributedGraph& g, const std::vector<int>& sources) {
    std::vector<int> dist(static_cast<size_t>(g.n_nodes()), -1);
    std::vector<int> frontier = sources;
    for (int s : sources) dist[static_cast<size_t>(s)] = 0;
    int level = 0;
    while (!frontier.empty()) {
        ++level;
        std::vector<int> next;
        for (int u : frontier)
            for (int w : g.neighbors(u))
                if (dist[static_cast<size_t>(w)] < 0) {
                    dist[static_cast<size_t>(w)] = level;
                    next.push_back(w);
                }
        frontier = std::move(next);
    }
    return dist;
}

// Seeded Erdos-Renyi graph with constant feature width (for structural tests).
inline AttributedGraph random_graph(int n, double p, std::uint64_t seed, int features = 3) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
            if (unif(rng) < p) edges.emplace_back(u, v);
    Eigen::MatrixXd x(n, features);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < features; ++j) x(i, j) = unif(rng) < 0.5 ? 1.0 : 0.0;
    return AttributedGraph(n, edges, x);
}

// Chung-Lu random graph whose expected degrees follow a power law with the
// given exponent (pareto-sampled weights, capped to keep probabilities sane).
inline AttributedGraph powerlaw_graph(int n, double exponent, std::uint64_t seed,
                                      double min_weight = 2.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> w(static_cast<size_t>(n));
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        // inverse-CDF Pareto sample
        const double u = std::max(unif(rng), 1e-12);
        w[static_cast<size_t>(i)] =
            std::min(min_weight * std::pow(u, -1.0 / (exponent - 1.0)), std::sqrt(1.0 * n) * 4.0);
        total += w[static_cast<size_t>(i)];
    }
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double p =
                std::min(1.0, w[static_cast<size_t>(i)] * w[static_cast<size_t>(j)] / total);
            if (unif(rng) < p) edges.emplace_back(i, j);
        }
    return AttributedGraph(n, edges, Eigen::MatrixXd::Zero(n, 1));
}

// Central finite differences of a scalar function over a matrix argument.
inline Eigen::MatrixXd finite_difference(const std::function<double(const Eigen::MatrixXd&)>& f,
                                         Eigen::MatrixXd at, double eps = 1e-4) {
    Eigen::MatrixXd grad(at.rows(), at.cols());
    for (Eigen::Index i = 0; i < at.rows(); ++i)
        for (Eigen::Index j = 0; j < at.cols(); ++j) {
            const double orig = at(i, j);
            at(i, j) = orig + eps;
            const double hi = f(at);
            at(i, j) = orig - eps;
            const double lo = f(at);
            at(i, j) = orig;
            grad(i, j) = (hi - lo) / (2.0 * eps);
        }
    return grad;
}

}  // namespace oracles
