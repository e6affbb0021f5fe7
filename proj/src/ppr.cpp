#include "netfense/ppr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace netfense {

namespace {

constexpr double kDenomEps = 1e-12;

struct DirectedParts {
    double c_prime;
    double numerator;
};

double denominator(double c_prime, double entry_vu, double entry_uv, DeltaFormula formula) {
    // Exact: 1 + g with g = trace(M2 M1^-1) = -c'(M1^-1)_vu.
    // Revised: the sign- and direction-adjusted 1 + c'(M1^-1)_uv.
    return formula == DeltaFormula::Exact ? 1.0 - c_prime * entry_vu : 1.0 + c_prime * entry_uv;
}

// delta(u->v) given the two cross entries of M1^-1 and the column sum at u.
double directed_delta(double alpha, double deg_u, EdgeAction action, double colsum_u,
                      double entry_vu, double entry_uv, DeltaFormula formula) {
    const double b_s = action == EdgeAction::Add ? 1.0 : -1.0;
    const double c_prime = b_s * (1.0 - alpha) / deg_u;
    const double denom = denominator(c_prime, entry_vu, entry_uv, formula);
    if (std::abs(denom) < kDenomEps)
        throw DegeneratePerturbation("rank-1 denominator vanished for pair");
    return c_prime * colsum_u / denom;
}

}  // namespace

bool PprModel::has_edge(int u, int v) const {
    const auto& nb = adj_[static_cast<size_t>(u)];
    return std::binary_search(nb.begin(), nb.end(), v);
}

Eigen::VectorXd PprModel::row(int r) const {
    if (fundamental_cache_) return fundamental_cache_->row(r);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n_);
    e[r] = 1.0;
    return lu_.transpose().solve(e);
}

Eigen::VectorXd PprModel::col(int c) const {
    if (fundamental_cache_) return fundamental_cache_->col(c);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n_);
    e[c] = 1.0;
    return lu_.solve(e);
}

double PprModel::entry(int i, int j) const {
    if (fundamental_cache_) return (*fundamental_cache_)(i, j);
    return col(j)[i];
}

const Eigen::MatrixXd& PprModel::fundamental() const {
    if (!fundamental_cache_)
        fundamental_cache_ = std::make_shared<Eigen::MatrixXd>(
            lu_.solve(Eigen::MatrixXd::Identity(n_, n_)));
    return *fundamental_cache_;
}

PprModel build_ppr(const AttributedGraph& graph, double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0) throw ConfigError("alpha must lie in (0,1]");
    const int n = graph.n_nodes();

    Eigen::MatrixXd m1 = Eigen::MatrixXd::Identity(n, n);
    const double walk = 1.0 - alpha;
    for (int i = 0; i < n; ++i) {
        const auto& nb = graph.neighbors(i);
        if (nb.empty()) {
            m1(i, i) -= walk;  // isolated node: self-loop keeps H row-stochastic
            continue;
        }
        const double w = walk / static_cast<double>(nb.size());
        for (int j : nb) m1(i, j) -= w;
    }

    PprModel model;
    model.alpha_ = alpha;
    model.n_ = n;
    model.degrees_ = graph.degrees();
    model.adj_.resize(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v) model.adj_[static_cast<size_t>(v)] = graph.neighbors(v);
    model.lu_.compute(m1);

    if (n > 0) {
        const double scale = m1.cwiseAbs().maxCoeff();
        const double min_pivot = model.lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
        if (!(min_pivot > 1e-12 * std::max(scale, 1.0)))
            throw NumericError("PPR system is numerically singular");

        // alpha * M1^-1 must be row-stochastic: M1 * 1 = alpha * 1.
        Eigen::VectorXd row_sums = alpha * model.lu_.solve(Eigen::VectorXd::Ones(n));
        if ((row_sums.array() - 1.0).abs().maxCoeff() > 1e-8)
            throw NumericError("PPR rows do not sum to 1");

        model.colsum_ = model.lu_.transpose().solve(Eigen::VectorXd::Ones(n));
    } else {
        model.colsum_ = Eigen::VectorXd();
    }
    return model;
}

double delta_ppr_directed(const PprModel& model, int u, int v, EdgeAction action,
                          DeltaFormula formula) {
    if (u == v) throw StateError("self-pair has no perturbation delta");
    if (model.degree(u) < 1.0) throw StateError("isolated node cannot be perturbed");
    return directed_delta(model.alpha(), model.degree(u), action, model.colsum()[u],
                          model.entry(v, u), model.entry(u, v), formula);
}

InfluenceScore delta_ppr_symmetric(const PprModel& model, int u, int v, DeltaFormula formula) {
    const EdgeAction action = model.has_edge(u, v) ? EdgeAction::Remove : EdgeAction::Add;
    const double entry_uv = model.entry(u, v);
    const double entry_vu = model.entry(v, u);
    const double forward = directed_delta(model.alpha(), model.degree(u), action,
                                          model.colsum()[u], entry_vu, entry_uv, formula);
    const double backward = directed_delta(model.alpha(), model.degree(v), action,
                                           model.colsum()[v], entry_uv, entry_vu, formula);
    InfluenceScore score;
    score.pair = {u, v};
    score.direction_parts = {forward, backward};
    score.delta = std::abs(forward + backward);
    return score;
}

bool pair_eligible(const AttributedGraph& graph, int u, int v) {
    if (u == v) return false;
    const int du = graph.degree(u);
    const int dv = graph.degree(v);
    if (du == 0 || dv == 0) return false;
    if (graph.has_edge(u, v) && (du <= 1 || dv <= 1)) return false;
    return true;
}

namespace {

// Symmetric delta from precomputed slices of M1^-1 anchored at v:
// row_v[u] = (M1^-1)_vu, col_v[u] = (M1^-1)_uv.
double anchored_delta(const PprModel& model, int v, int u, EdgeAction action,
                      const Eigen::VectorXd& row_v, const Eigen::VectorXd& col_v,
                      DeltaFormula formula) {
    const double forward = directed_delta(model.alpha(), model.degree(u), action,
                                          model.colsum()[u], row_v[u], col_v[u], formula);
    const double backward = directed_delta(model.alpha(), model.degree(v), action,
                                           model.colsum()[v], col_v[u], row_v[u], formula);
    return std::abs(forward + backward);
}

}  // namespace

std::vector<ScoredPair> candidate_set(const PprModel& model, const AttributedGraph& graph,
                                      std::optional<int> anchor, double tau,
                                      DeltaFormula formula) {
    if (!std::isfinite(tau)) {
        if (!(tau > 0)) return {};  // -inf excludes everything; +inf keeps all
    }
    std::vector<ScoredPair> out;
    const int n = graph.n_nodes();

    if (anchor) {
        const int v = *anchor;
        if (v < 0 || v >= n) throw ConfigError("anchor node out of range");
        const Eigen::VectorXd row_v = model.row(v);
        const Eigen::VectorXd col_v = model.col(v);
        for (int u = 0; u < n; ++u) {
            if (!pair_eligible(graph, v, u)) continue;
            const EdgeAction action = graph.has_edge(v, u) ? EdgeAction::Remove : EdgeAction::Add;
            double delta;
            try {
                delta = anchored_delta(model, v, u, action, row_v, col_v, formula);
            } catch (const DegeneratePerturbation&) {
                continue;
            }
            if (delta < tau) out.push_back({v, u, action, delta});
        }
    } else {
        model.fundamental();  // force the cache for O(1) entries
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v) {
                if (!pair_eligible(graph, u, v)) continue;
                double delta;
                try {
                    delta = delta_ppr_symmetric(model, u, v, formula).delta;
                } catch (const DegeneratePerturbation&) {
                    continue;
                }
                if (delta < tau)
                    out.push_back(
                        {u, v, graph.has_edge(u, v) ? EdgeAction::Remove : EdgeAction::Add, delta});
            }
    }
    std::sort(out.begin(), out.end(), [](const ScoredPair& a, const ScoredPair& b) {
        if (a.delta != b.delta) return a.delta < b.delta;
        if (a.u != b.u) return a.u < b.u;
        return a.v < b.v;
    });
    return out;
}

double quantile_threshold(const PprModel& model, const AttributedGraph& graph, double q,
                          DeltaFormula formula) {
    if (!(q > 0.0) || !(q < 1.0)) throw ConfigError("quantile must lie in (0,1)");
    const int n = graph.n_nodes();
    std::vector<double> deltas;

    if (n <= 2000) {
        model.fundamental();
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v) {
                if (!pair_eligible(graph, u, v)) continue;
                try {
                    deltas.push_back(delta_ppr_symmetric(model, u, v, formula).delta);
                } catch (const DegeneratePerturbation&) {
                }
            }
    } else {
        model.fundamental();
        std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
        std::uniform_int_distribution<int> pick(0, n - 1);
        constexpr long kSamples = 1000000;
        deltas.reserve(kSamples);
        for (long s = 0; s < kSamples; ++s) {
            const int u = pick(rng);
            const int v = pick(rng);
            if (!pair_eligible(graph, u, v)) continue;
            try {
                deltas.push_back(delta_ppr_symmetric(model, u, v, formula).delta);
            } catch (const DegeneratePerturbation&) {
            }
        }
    }
    if (deltas.empty()) return 0.0;
    std::sort(deltas.begin(), deltas.end());
    const auto k = static_cast<size_t>(
        std::clamp<long>(static_cast<long>(std::ceil(q * static_cast<double>(deltas.size()))), 1,
                         static_cast<long>(deltas.size())));
    return deltas[k - 1];
}

void export_deltas_csv(const std::vector<ScoredPair>& pairs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "u,v,action,delta\n";
    out.precision(17);
    for (const auto& p : pairs) out << p.u << ',' << p.v << ',' << to_string(p.action) << ',' << p.delta << '\n';
}

}  // namespace netfense
