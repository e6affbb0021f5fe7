#include "netfense/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace netfense {

namespace {

bool is_binary(double x) { return x == 0.0 || x == 1.0; }

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

int parse_int(const std::string& s, const std::string& file, long line) {
    try {
        size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(file, line, "expected integer, got '" + s + "'");
    }
}

}  // namespace

AttributedGraph::AttributedGraph(int n_nodes, const std::vector<std::pair<int, int>>& edges,
                                 Eigen::MatrixXd features)
    : n_nodes_(n_nodes), adj_(static_cast<size_t>(n_nodes)) {
    if (features.rows() != n_nodes)
        throw ShapeError("feature row count " + std::to_string(features.rows()) +
                         " != node count " + std::to_string(n_nodes));
    for (Eigen::Index i = 0; i < features.rows(); ++i)
        for (Eigen::Index j = 0; j < features.cols(); ++j)
            if (!is_binary(features(i, j)))
                throw DataError("feature matrix entry (" + std::to_string(i) + "," +
                                std::to_string(j) + ") is not 0/1");
    for (const auto& [u, v] : edges) {
        if (u < 0 || u >= n_nodes || v < 0 || v >= n_nodes)
            throw DataError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                            ") references an invalid node index");
        if (u == v)
            throw DataError("self-loop at node " + std::to_string(u));
        adj_[static_cast<size_t>(u)].push_back(v);
        adj_[static_cast<size_t>(v)].push_back(u);
    }
    for (int v = 0; v < n_nodes; ++v) {
        auto& nb = adj_[static_cast<size_t>(v)];
        std::sort(nb.begin(), nb.end());
        if (std::adjacent_find(nb.begin(), nb.end()) != nb.end())
            throw DataError("duplicate edge incident to node " + std::to_string(v));
        n_edges_ += nb.size();
    }
    n_edges_ /= 2;
    features_ = std::make_shared<Eigen::MatrixXd>(std::move(features));
}

bool AttributedGraph::has_edge(int u, int v) const {
    const auto& nb = adj_[static_cast<size_t>(u)];
    return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<std::pair<int, int>> AttributedGraph::edge_list() const {
    std::vector<std::pair<int, int>> edges;
    edges.reserve(static_cast<size_t>(n_edges_));
    for (int u = 0; u < n_nodes_; ++u)
        for (int v : adj_[static_cast<size_t>(u)])
            if (u < v) edges.emplace_back(u, v);
    return edges;
}

Eigen::SparseMatrix<double> AttributedGraph::adjacency() const {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(2 * n_edges_));
    for (int u = 0; u < n_nodes_; ++u)
        for (int v : adj_[static_cast<size_t>(u)]) trips.emplace_back(u, v, 1.0);
    Eigen::SparseMatrix<double> a(n_nodes_, n_nodes_);
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

Eigen::VectorXd AttributedGraph::degrees() const {
    Eigen::VectorXd d(n_nodes_);
    for (int v = 0; v < n_nodes_; ++v) d[v] = static_cast<double>(degree(v));
    return d;
}

void AttributedGraph::check_flip(const EdgeFlip& flip) const {
    if (flip.u < 0 || flip.u >= n_nodes_ || flip.v < 0 || flip.v >= n_nodes_)
        throw StateError("flip endpoint out of range");
    if (flip.u == flip.v) throw StateError("flip endpoints must differ");
    const bool present = has_edge(flip.u, flip.v);
    if (flip.action == EdgeAction::Add && present)
        throw StateError("cannot add existing edge (" + std::to_string(flip.u) + "," +
                         std::to_string(flip.v) + ")");
    if (flip.action == EdgeAction::Remove && !present)
        throw StateError("cannot remove absent edge (" + std::to_string(flip.u) + "," +
                         std::to_string(flip.v) + ")");
}

AttributedGraph AttributedGraph::apply_flip(const EdgeFlip& flip) const {
    check_flip(flip);
    AttributedGraph out = *this;
    auto& nu = out.adj_[static_cast<size_t>(flip.u)];
    auto& nv = out.adj_[static_cast<size_t>(flip.v)];
    if (flip.action == EdgeAction::Add) {
        nu.insert(std::lower_bound(nu.begin(), nu.end(), flip.v), flip.v);
        nv.insert(std::lower_bound(nv.begin(), nv.end(), flip.u), flip.u);
        out.n_edges_ += 1;
    } else {
        nu.erase(std::lower_bound(nu.begin(), nu.end(), flip.v));
        nv.erase(std::lower_bound(nv.begin(), nv.end(), flip.u));
        out.n_edges_ -= 1;
    }
    out.n_perturbations_ += 1;
    return out;
}

AttributedGraph AttributedGraph::with_features(Eigen::MatrixXd features) const {
    if (features.rows() != n_nodes_)
        throw ShapeError("feature row count mismatch in with_features");
    AttributedGraph out = *this;
    out.features_ = std::make_shared<Eigen::MatrixXd>(std::move(features));
    return out;
}

void LabelSet::validate(int n_nodes) const {
    if (target.size() != n_nodes || priv.size() != n_nodes)
        throw ShapeError("label vectors must cover every node");
    for (int v = 0; v < n_nodes; ++v) {
        if (priv[v] != -1 && priv[v] != 0 && priv[v] != 1)
            throw DataError("private label of node " + std::to_string(v) + " is not binary");
        if (target[v] < -1) throw DataError("negative target label at node " + std::to_string(v));
    }
}

// --- ingestion -------------------------------------------------------------

namespace {

Eigen::MatrixXd read_feature_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open feature file " + path);
    std::vector<std::pair<int, std::vector<double>>> rows;
    std::string line;
    long lineno = 0;
    size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv_line(line);
        if (fields.size() < 2) throw ParseError(path, lineno, "expected node_id,values...");
        int id = parse_int(fields[0], path, lineno);
        std::vector<double> vals;
        vals.reserve(fields.size() - 1);
        for (size_t i = 1; i < fields.size(); ++i) {
            if (fields[i] != "0" && fields[i] != "1")
                throw ParseError(path, lineno, "feature values must be 0 or 1, got '" + fields[i] + "'");
            vals.push_back(fields[i] == "1" ? 1.0 : 0.0);
        }
        if (width == 0) width = vals.size();
        if (vals.size() != width)
            throw ShapeError(path + ":" + std::to_string(lineno) + ": row has " +
                             std::to_string(vals.size()) + " features, expected " +
                             std::to_string(width));
        rows.emplace_back(id, std::move(vals));
    }
    const int n = static_cast<int>(rows.size());
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(width));
    std::vector<bool> seen(static_cast<size_t>(n), false);
    for (auto& [id, vals] : rows) {
        if (id < 0 || id >= n)
            throw DataError(path + ": node_id " + std::to_string(id) +
                            " outside 0.." + std::to_string(n - 1));
        if (seen[static_cast<size_t>(id)])
            throw DataError(path + ": duplicate node_id " + std::to_string(id));
        seen[static_cast<size_t>(id)] = true;
        for (size_t j = 0; j < vals.size(); ++j) x(id, static_cast<Eigen::Index>(j)) = vals[j];
    }
    return x;
}

int parse_label_field(const std::string& s, const std::string& path, long lineno) {
    if (s.empty() || s == "?") return -1;
    return parse_int(s, path, lineno);
}

LabelSet read_label_csv(const std::string& path, int n_nodes) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open label file " + path);
    LabelSet labels;
    labels.target = Eigen::VectorXi::Constant(n_nodes, -1);
    labels.priv = Eigen::VectorXi::Constant(n_nodes, -1);
    std::string line;
    long lineno = 0;
    long rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv_line(line);
        if (fields.size() < 2 || fields.size() > 3)
            throw ParseError(path, lineno, "expected node_id,target[,private]");
        int id = parse_int(fields[0], path, lineno);
        if (id < 0 || id >= n_nodes)
            throw DataError(path + ":" + std::to_string(lineno) + ": node_id " +
                            std::to_string(id) + " out of range");
        labels.target[id] = parse_label_field(fields[1], path, lineno);
        if (fields.size() == 3) labels.priv[id] = parse_label_field(fields[2], path, lineno);
        ++rows;
    }
    if (rows != n_nodes)
        throw ShapeError(path + ": " + std::to_string(rows) + " label rows for " +
                         std::to_string(n_nodes) + " nodes");
    return labels;
}

}  // namespace

Dataset load_graph(const std::string& edge_file, const std::string& feature_file,
                   const std::string& label_file) {
    Eigen::MatrixXd x = read_feature_csv(feature_file);
    const int n = static_cast<int>(x.rows());

    std::ifstream in(edge_file);
    if (!in) throw IoError("cannot open edge file " + edge_file);
    std::vector<std::pair<int, int>> edges;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        long u, v;
        if (!(ss >> u >> v)) throw ParseError(edge_file, lineno, "expected two node indices");
        std::string rest;
        if (ss >> rest) throw ParseError(edge_file, lineno, "trailing content '" + rest + "'");
        if (u < 0 || u >= n || v < 0 || v >= n)
            throw DataError(edge_file + ":" + std::to_string(lineno) + ": edge endpoint out of range");
        if (u == v) throw DataError(edge_file + ":" + std::to_string(lineno) + ": self-loop");
        edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
    }
    // Reject duplicates, including the mirrored form of a stored edge.
    auto canon = edges;
    for (auto& e : canon)
        if (e.first > e.second) std::swap(e.first, e.second);
    std::sort(canon.begin(), canon.end());
    if (std::adjacent_find(canon.begin(), canon.end()) != canon.end())
        throw DataError(edge_file + ": duplicate undirected edge");

    Dataset data;
    data.name = edge_file;
    data.graph = AttributedGraph(n, edges, std::move(x));
    data.labels = read_label_csv(label_file, n);
    data.labels.validate(n);
    return data;
}

void save_graph(const Dataset& data, const std::string& edge_file,
                const std::string& feature_file, const std::string& label_file) {
    std::ofstream ef(edge_file);
    if (!ef) throw IoError("cannot write " + edge_file);
    for (const auto& [u, v] : data.graph.edge_list()) ef << u << ' ' << v << '\n';

    std::ofstream ff(feature_file);
    if (!ff) throw IoError("cannot write " + feature_file);
    const auto& x = data.graph.features();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        ff << i;
        for (Eigen::Index j = 0; j < x.cols(); ++j) ff << ',' << (x(i, j) == 1.0 ? 1 : 0);
        ff << '\n';
    }

    std::ofstream lf(label_file);
    if (!lf) throw IoError("cannot write " + label_file);
    for (int v = 0; v < data.graph.n_nodes(); ++v) {
        lf << v << ',';
        if (data.labels.target[v] >= 0) lf << data.labels.target[v];
        lf << ',';
        if (data.labels.priv[v] >= 0) lf << data.labels.priv[v];
        lf << '\n';
    }
}

DataSplit make_split(const AttributedGraph& graph, const SplitRatios& ratios, std::uint64_t seed) {
    const double sum = ratios.train + ratios.validation + ratios.test;
    if (ratios.train <= 0 || ratios.validation <= 0 || ratios.test <= 0)
        throw ConfigError("split ratios must be positive");
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("split ratios sum to " + std::to_string(sum) + ", expected 1");

    const int n = graph.n_nodes();
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const auto n_train = static_cast<size_t>(std::floor(ratios.train * n));
    const auto n_val = static_cast<size_t>(std::floor(ratios.validation * n));
    DataSplit split;
    split.seed = seed;
    split.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
    split.validation.assign(order.begin() + static_cast<long>(n_train),
                            order.begin() + static_cast<long>(n_train + n_val));
    split.test.assign(order.begin() + static_cast<long>(n_train + n_val), order.end());
    return split;
}

double avg_clustering_coefficient(const AttributedGraph& graph) {
    const int n = graph.n_nodes();
    if (n == 0) return 0.0;
    double total = 0.0;
    for (int v = 0; v < n; ++v) {
        const auto& nb = graph.neighbors(v);
        const auto d = nb.size();
        if (d < 2) continue;
        long closed = 0;
        for (size_t i = 0; i < d; ++i)
            for (size_t j = i + 1; j < d; ++j)
                if (graph.has_edge(nb[i], nb[j])) ++closed;
        total += 2.0 * static_cast<double>(closed) / (static_cast<double>(d) * static_cast<double>(d - 1));
    }
    return total / n;
}

Dataset generate_sbm(const std::vector<int>& block_sizes, double intra_p, double inter_p,
                     const FeatureModel& fm, std::uint64_t seed) {
    if (intra_p < 0 || intra_p > 1 || inter_p < 0 || inter_p > 1)
        throw ConfigError("SBM probabilities must lie in [0,1]");
    const int n = std::accumulate(block_sizes.begin(), block_sizes.end(), 0);
    const int n_blocks = static_cast<int>(block_sizes.size());
    std::vector<int> block(static_cast<size_t>(n));
    {
        int v = 0;
        for (int b = 0; b < n_blocks; ++b)
            for (int i = 0; i < block_sizes[static_cast<size_t>(b)]; ++i) block[static_cast<size_t>(v++)] = b;
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) {
            const double p = block[static_cast<size_t>(u)] == block[static_cast<size_t>(v)] ? intra_p : inter_p;
            if (unif(rng) < p) edges.emplace_back(u, v);
        }

    LabelSet labels;
    labels.target = Eigen::VectorXi(n);
    labels.priv = Eigen::VectorXi(n);
    for (int v = 0; v < n; ++v) {
        labels.target[v] = block[static_cast<size_t>(v)];
        labels.priv[v] = unif(rng) < 0.5 ? 0 : 1;
    }

    const int d = fm.target_cols + fm.private_cols + fm.noise_cols;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, d);
    for (int v = 0; v < n; ++v) {
        for (int c = 0; c < fm.target_cols; ++c) {
            const int owner = n_blocks > 0 ? c % n_blocks : 0;
            const double p = owner == block[static_cast<size_t>(v)] ? fm.p_active : fm.p_inactive;
            x(v, c) = unif(rng) < p ? 1.0 : 0.0;
        }
        for (int c = 0; c < fm.private_cols; ++c) {
            const int owner = c % 2;
            const double p = owner == labels.priv[v] ? fm.p_active : fm.p_inactive;
            x(v, fm.target_cols + c) = unif(rng) < p ? 1.0 : 0.0;
        }
        for (int c = 0; c < fm.noise_cols; ++c)
            x(v, fm.target_cols + fm.private_cols + c) = unif(rng) < fm.p_noise ? 1.0 : 0.0;
    }

    Dataset data;
    data.name = "sbm";
    data.graph = AttributedGraph(n, edges, std::move(x));
    data.labels = std::move(labels);
    return data;
}

}  // namespace netfense
