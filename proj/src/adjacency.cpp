#include "ecar/adjacency.hpp"

#include <algorithm>
#include <numeric>

namespace ecar {

int AdjacencyGraph::n_components() const {
    std::vector<Index> parent(n);
    std::iota(parent.begin(), parent.end(), Index{0});
    auto find = [&](Index a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (const auto& [i, j] : edges) parent[find(i)] = find(j);
    int c = 0;
    for (Index i = 0; i < n; ++i)
        if (find(i) == i) ++c;
    return c;
}

AdjacencyGraph build_lattice_adjacency(Index rows, Index cols) {
    require(rows >= 1 && cols >= 1, "lattice dimensions must be positive");
    AdjacencyGraph g;
    g.n = rows * cols;
    g.neighbor_counts.assign(g.n, 0);
    auto id = [cols](Index r, Index c) { return r * cols + c; };
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            if (c + 1 < cols) g.edges.emplace_back(id(r, c), id(r, c + 1));
            if (r + 1 < rows) g.edges.emplace_back(id(r, c), id(r + 1, c));
        }
    }
    for (const auto& [i, j] : g.edges) {
        ++g.neighbor_counts[i];
        ++g.neighbor_counts[j];
    }
    return g;
}

AdjacencyGraph build_adjacency_from_edges(Index n, const std::vector<std::pair<Index, Index>>& edge_list) {
    require(n >= 1, "graph needs at least one region");
    std::vector<std::pair<Index, Index>> cleaned;
    cleaned.reserve(edge_list.size());
    for (auto [i, j] : edge_list) {
        require(i >= 1 && i <= n && j >= 1 && j <= n, "edge index out of range");
        require(i != j, "self-edges are not allowed");
        if (i > j) std::swap(i, j);
        cleaned.emplace_back(i - 1, j - 1);  // to 0-based
    }
    std::sort(cleaned.begin(), cleaned.end());
    cleaned.erase(std::unique(cleaned.begin(), cleaned.end()), cleaned.end());
    AdjacencyGraph g;
    g.n = n;
    g.edges = std::move(cleaned);
    g.neighbor_counts.assign(n, 0);
    for (const auto& [i, j] : g.edges) {
        ++g.neighbor_counts[i];
        ++g.neighbor_counts[j];
    }
    return g;
}

Matrix neighborhood_matrix(const AdjacencyGraph& g) {
    Matrix r = Matrix::Zero(g.n, g.n);
    for (const auto& [i, j] : g.edges) {
        r(i, j) = -1.0;
        r(j, i) = -1.0;
        r(i, i) += 1.0;
        r(j, j) += 1.0;
    }
    return r;
}

}  // namespace ecar
