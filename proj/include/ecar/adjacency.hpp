#pragma once

#include <utility>
#include <vector>

#include "ecar/types.hpp"

namespace ecar {

// Areal adjacency: symmetric edge set over n regions, no self-edges.
struct AdjacencyGraph {
    Index n = 0;
    std::vector<std::pair<Index, Index>> edges;  // i < j, deduplicated
    std::vector<Index> neighbor_counts;          // degree m_i

    Index n_edges() const { return static_cast<Index>(edges.size()); }
    int n_components() const;
};

// Rook adjacency on a rows x cols grid, row-major region order.
AdjacencyGraph build_lattice_adjacency(Index rows, Index cols);

// 1-based index pairs; symmetric duplicates and repeated pairs collapse to one
// edge. Out-of-range indices and self-edges are invalid.
AdjacencyGraph build_adjacency_from_edges(Index n, const std::vector<std::pair<Index, Index>>& edge_list);

// Neighborhood matrix R: diagonal m_i, off-diagonal -a_ij. Symmetric PSD with
// zero row sums; one zero eigenvalue per connected component.
Matrix neighborhood_matrix(const AdjacencyGraph& g);

}  // namespace ecar
