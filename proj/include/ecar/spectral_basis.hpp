#pragma once

#include "ecar/adjacency.hpp"
#include "ecar/types.hpp"

namespace ecar {

// Eigendecomposition R = Gamma W Gamma^T of the neighborhood matrix: the graph
// Fourier basis. Eigenvalues ascending; each eigenvector's sign fixed so its
// largest-magnitude entry (lowest index on ties) is positive.
struct SpectralBasis {
    Matrix gamma;      // n x n orthonormal
    Vector omega;      // eigenvalues, ascending
    Vector col_sums;   // M_k = sum of column k of Gamma

    Index n() const { return omega.size(); }
};

SpectralBasis spectral_decompose(const Matrix& R);

// Convenience: R from the graph, then decompose. Rejects disconnected graphs
// (multiple zero eigenvalues make beta0 M_k ill-defined).
SpectralBasis spectral_basis_of(const AdjacencyGraph& g);

// Gamma^T v
Vector graph_fourier(const SpectralBasis& basis, const Vector& v);

// Gamma v
Vector graph_fourier_inverse(const SpectralBasis& basis, const Vector& v);

}  // namespace ecar
