#pragma once

#include <cstddef>
#include <vector>

#include "graphsync/dense_matrix.hpp"
#include "graphsync/error.hpp"

namespace graphsync {

// ---------------------------------------------------------------------------
// Dense kernels. These run OpenMP-parallel over output rows once the work is
// large enough to amortize a parallel region; every output entry is produced
// by exactly one thread in a fixed summation order, so results do not depend
// on the thread count. Serial twins live in graphsync::reference.
// ---------------------------------------------------------------------------

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// a^T b without materializing the transpose.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a b^T without materializing the transpose.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scaled(const DenseMatrix& a, double factor);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);
/// a += factor * b
void axpy(DenseMatrix& a, double factor, const DenseMatrix& b);

double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b);
double frobenius_norm(const DenseMatrix& a);
double trace(const DenseMatrix& a);

std::vector<double> row_sums(const DenseMatrix& a);
std::vector<double> col_sums(const DenseMatrix& a);

void require_finite(const DenseMatrix& a, const char* what);

// ---------------------------------------------------------------------------
// Sinkhorn projection
// ---------------------------------------------------------------------------

struct SinkhornParams {
    double tau = 0.05;
    int max_iters = 20;
    double tol = 1e-6;
    /// Switch from plain sweeps to Newton steps on the dual once a sweep
    /// shrinks the residual by less than stall_ratio. Sweeps alone contract
    /// at a rate near 1 when the plan is close to a permutation.
    bool newton = true;
    double stall_ratio = 0.5;
    /// Start the column potentials from the assignment LP duals scaled by
    /// 1/tau. Same fixed point; for sharply peaked scores the start is
    /// already close to it, where cold sweeps would need ~range/tau steps.
    bool warm_start = true;

    void validate() const;
};

struct SinkhornResult {
    DenseMatrix assignment;
    int iterations = 0;
    /// Max |marginal - target| over rows and columns of the (augmented)
    /// square problem at the returned iterate.
    double deviation = 0.0;
    bool converged = false;
    /// Deviation of the starting iterate followed by the deviation after each
    /// completed iteration; only filled on request.
    std::vector<double> trace;
};

/// Entropic projection of exp(scores / tau) onto the doubly-stochastic set
/// (n == k) or onto {rows sum to 1, columns sum to at most 1} (n < k).
/// Runs in the log domain; the rectangular case pads k - n uniform slack rows,
/// solves the square problem and strips them again. Not converging within
/// max_iters is reported through the result, not thrown.
SinkhornResult sinkhorn_solve(const DenseMatrix& scores, const SinkhornParams& params,
                              bool keep_trace = false);

inline DenseMatrix sinkhorn(const DenseMatrix& scores, const SinkhornParams& params) {
    return sinkhorn_solve(scores, params).assignment;
}

// ---------------------------------------------------------------------------
// Linear assignment and rounding
// ---------------------------------------------------------------------------

/// Maximum-weight assignment of every row of an n×k weight matrix (n ≤ k)
/// to a distinct column. Returns the chosen column per row.
std::vector<std::size_t> max_weight_assignment(const DenseMatrix& weights);

/// Assignment plus LP dual potentials: weights_ab + row_potential_a +
/// col_potential_b <= 0 everywhere, with equality on the chosen pairs.
struct AssignmentSolution {
    std::vector<std::size_t> choice;
    std::vector<double> row_potential;
    std::vector<double> col_potential;
};
AssignmentSolution solve_assignment(const DenseMatrix& weights);

/// Rounds a relaxed assignment to the binary partial permutation maximizing
/// sum(S .* X). When n ≤ k every row is assigned; otherwise every column is.
DenseMatrix discretize(const DenseMatrix& relaxed);

/// Membership in the partial permutation set: binary, row and column sums ≤ 1.
bool is_partial_permutation(const DenseMatrix& x);
/// Membership in the universe matching set: binary, row sums == 1,
/// column sums ≤ 1.
bool is_universe_matching(const DenseMatrix& x);

// ---------------------------------------------------------------------------
// Serial reference kernels, kept for equivalence tests and benchmarks.
// ---------------------------------------------------------------------------
namespace reference {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
SinkhornResult sinkhorn_solve(const DenseMatrix& scores, const SinkhornParams& params);

}  // namespace reference

}  // namespace graphsync
