#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "graphsync/graphgen.hpp"
#include "graphsync/matcore.hpp"
#include "graphsync/random.hpp"
#include "graphsync/universe.hpp"

namespace graphsync {

/// Test-time affinity M_ij = f((V_i Wx)(V_j Wy)^T) where f is a scalar MLP
/// with one hidden ReLU layer applied entrywise:
/// f(x) = sum_k w2_k max(0, w1_k x + b1_k) + b2.
struct AffinityParams {
    DenseMatrix wx;
    DenseMatrix wy;
    std::vector<double> w1, b1, w2;
    double b2 = 0.0;

    std::size_t hidden() const noexcept { return w1.size(); }
    double mlp(double x) const;
    void validate(std::size_t h) const;

    /// Identity projections and an MLP that reproduces f(x) = x.
    static AffinityParams identity_like(std::size_t h);
    /// Identity projections and a random MLP with positive weights and zero
    /// output bias, so f is nondecreasing and nonnegative.
    static AffinityParams seeded(std::size_t h, std::size_t hidden, Rng& rng);
};

struct SolverParams {
    double lambda = 1.0;
    double gamma = 2.0;
    int max_iters = 30;
    SinkhornParams sinkhorn;
    double clamp_eps = 1e-7;
    /// Keep V_i as a running sum across iterations; false uses the fresh
    /// gradient each step.
    bool accumulate = true;
    /// Include j == i in the gradient sum.
    bool include_self = true;
    /// Per-block Frobenius change below which the iteration stops.
    double tol = 1e-5;

    void validate() const;
};

/// Stand-in for the adapted feature extractor: V_i <- V_i P.
struct Adapter {
    DenseMatrix p;

    static Adapter identity(std::size_t h) { return {DenseMatrix::identity(h)}; }
    void validate(std::size_t h) const;
};

DenseMatrix affinity(const DenseMatrix& vi, const DenseMatrix& vj, const AffinityParams& params);

/// M_ij for every ordered pair, including i == j.
PairwiseSet all_affinities(std::span<const DenseMatrix> features, const AffinityParams& params);

/// V_i = sum_j (lambda A_i U_i U_j^T A_j U_j + M_ij U_j).
DenseMatrix taylor_gradient(std::size_t i, const AssignmentStack& stack, std::span<const DenseMatrix> adjacency,
                            const PairwiseSet& affinities, const SolverParams& params);

struct SolveResult {
    AssignmentStack stack;
    int iterations = 0;
    bool converged = false;
};

/// Iterates U_i <- sinkhorn(V_i) from the universe-match initialization,
/// with all blocks updated from the same iterate.
SolveResult solve_multimatch(std::span<const DenseMatrix> features, std::span<const DenseMatrix> adjacency,
                             const UniverseEmbedding& universe, const AffinityParams& aff,
                             const SolverParams& params);
SolveResult solve_multimatch(std::span<const Graph> graphs, const UniverseEmbedding& universe,
                             const AffinityParams& aff, const SolverParams& params);

/// Focal cross-entropy between sinkhorn(M_ij) and clamped U_i U_j^T over
/// ordered pairs i != j.
double matching_loss(const AssignmentStack& stack, const PairwiseSet& affinities, const SolverParams& params);

struct AdaptResult {
    Adapter adapter;
    /// Loss before each step plus the loss after the last one (steps + 1).
    std::vector<double> loss_trace;
};

/// Gradient descent on the adapter; the gradient is a central finite
/// difference through the whole solve + loss pipeline. Adjacencies stay
/// fixed, only features are adapted.
AdaptResult adapt(const Instance& instance, const UniverseEmbedding& universe, Adapter adapter,
                  const AffinityParams& aff, const SolverParams& params, double lr, int steps);

/// Loss of the full pipeline for one adapter; what adapt differentiates.
double adapted_loss(const Instance& instance, const UniverseEmbedding& universe, const Adapter& adapter,
                    const AffinityParams& aff, const SolverParams& params);

/// lambda tr(X^T A_i X A_j) + tr(X^T M_ij).
double pair_kbqap_objective(const DenseMatrix& x, const DenseMatrix& ai, const DenseMatrix& aj,
                            const DenseMatrix& mij, double lambda);

/// Sum of pair objectives of X_ij = U_i U_j^T over ordered pairs i != j.
double multi_kbqap_objective(const AssignmentStack& stack, std::span<const DenseMatrix> adjacency,
                             const PairwiseSet& affinities, double lambda);

}  // namespace graphsync
