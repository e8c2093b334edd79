#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "graphsync/graphgen.hpp"
#include "graphsync/universe.hpp"

namespace graphsync {

struct EvalReport {
    double accuracy = 0.0;
    /// Solver objective over the reference objective.
    double objective_ratio = 0.0;
    std::size_t cycle_violation_count = 0;
    double wall_time = 0.0;
};

struct PairOptimum {
    DenseMatrix x;
    double objective = 0.0;
};

/// Exhaustive maximization of lambda tr(X^T A_i X A_j) + tr(X^T M) over all
/// injective matchings of min(n_i, n_j) nodes. Among (near-)equal optima the
/// lexicographically largest flattened X wins. Both sides must be <= 8.
PairOptimum brute_force_pair(const DenseMatrix& ai, const DenseMatrix& aj, const DenseMatrix& mij, double lambda);

struct MultiOptimum {
    AssignmentStack stack;
    double objective = 0.0;
};

/// Exhaustive search over per-graph injections into d universe slots,
/// maximizing the summed pair objective over ordered pairs i != j. Bounds:
/// m <= 3, n_i <= 4, d <= 6. Ties go to the lexicographically largest
/// flattened stack.
MultiOptimum brute_force_multi(std::span<const DenseMatrix> adjacency, const PairwiseSet& affinities,
                               double lambda, std::size_t d);

/// Fraction of ground-truth correspondences (ordered graph pairs i != j,
/// inlier nodes sharing a slot) reproduced by pred.
double matching_accuracy(const PairwiseSet& pred, const std::vector<SlotAssignment>& truth);
double matching_accuracy(const AssignmentStack& pred, const Instance& instance);

}  // namespace graphsync
