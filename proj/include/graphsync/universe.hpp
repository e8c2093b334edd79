#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "graphsync/graphgen.hpp"
#include "graphsync/matcore.hpp"
#include "graphsync/random.hpp"

namespace graphsync {

/// Learnable d×h universe embedding; its inner products with node features
/// score node-to-universe matchings.
struct UniverseEmbedding {
    DenseMatrix weights;

    std::size_t d() const noexcept { return weights.rows(); }
    std::size_t h() const noexcept { return weights.cols(); }
};

enum class AssignmentMode { relaxed, binary };

/// Per-graph universe matchings U_i (n_i×d), stacked in graph order.
struct AssignmentStack {
    std::vector<DenseMatrix> blocks;
    AssignmentMode mode = AssignmentMode::relaxed;

    std::size_t universe_size() const;
    std::size_t total_nodes() const;
    /// Row offset of each block inside the stacked n×d matrix.
    std::vector<std::size_t> offsets() const;
    DenseMatrix stacked() const;

    /// relaxed: rows sum to 1 ± tol, columns ≤ 1 + tol, entries in [0,1];
    /// binary: every block is a universe matching.
    bool satisfies_invariants(double tol = 1e-6) const;
};

/// Ordered-pair table of matrices indexed (i, j) over m graphs; entries may
/// be absent.
class PairwiseSet {
public:
    PairwiseSet() = default;
    explicit PairwiseSet(std::size_t m) : m_(m), entries_(m * m) {}

    std::size_t graphs() const noexcept { return m_; }
    bool has(std::size_t i, std::size_t j) const { return entries_[i * m_ + j].has_value(); }
    /// Throws incomplete-set when (i, j) is absent.
    const DenseMatrix& at(std::size_t i, std::size_t j) const;
    void set(std::size_t i, std::size_t j, DenseMatrix x) { entries_[i * m_ + j] = std::move(x); }

private:
    std::size_t m_ = 0;
    std::vector<std::optional<DenseMatrix>> entries_;
};

UniverseEmbedding init_universe(std::size_t d, std::size_t h, Rng& rng);

/// d = round(100 (classes + 1) / step).
std::size_t universe_size(std::size_t classes, std::size_t step);

/// sinkhorn(V_i U^T); n_i must not exceed d.
DenseMatrix universe_match(const DenseMatrix& features, const UniverseEmbedding& universe,
                           const SinkhornParams& params);

/// Ã = W^T A W with A = diag(A_1..A_m) and W_ij = Y_i Y_j^T over one-hot
/// labels, so W marks same-class node pairs across all graphs.
DenseMatrix class_coupling(std::span<const Graph> graphs, std::size_t classes);

struct HippiParams {
    double theta = 1e-5;
    int max_iters = 100;
    SinkhornParams sinkhorn;
};

struct HippiResult {
    AssignmentStack stack;
    int iterations = 0;
    bool converged = false;
    /// Largest per-block Frobenius change in the last iteration.
    double last_change = 0.0;
    /// Set when the coupling matrix is not symmetric; iteration still runs.
    bool asymmetric_coupling = false;
    /// Stopped early on a period-2 cycle (never converges); not converged.
    bool oscillating = false;
};

/// Higher-order projected power iteration: V = Ã U U^T Ã U, then each
/// graph's block of V is projected with Sinkhorn, until every block moves
/// less than theta.
HippiResult hippi(const DenseMatrix& coupling, const AssignmentStack& init, const HippiParams& params);

/// Σ_{i,j} <U_i^T A_i U_i, U_j^T A_j U_j>.
double multimatch_objective(const AssignmentStack& stack, std::span<const DenseMatrix> adjacency);
/// tr(U^T A U U^T A U) on the stacked / block-diagonal forms. Agrees with
/// multimatch_objective whenever every A_i is symmetric.
double multimatch_objective_stacked(const AssignmentStack& stack, std::span<const DenseMatrix> adjacency);

struct EmbedLoss {
    double loss = 0.0;
    DenseMatrix grad;
};

/// Σ_i ||U*_i - V_i U^T||_F^2 + alpha ||U||_F^2 and its gradient in U.
EmbedLoss embed_loss_grad(const UniverseEmbedding& universe, const AssignmentStack& targets,
                          std::span<const DenseMatrix> features, double alpha);

struct FitConfig {
    std::size_t d = 120;
    std::size_t classes = 2;
    double alpha = 1e-3;
    double lr = 1e-3;
    int steps = 200;
    HippiParams hippi;
};

struct FitResult {
    UniverseEmbedding universe;
    /// Embedding loss at the start of each step plus one final entry at the
    /// returned embedding (steps + 1 values).
    std::vector<double> loss_trace;
};

/// Source-phase fitting: universe matchings -> class coupling -> HiPPI ->
/// rounded targets -> gradient step on the embedding, repeated `steps` times.
FitResult fit_embeddings(const Instance& instance, const FitConfig& config, Rng& rng);
/// Same loop from a given starting embedding.
FitResult fit_embeddings_from(const Instance& instance, UniverseEmbedding start, const FitConfig& config);

/// X_ij = U_i U_j^T for every ordered pair including i == j.
PairwiseSet expand_matchings(const AssignmentStack& stack);

/// Entries where (X_ik X_kj)_ab > (X_ij)_ab over all triples of distinct
/// graphs; zero means cycle-consistent.
std::size_t cycle_violations(const PairwiseSet& matchings);

/// Rounds every block of a relaxed stack.
AssignmentStack discretize(const AssignmentStack& stack);

}  // namespace graphsync
