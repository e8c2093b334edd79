#include "graphsync/universe.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "graphsync/error.hpp"

namespace graphsync {

std::size_t AssignmentStack::universe_size() const { return blocks.empty() ? 0 : blocks.front().cols(); }

std::size_t AssignmentStack::total_nodes() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.rows();
    return n;
}

std::vector<std::size_t> AssignmentStack::offsets() const {
    std::vector<std::size_t> out;
    std::size_t at = 0;
    for (const auto& b : blocks) {
        out.push_back(at);
        at += b.rows();
    }
    return out;
}

DenseMatrix AssignmentStack::stacked() const {
    const std::size_t d = universe_size();
    DenseMatrix out(total_nodes(), d);
    std::size_t r0 = 0;
    for (const auto& b : blocks) {
        require(b.cols() == d, ErrorKind::dimension, "blocks disagree on universe size");
        for (std::size_t r = 0; r < b.rows(); ++r) std::copy(b.row(r).begin(), b.row(r).end(), out.row(r0 + r).begin());
        r0 += b.rows();
    }
    return out;
}

bool AssignmentStack::satisfies_invariants(double tol) const {
    const std::size_t d = universe_size();
    for (const auto& b : blocks) {
        if (b.cols() != d) return false;
        if (mode == AssignmentMode::binary) {
            if (!is_universe_matching(b)) return false;
            continue;
        }
        for (double v : b.values())
            if (!(v >= 0.0 && v <= 1.0 + tol)) return false;
        for (double s : row_sums(b))
            if (std::abs(s - 1.0) > tol) return false;
        for (double s : col_sums(b))
            if (s > 1.0 + tol) return false;
    }
    return true;
}

const DenseMatrix& PairwiseSet::at(std::size_t i, std::size_t j) const {
    const auto& e = entries_[i * m_ + j];
    if (!e) fail(ErrorKind::incomplete_set, "missing pair (" + std::to_string(i) + "," + std::to_string(j) + ")");
    return *e;
}

UniverseEmbedding init_universe(std::size_t d, std::size_t h, Rng& rng) {
    require(d >= 1 && h >= 1, ErrorKind::parameter, "universe needs d >= 1 and h >= 1");
    std::normal_distribution<double> z(0.0, 1.0);
    UniverseEmbedding u{DenseMatrix(d, h)};
    const double base = 1.0 / static_cast<double>(d);
    for (double& v : u.weights.values()) v = base + 1e-3 * z(rng);
    return u;
}

std::size_t universe_size(std::size_t classes, std::size_t step) {
    require(step >= 1, ErrorKind::parameter, "sampling step must be >= 1");
    return static_cast<std::size_t>(std::llround(100.0 * static_cast<double>(classes + 1) / static_cast<double>(step)));
}

DenseMatrix universe_match(const DenseMatrix& features, const UniverseEmbedding& universe,
                           const SinkhornParams& params) {
    if (!(features.cols() == universe.h())) fail(ErrorKind::dimension,
            "feature width " + std::to_string(features.cols()) + " vs universe width " + std::to_string(universe.h()));
    if (!(features.rows() <= universe.d())) fail(ErrorKind::dimension,
            "graph with " + std::to_string(features.rows()) + " nodes exceeds universe size " +
                std::to_string(universe.d()));
    return sinkhorn(matmul_nt(features, universe.weights), params);
}

DenseMatrix class_coupling(std::span<const Graph> graphs, std::size_t classes) {
    std::size_t n = 0;
    for (const auto& g : graphs) n += g.size();

    std::vector<int> labels;
    labels.reserve(n);
    DenseMatrix block_adj(n, n);
    std::size_t at = 0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const Graph& g = graphs[gi];
        if (!(g.adjacency.rows() == g.size() && g.adjacency.cols() == g.size())) fail(ErrorKind::dimension,
                "adjacency of graph " + std::to_string(gi) + " is " + shape_string(g.adjacency));
        if (!(g.labels.size() == g.size())) fail(ErrorKind::dimension, "labels of graph " + std::to_string(gi));
        for (std::size_t a = 0; a < g.size(); ++a) {
            const int y = g.labels[a];
            if (!(y >= 1 && static_cast<std::size_t>(y) <= classes)) fail(ErrorKind::label,
                    "label " + std::to_string(y) + " outside [1," + std::to_string(classes) + "] in graph " +
                        std::to_string(gi));
            labels.push_back(y);
            for (std::size_t b = 0; b < g.size(); ++b) block_adj(at + a, at + b) = g.adjacency(a, b);
        }
        at += g.size();
    }

    // W_ij = Y_i Y_j^T with one-hot Y: 1 exactly for same-class pairs.
    DenseMatrix same_class(n, n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) same_class(a, b) = labels[a] == labels[b] ? 1.0 : 0.0;

    return matmul(matmul_tn(same_class, block_adj), same_class);
}

namespace {

bool is_symmetric(const DenseMatrix& a) {
    double scale = 0.0, gap = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) {
            scale = std::max(scale, std::abs(a(r, c)));
            gap = std::max(gap, std::abs(a(r, c) - a(c, r)));
        }
    return gap <= 1e-12 * std::max(scale, 1.0);
}

DenseMatrix slice_rows(const DenseMatrix& m, std::size_t r0, std::size_t count) {
    DenseMatrix out(count, m.cols());
    for (std::size_t r = 0; r < count; ++r) std::copy(m.row(r0 + r).begin(), m.row(r0 + r).end(), out.row(r).begin());
    return out;
}

}  // namespace

HippiResult hippi(const DenseMatrix& coupling, const AssignmentStack& init, const HippiParams& params) {
    require(params.theta > 0.0, ErrorKind::parameter, "hippi theta must be > 0");
    require(params.max_iters >= 0, ErrorKind::parameter, "hippi max_iters must be >= 0");
    const std::size_t n = init.total_nodes();
    if (!(coupling.rows() == n && coupling.cols() == n)) fail(ErrorKind::dimension,
            "coupling " + shape_string(coupling) + " does not match " + std::to_string(n) + " stacked nodes");
    require_finite(coupling, "coupling");

    HippiResult result;
    result.asymmetric_coupling = !is_symmetric(coupling);
    result.stack = init;
    result.stack.mode = AssignmentMode::relaxed;
    const auto offsets = init.offsets();
    std::vector<DenseMatrix> before_previous;

    for (int it = 1; it <= params.max_iters; ++it) {
        const DenseMatrix u = result.stack.stacked();
        const DenseMatrix au = matmul(coupling, u);
        const DenseMatrix power = matmul(au, matmul_tn(u, au));
        if (!power.all_finite())
            fail(ErrorKind::numeric, "hippi iterate became non-finite at iteration " + std::to_string(it));

        double change = 0.0, two_step = 0.0;
        std::vector<DenseMatrix> previous = result.stack.blocks;
        for (std::size_t b = 0; b < init.blocks.size(); ++b) {
            DenseMatrix next = sinkhorn(slice_rows(power, offsets[b], init.blocks[b].rows()), params.sinkhorn);
            change = std::max(change, frobenius_norm(subtract(next, result.stack.blocks[b])));
            if (!before_previous.empty())
                two_step = std::max(two_step, frobenius_norm(subtract(next, before_previous[b])));
            result.stack.blocks[b] = std::move(next);
        }
        result.iterations = it;
        result.last_change = change;
        if (change < params.theta) {
            result.converged = true;
            break;
        }
        // The update is deterministic, so returning to the iterate of two
        // steps ago means the sequence alternates from here on.
        if (!before_previous.empty() && two_step < params.theta) {
            result.oscillating = true;
            break;
        }
        before_previous = std::move(previous);
    }
    return result;
}

namespace {

void require_adjacency_shapes(const AssignmentStack& stack, std::span<const DenseMatrix> adjacency) {
    if (!(adjacency.size() == stack.blocks.size())) fail(ErrorKind::dimension,
            std::to_string(adjacency.size()) + " adjacencies for " + std::to_string(stack.blocks.size()) + " blocks");
    for (std::size_t i = 0; i < adjacency.size(); ++i) {
        const std::size_t ni = stack.blocks[i].rows();
        if (!(adjacency[i].rows() == ni && adjacency[i].cols() == ni)) fail(ErrorKind::dimension,
                "adjacency " + std::to_string(i) + " is " + shape_string(adjacency[i]) + ", block has " +
                    std::to_string(ni) + " rows");
    }
}

}  // namespace

double multimatch_objective(const AssignmentStack& stack, std::span<const DenseMatrix> adjacency) {
    require_adjacency_shapes(stack, adjacency);
    std::vector<DenseMatrix> reordered;
    for (std::size_t i = 0; i < adjacency.size(); ++i)
        reordered.push_back(matmul_tn(stack.blocks[i], matmul(adjacency[i], stack.blocks[i])));
    double total = 0.0;
    for (const auto& bi : reordered)
        for (const auto& bj : reordered) total += frobenius_inner(bi, bj);
    return total;
}

double multimatch_objective_stacked(const AssignmentStack& stack, std::span<const DenseMatrix> adjacency) {
    require_adjacency_shapes(stack, adjacency);
    const DenseMatrix u = stack.stacked();
    const std::size_t n = u.rows();
    DenseMatrix block_adj(n, n);
    std::size_t at = 0;
    for (const auto& a : adjacency) {
        for (std::size_t r = 0; r < a.rows(); ++r)
            for (std::size_t c = 0; c < a.cols(); ++c) block_adj(at + r, at + c) = a(r, c);
        at += a.rows();
    }
    const DenseMatrix inner = matmul_tn(u, matmul(block_adj, u));
    return trace(matmul(inner, inner));
}

EmbedLoss embed_loss_grad(const UniverseEmbedding& universe, const AssignmentStack& targets,
                          std::span<const DenseMatrix> features, double alpha) {
    require(alpha >= 0.0, ErrorKind::parameter, "alpha must be >= 0");
    if (!(targets.blocks.size() == features.size())) fail(ErrorKind::dimension,
            std::to_string(targets.blocks.size()) + " targets for " + std::to_string(features.size()) + " graphs");
    const DenseMatrix& u = universe.weights;

    EmbedLoss out{alpha * frobenius_inner(u, u), scaled(u, 2.0 * alpha)};
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (!(features[i].cols() == u.cols())) fail(ErrorKind::dimension,
                "features of graph " + std::to_string(i) + " have width " + std::to_string(features[i].cols()));
        if (!(targets.blocks[i].rows() == features[i].rows() && targets.blocks[i].cols() == u.rows()))
            fail(ErrorKind::dimension, "target block " + std::to_string(i) + " is " + shape_string(targets.blocks[i]));
        const DenseMatrix residual = subtract(targets.blocks[i], matmul_nt(features[i], u));
        out.loss += frobenius_inner(residual, residual);
        axpy(out.grad, -2.0, matmul_tn(residual, features[i]));
    }
    return out;
}

AssignmentStack discretize(const AssignmentStack& stack) {
    AssignmentStack out;
    out.mode = AssignmentMode::binary;
    for (const auto& b : stack.blocks) out.blocks.push_back(graphsync::discretize(b));
    return out;
}

namespace {

EmbedLoss fit_step(const Instance& instance, const DenseMatrix& coupling, const UniverseEmbedding& universe,
                   const FitConfig& config, std::span<const DenseMatrix> features) {
    AssignmentStack initial;
    initial.blocks.resize(instance.graphs.size());
    const long m = static_cast<long>(instance.graphs.size());
    // per-graph matchings are independent
#pragma omp parallel for schedule(static)
    for (long i = 0; i < m; ++i)
        initial.blocks[static_cast<std::size_t>(i)] =
            universe_match(features[static_cast<std::size_t>(i)], universe, config.hippi.sinkhorn);
    const HippiResult synced = hippi(coupling, initial, config.hippi);
    return embed_loss_grad(universe, discretize(synced.stack), features, config.alpha);
}

}  // namespace

FitResult fit_embeddings_from(const Instance& instance, UniverseEmbedding start, const FitConfig& config) {
    require(config.steps >= 0, ErrorKind::parameter, "fit steps must be >= 0");
    require(config.lr >= 0.0, ErrorKind::parameter, "learning rate must be >= 0");
    if (!(instance.max_graph_size() <= start.d())) fail(ErrorKind::dimension,
            "universe size " + std::to_string(start.d()) + " below largest graph (" +
                std::to_string(instance.max_graph_size()) + " nodes)");

    std::vector<DenseMatrix> features;
    for (const auto& g : instance.graphs) features.push_back(g.features);
    const DenseMatrix coupling = class_coupling(instance.graphs, config.classes);

    FitResult out{std::move(start), {}};
    for (int step = 0; step <= config.steps; ++step) {
        const EmbedLoss current = fit_step(instance, coupling, out.universe, config, features);
        if (!std::isfinite(current.loss))
            fail(ErrorKind::numeric, "embedding loss became non-finite at step " + std::to_string(step));
        out.loss_trace.push_back(current.loss);
        if (step == config.steps) break;
        axpy(out.universe.weights, -config.lr, current.grad);
    }
    return out;
}

FitResult fit_embeddings(const Instance& instance, const FitConfig& config, Rng& rng) {
    require(!instance.graphs.empty(), ErrorKind::input, "empty instance");
    return fit_embeddings_from(instance, init_universe(config.d, instance.graphs.front().features.cols(), rng),
                               config);
}

PairwiseSet expand_matchings(const AssignmentStack& stack) {
    require(stack.mode == AssignmentMode::binary, ErrorKind::mode, "expand_matchings needs a binary stack");
    const std::size_t m = stack.blocks.size();
    PairwiseSet out(m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) out.set(i, j, matmul_nt(stack.blocks[i], stack.blocks[j]));
    return out;
}

std::size_t cycle_violations(const PairwiseSet& matchings) {
    const std::size_t m = matchings.graphs();
    std::size_t count = 0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t j = 0; j < m; ++j) {
                if (i == k || k == j || i == j) continue;
                const DenseMatrix& direct = matchings.at(i, j);
                const DenseMatrix through = matmul(matchings.at(i, k), matchings.at(k, j));
                if (!(through.same_shape(direct))) fail(ErrorKind::dimension,
                        "pair shapes disagree on triple (" + std::to_string(i) + "," + std::to_string(k) + "," +
                            std::to_string(j) + ")");
                const auto lhs = through.values();
                const auto rhs = direct.values();
                for (std::size_t e = 0; e < lhs.size(); ++e)
                    if (lhs[e] > rhs[e]) ++count;
            }
    return count;
}

}  // namespace graphsync
