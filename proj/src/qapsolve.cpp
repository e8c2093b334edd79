#include "graphsync/qapsolve.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "graphsync/error.hpp"

namespace graphsync {

double AffinityParams::mlp(double x) const {
    double out = b2;
    for (std::size_t k = 0; k < w1.size(); ++k) out += w2[k] * std::max(0.0, w1[k] * x + b1[k]);
    return out;
}

void AffinityParams::validate(std::size_t h) const {
    if (!(wx.rows() == h && wx.cols() == h && wy.rows() == h && wy.cols() == h)) fail(ErrorKind::dimension,
            "affinity projections must be " + std::to_string(h) + "x" + std::to_string(h));
    require(b1.size() == w1.size() && w2.size() == w1.size(), ErrorKind::dimension,
            "mlp layer sizes disagree");
    require(wx.all_finite() && wy.all_finite() && std::isfinite(b2), ErrorKind::input, "non-finite affinity weights");
    for (std::size_t k = 0; k < w1.size(); ++k)
        require(std::isfinite(w1[k]) && std::isfinite(b1[k]) && std::isfinite(w2[k]), ErrorKind::input,
                "non-finite mlp weight");
}

AffinityParams AffinityParams::identity_like(std::size_t h) {
    // relu(x) - relu(-x) == x
    return {DenseMatrix::identity(h), DenseMatrix::identity(h), {1.0, -1.0}, {0.0, 0.0}, {1.0, -1.0}, 0.0};
}

AffinityParams AffinityParams::seeded(std::size_t h, std::size_t hidden, Rng& rng) {
    require(hidden >= 1, ErrorKind::parameter, "mlp hidden width must be >= 1");
    std::uniform_real_distribution<double> pos(0.5, 1.5);
    std::normal_distribution<double> z(0.0, 1.0);
    AffinityParams p{DenseMatrix::identity(h), DenseMatrix::identity(h), {}, {}, {}, 0.0};
    for (std::size_t k = 0; k < hidden; ++k) {
        p.w1.push_back(pos(rng));
        p.b1.push_back(z(rng));
        p.w2.push_back(pos(rng) / static_cast<double>(hidden));
    }
    return p;
}

void SolverParams::validate() const {
    require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::parameter, "lambda must be >= 0");
    require(gamma >= 0.0 && std::isfinite(gamma), ErrorKind::parameter, "gamma must be >= 0");
    require(max_iters >= 0, ErrorKind::parameter, "solver max_iters must be >= 0");
    require(clamp_eps > 0.0 && clamp_eps < 0.5, ErrorKind::parameter, "clamp_eps must lie in (0, 0.5)");
    require(tol > 0.0, ErrorKind::parameter, "solver tol must be > 0");
    sinkhorn.validate();
}

void Adapter::validate(std::size_t h) const {
    if (!(p.rows() == h && p.cols() == h)) fail(ErrorKind::dimension,
            "adapter is " + shape_string(p) + ", features have width " + std::to_string(h));
    require(p.all_finite(), ErrorKind::input, "non-finite adapter");
}

DenseMatrix affinity(const DenseMatrix& vi, const DenseMatrix& vj, const AffinityParams& params) {
    if (!(vi.cols() == vj.cols())) fail(ErrorKind::dimension,
            "feature widths differ: " + shape_string(vi) + " vs " + shape_string(vj));
    params.validate(vi.cols());
    DenseMatrix m = matmul_nt(matmul(vi, params.wx), matmul(vj, params.wy));
    for (double& v : m.values()) v = params.mlp(v);
    require_finite(m, "affinity");
    return m;
}

PairwiseSet all_affinities(std::span<const DenseMatrix> features, const AffinityParams& params) {
    PairwiseSet out(features.size());
    for (std::size_t i = 0; i < features.size(); ++i)
        for (std::size_t j = 0; j < features.size(); ++j) out.set(i, j, affinity(features[i], features[j], params));
    return out;
}

DenseMatrix taylor_gradient(std::size_t i, const AssignmentStack& stack, std::span<const DenseMatrix> adjacency,
                            const PairwiseSet& affinities, const SolverParams& params) {
    const std::size_t m = stack.blocks.size();
    if (!(i < m)) fail(ErrorKind::dimension, "graph index " + std::to_string(i) + " out of range");
    if (!(adjacency.size() == m && affinities.graphs() == m)) fail(ErrorKind::dimension,
            "adjacency/affinity counts do not match " + std::to_string(m) + " blocks");
    const DenseMatrix& ui = stack.blocks[i];
    const std::size_t ni = ui.rows(), d = ui.cols();
    if (!(adjacency[i].rows() == ni && adjacency[i].cols() == ni)) fail(ErrorKind::dimension,
            "A_" + std::to_string(i) + " is " + shape_string(adjacency[i]));

    const DenseMatrix ai_ui = matmul(adjacency[i], ui);
    DenseMatrix grad(ni, d);
    for (std::size_t j = 0; j < m; ++j) {
        if (j == i && !params.include_self) continue;
        const DenseMatrix& uj = stack.blocks[j];
        const DenseMatrix& mij = affinities.at(i, j);
        const std::string pair = "(" + std::to_string(i) + "," + std::to_string(j) + ")";
        if (!(uj.cols() == d)) fail(ErrorKind::dimension, "universe sizes differ in pair " + pair);
        if (!(adjacency[j].rows() == uj.rows() && adjacency[j].cols() == uj.rows())) fail(ErrorKind::dimension,
                "A_" + std::to_string(j) + " is " + shape_string(adjacency[j]));
        if (!(mij.rows() == ni && mij.cols() == uj.rows())) fail(ErrorKind::dimension,
                "M" + pair + " is " + shape_string(mij));
        if (params.lambda != 0.0) {
            // (A_i U_i)(U_j^T A_j U_j), kept d×d in the middle
            axpy(grad, params.lambda, matmul(ai_ui, matmul_tn(uj, matmul(adjacency[j], uj))));
        }
        axpy(grad, 1.0, matmul(mij, uj));
    }
    return grad;
}

SolveResult solve_multimatch(std::span<const DenseMatrix> features, std::span<const DenseMatrix> adjacency,
                             const UniverseEmbedding& universe, const AffinityParams& aff,
                             const SolverParams& params) {
    params.validate();
    const std::size_t m = features.size();
    require(adjacency.size() == m, ErrorKind::dimension, "adjacency count does not match feature count");
    const PairwiseSet affinities = all_affinities(features, aff);

    SolveResult result;
    for (const auto& v : features) result.stack.blocks.push_back(universe_match(v, universe, params.sinkhorn));

    std::vector<DenseMatrix> running(m);
    for (std::size_t i = 0; i < m; ++i) running[i] = DenseMatrix(features[i].rows(), universe.d());

    for (int it = 1; it <= params.max_iters; ++it) {
        std::vector<DenseMatrix> grads(m);
        for (std::size_t i = 0; i < m; ++i) {
            grads[i] = taylor_gradient(i, result.stack, adjacency, affinities, params);
            if (params.accumulate)
                axpy(running[i], 1.0, grads[i]);
            else
                running[i] = std::move(grads[i]);
            if (!running[i].all_finite())
                fail(ErrorKind::numeric, "solver iterate of graph " + std::to_string(i) +
                                             " became non-finite at iteration " + std::to_string(it));
        }
        double change = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            DenseMatrix next = sinkhorn(running[i], params.sinkhorn);
            change = std::max(change, frobenius_norm(subtract(next, result.stack.blocks[i])));
            result.stack.blocks[i] = std::move(next);
        }
        result.iterations = it;
        if (change < params.tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

SolveResult solve_multimatch(std::span<const Graph> graphs, const UniverseEmbedding& universe,
                             const AffinityParams& aff, const SolverParams& params) {
    std::vector<DenseMatrix> features, adjacency;
    for (const auto& g : graphs) {
        features.push_back(g.features);
        adjacency.push_back(g.adjacency);
    }
    return solve_multimatch(features, adjacency, universe, aff, params);
}

double matching_loss(const AssignmentStack& stack, const PairwiseSet& affinities, const SolverParams& params) {
    params.validate();
    const std::size_t m = stack.blocks.size();
    require(affinities.graphs() == m, ErrorKind::dimension, "affinity set does not match stack");
    const double lo = params.clamp_eps, hi = 1.0 - params.clamp_eps;

    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            const DenseMatrix& mij = affinities.at(i, j);
            const DenseMatrix pred = matmul_nt(stack.blocks[i], stack.blocks[j]);
            if (!(mij.same_shape(pred))) fail(ErrorKind::dimension,
                    "M(" + std::to_string(i) + "," + std::to_string(j) + ") is " + shape_string(mij));
            // sinkhorn wants rows <= cols
            const DenseMatrix target = mij.rows() <= mij.cols()
                                           ? sinkhorn(mij, params.sinkhorn)
                                           : sinkhorn(mij.transposed(), params.sinkhorn).transposed();
            const auto t = target.values();
            const auto p = pred.values();
            for (std::size_t e = 0; e < p.size(); ++e) {
                const double x = std::clamp(p[e], lo, hi);
                const double pos = std::pow(t[e], params.gamma);
                const double neg = std::pow(std::max(0.0, 1.0 - t[e]), params.gamma);
                total += -pos * (1.0 - x) * std::log(x) - neg * x * std::log(1.0 - x);
            }
        }
    return total;
}

namespace {

std::vector<DenseMatrix> adapted_features(const Instance& instance, const Adapter& adapter) {
    std::vector<DenseMatrix> out;
    for (const auto& g : instance.graphs) out.push_back(matmul(g.features, adapter.p));
    return out;
}

}  // namespace

double adapted_loss(const Instance& instance, const UniverseEmbedding& universe, const Adapter& adapter,
                    const AffinityParams& aff, const SolverParams& params) {
    const std::vector<DenseMatrix> features = adapted_features(instance, adapter);
    std::vector<DenseMatrix> adjacency;
    for (const auto& g : instance.graphs) adjacency.push_back(g.adjacency);
    const SolveResult solved = solve_multimatch(features, adjacency, universe, aff, params);
    return matching_loss(solved.stack, all_affinities(features, aff), params);
}

AdaptResult adapt(const Instance& instance, const UniverseEmbedding& universe, Adapter adapter,
                  const AffinityParams& aff, const SolverParams& params, double lr, int steps) {
    require(!instance.graphs.empty(), ErrorKind::input, "empty instance");
    require(steps >= 0, ErrorKind::parameter, "adapt steps must be >= 0");
    require(lr >= 0.0 && std::isfinite(lr), ErrorKind::parameter, "adapt learning rate must be >= 0");
    adapter.validate(instance.graphs.front().features.cols());

    AdaptResult out{std::move(adapter), {}};
    const std::size_t count = out.adapter.p.size();
    for (int step = 0; step <= steps; ++step) {
        const double loss = adapted_loss(instance, universe, out.adapter, aff, params);
        if (!std::isfinite(loss))
            fail(ErrorKind::numeric, "matching loss non-finite at adapt step " + std::to_string(step));
        out.loss_trace.push_back(loss);
        if (step == steps) break;

        std::vector<double> grad(count, 0.0);
        const long total = static_cast<long>(count);
        // probes are independent; each writes its own slot, so the result
        // does not depend on the schedule
#pragma omp parallel for schedule(dynamic)
        for (long e = 0; e < total; ++e) {
            const auto idx = static_cast<std::size_t>(e);
            const double base = out.adapter.p.values()[idx];
            const double delta = 1e-4 * std::max(1.0, std::abs(base));
            Adapter probe = out.adapter;
            probe.p.values()[idx] = base + delta;
            const double up = adapted_loss(instance, universe, probe, aff, params);
            probe.p.values()[idx] = base - delta;
            const double down = adapted_loss(instance, universe, probe, aff, params);
            grad[idx] = (up - down) / (2.0 * delta);
        }
        for (std::size_t e = 0; e < count; ++e) out.adapter.p.values()[e] -= lr * grad[e];
    }
    return out;
}

double pair_kbqap_objective(const DenseMatrix& x, const DenseMatrix& ai, const DenseMatrix& aj,
                            const DenseMatrix& mij, double lambda) {
    if (!(ai.rows() == x.rows() && ai.cols() == x.rows() && aj.rows() == x.cols() && aj.cols() == x.cols() &&
                mij.same_shape(x))) fail(ErrorKind::dimension,
            "kbqap shapes: X " + shape_string(x) + ", A_i " + shape_string(ai) + ", A_j " + shape_string(aj) +
                ", M " + shape_string(mij));
    double value = frobenius_inner(x, mij);
    // tr(X^T A_i X A_j) = <A_i X, X A_j^T>
    if (lambda != 0.0) value += lambda * frobenius_inner(matmul(ai, x), matmul_nt(x, aj));
    return value;
}

double multi_kbqap_objective(const AssignmentStack& stack, std::span<const DenseMatrix> adjacency,
                             const PairwiseSet& affinities, double lambda) {
    const std::size_t m = stack.blocks.size();
    require(adjacency.size() == m && affinities.graphs() == m, ErrorKind::dimension,
            "adjacency/affinity counts do not match the stack");
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            total += pair_kbqap_objective(matmul_nt(stack.blocks[i], stack.blocks[j]), adjacency[i], adjacency[j],
                                          affinities.at(i, j), lambda);
        }
    return total;
}

}  // namespace graphsync
