#include "graphsync/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "graphsync/error.hpp"

namespace graphsync {

namespace {

using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;

bool near_equal(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

// Every injection [count] -> [range] as a slot list, in lexicographic order.
std::vector<std::vector<std::size_t>> injections(std::size_t count, std::size_t range) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> current;
    std::vector<bool> used(range, false);
    auto recurse = [&](auto&& self) -> void {
        if (current.size() == count) {
            out.push_back(current);
            return;
        }
        for (std::size_t s = 0; s < range; ++s) {
            if (used[s]) continue;
            used[s] = true;
            current.push_back(s);
            self(self);
            current.pop_back();
            used[s] = false;
        }
    };
    recurse(recurse);
    return out;
}

double pair_value(const Pairs& matched, const DenseMatrix& ai, const DenseMatrix& aj, const DenseMatrix& mij,
                  double lambda) {
    double linear = 0.0, quadratic = 0.0;
    for (const auto& [a, b] : matched) {
        linear += mij(a, b);
        if (lambda == 0.0) continue;
        for (const auto& [a2, b2] : matched) quadratic += ai(a, a2) * aj(b2, b);
    }
    return lambda * quadratic + linear;
}

std::vector<char> flatten(const Pairs& matched, std::size_t rows, std::size_t cols) {
    std::vector<char> flat(rows * cols, 0);
    for (const auto& [a, b] : matched) flat[a * cols + b] = 1;
    return flat;
}

}  // namespace

PairOptimum brute_force_pair(const DenseMatrix& ai, const DenseMatrix& aj, const DenseMatrix& mij, double lambda) {
    const std::size_t ni = ai.rows(), nj = aj.rows();
    if (!(ai.cols() == ni && aj.cols() == nj && mij.rows() == ni && mij.cols() == nj)) fail(ErrorKind::dimension,
            "pair oracle shapes: A_i " + shape_string(ai) + ", A_j " + shape_string(aj) + ", M " + shape_string(mij));
    if (!(ni <= 8 && nj <= 8)) fail(ErrorKind::oracle_size,
            "pair oracle limited to 8 nodes per side (got " + std::to_string(ni) + "x" + std::to_string(nj) + ")");

    const bool row_major = ni <= nj;
    const auto candidates = row_major ? injections(ni, nj) : injections(nj, ni);

    Pairs best_pairs;
    std::vector<char> best_flat;
    double best = -std::numeric_limits<double>::infinity();
    Pairs matched;
    for (const auto& f : candidates) {
        matched.clear();
        for (std::size_t t = 0; t < f.size(); ++t)
            matched.emplace_back(row_major ? t : f[t], row_major ? f[t] : t);
        const double value = pair_value(matched, ai, aj, mij, lambda);
        if (best_flat.empty() || (value > best && !near_equal(value, best))) {
            best = value;
            best_pairs = matched;
            best_flat = flatten(matched, ni, nj);
        } else if (near_equal(value, best)) {
            auto flat = flatten(matched, ni, nj);
            if (flat > best_flat) {
                best = std::max(best, value);
                best_pairs = matched;
                best_flat = std::move(flat);
            }
        }
    }

    PairOptimum out{DenseMatrix(ni, nj), best};
    for (const auto& [a, b] : best_pairs) out.x(a, b) = 1.0;
    out.objective = pair_value(best_pairs, ai, aj, mij, lambda);
    return out;
}

MultiOptimum brute_force_multi(std::span<const DenseMatrix> adjacency, const PairwiseSet& affinities,
                               double lambda, std::size_t d) {
    const std::size_t m = adjacency.size();
    if (!(m >= 1 && m <= 3))
        fail(ErrorKind::oracle_size, "multi oracle needs 1..3 graphs (got " + std::to_string(m) + ")");
    if (!(d <= 6)) fail(ErrorKind::oracle_size, "multi oracle limited to d <= 6 (got " + std::to_string(d) + ")");
    require(affinities.graphs() == m, ErrorKind::dimension, "affinity set does not match graph count");
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t n = adjacency[i].rows();
        if (!(adjacency[i].cols() == n)) fail(ErrorKind::dimension, "adjacency " + std::to_string(i) + " not square");
        require(n <= 4, ErrorKind::oracle_size, "multi oracle limited to 4 nodes per graph");
        if (!(n <= d)) fail(ErrorKind::dimension, "graph " + std::to_string(i) + " larger than universe");
        sizes.push_back(n);
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (i != j && !(affinities.at(i, j).rows() == sizes[i] && affinities.at(i, j).cols() == sizes[j]))
                fail(ErrorKind::dimension, "affinity (" + std::to_string(i) + "," + std::to_string(j) + ") shape");

    // Relabeling universe slots maps optima to optima, and the canonical
    // injection is the lexicographically largest block, so fixing graph 0
    // loses neither the optimum nor the tie-break winner.
    std::vector<std::size_t> canonical(sizes[0]);
    for (std::size_t a = 0; a < sizes[0]; ++a) canonical[a] = a;
    std::vector<std::vector<std::vector<std::size_t>>> options(m);
    options[0] = {canonical};
    for (std::size_t i = 1; i < m; ++i) options[i] = injections(sizes[i], d);

    auto score = [&](const std::vector<const std::vector<std::size_t>*>& slots) {
        double total = 0.0;
        Pairs matched;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                if (i == j) continue;
                matched.clear();
                for (std::size_t a = 0; a < sizes[i]; ++a)
                    for (std::size_t b = 0; b < sizes[j]; ++b)
                        if ((*slots[i])[a] == (*slots[j])[b]) matched.emplace_back(a, b);
                total += pair_value(matched, adjacency[i], adjacency[j], affinities.at(i, j), lambda);
            }
        return total;
    };
    // With one-hot rows, a larger flattened block means a smaller slot at
    // the first differing row.
    auto key = [&](const std::vector<const std::vector<std::size_t>*>& slots) {
        std::vector<std::size_t> k;
        for (const auto* s : slots) k.insert(k.end(), s->begin(), s->end());
        return k;
    };

    struct Best {
        double value = -std::numeric_limits<double>::infinity();
        std::vector<std::size_t> key;
        bool set = false;
    };
    auto better = [](double value, const std::vector<std::size_t>& k, const Best& best) {
        if (!best.set) return true;
        if (near_equal(value, best.value)) return k < best.key;
        return value > best.value;
    };

    const std::size_t outer = m >= 2 ? options[1].size() : 1;
    std::vector<Best> per_outer(outer);
    const long outer_count = static_cast<long>(outer);
#pragma omp parallel for schedule(dynamic)
    for (long o = 0; o < outer_count; ++o) {
        std::vector<const std::vector<std::size_t>*> slots(m);
        slots[0] = &options[0][0];
        if (m >= 2) slots[1] = &options[1][static_cast<std::size_t>(o)];
        Best& local = per_outer[static_cast<std::size_t>(o)];
        const std::size_t inner = m == 3 ? options[2].size() : 1;
        for (std::size_t q = 0; q < inner; ++q) {
            if (m == 3) slots[2] = &options[2][q];
            const double value = score(slots);
            auto k = key(slots);
            if (better(value, k, local)) local = {value, std::move(k), true};
        }
    }
    Best best;
    for (const auto& b : per_outer)
        if (better(b.value, b.key, best)) best = b;

    MultiOptimum out;
    out.stack.mode = AssignmentMode::binary;
    out.objective = best.value;
    std::size_t at = 0;
    for (std::size_t i = 0; i < m; ++i) {
        DenseMatrix block(sizes[i], d);
        for (std::size_t a = 0; a < sizes[i]; ++a) block(a, best.key[at + a]) = 1.0;
        at += sizes[i];
        out.stack.blocks.push_back(std::move(block));
    }
    return out;
}

double matching_accuracy(const PairwiseSet& pred, const std::vector<SlotAssignment>& truth) {
    const std::size_t m = truth.size();
    if (!(pred.graphs() == m)) fail(ErrorKind::dimension,
            "prediction covers " + std::to_string(pred.graphs()) + " graphs, truth " + std::to_string(m));
    std::size_t total = 0, hit = 0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            const DenseMatrix& x = pred.at(i, j);
            if (!(x.rows() == truth[i].size() && x.cols() == truth[j].size())) fail(ErrorKind::dimension,
                    "prediction (" + std::to_string(i) + "," + std::to_string(j) + ") is " + shape_string(x));
            for (std::size_t a = 0; a < truth[i].size(); ++a) {
                if (!truth[i][a]) continue;
                for (std::size_t b = 0; b < truth[j].size(); ++b) {
                    if (!truth[j][b] || *truth[j][b] != *truth[i][a]) continue;
                    ++total;
                    if (x(a, b) > 0.5) ++hit;
                }
            }
        }
    require(total > 0, ErrorKind::missing_truth, "ground truth has no correspondences");
    return static_cast<double>(hit) / static_cast<double>(total);
}

double matching_accuracy(const AssignmentStack& pred, const Instance& instance) {
    require(instance.truth.has_value(), ErrorKind::missing_truth, "instance carries no ground truth");
    const AssignmentStack binary = pred.mode == AssignmentMode::binary ? pred : discretize(pred);
    return matching_accuracy(expand_matchings(binary), *instance.truth);
}

}  // namespace graphsync
