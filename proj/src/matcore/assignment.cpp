#include <cmath>
#include <limits>

#include "graphsync/matcore.hpp"

namespace graphsync {

// Shortest augmenting path Hungarian method with row/column potentials,
// O(n^2 k). Minimizes the negated weights.
AssignmentSolution solve_assignment(const DenseMatrix& weights) {
    const std::size_t n = weights.rows(), k = weights.cols();
    if (!(n <= k)) fail(ErrorKind::dimension,
            "assignment needs rows <= cols (got " + shape_string(weights) + ")");
    require_finite(weights, "assignment weights");
    if (n == 0) return {{}, {}, std::vector<double>(k, 0.0)};

    constexpr double inf = std::numeric_limits<double>::infinity();
    // 1-based with a virtual column 0, as is customary for this formulation.
    std::vector<double> u(n + 1, 0.0), v(k + 1, 0.0);
    std::vector<std::size_t> owner(k + 1, 0), way(k + 1, 0);

    for (std::size_t i = 1; i <= n; ++i) {
        owner[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(k + 1, inf);
        std::vector<char> used(k + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = owner[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= k; ++j) {
                if (used[j]) continue;
                const double cur = -weights(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= k; ++j) {
                if (used[j]) {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (owner[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    AssignmentSolution out{std::vector<std::size_t>(n, 0), std::vector<double>(u.begin() + 1, u.end()),
                           std::vector<double>(v.begin() + 1, v.end())};
    for (std::size_t j = 1; j <= k; ++j)
        if (owner[j] != 0) out.choice[owner[j] - 1] = j - 1;
    return out;
}

std::vector<std::size_t> max_weight_assignment(const DenseMatrix& weights) {
    return solve_assignment(weights).choice;
}

DenseMatrix discretize(const DenseMatrix& relaxed) {
    require_finite(relaxed, "discretize input");
    const std::size_t n = relaxed.rows(), k = relaxed.cols();
    DenseMatrix out(n, k);
    if (n <= k) {
        const auto choice = max_weight_assignment(relaxed);
        for (std::size_t r = 0; r < n; ++r) out(r, choice[r]) = 1.0;
    } else {
        const auto choice = max_weight_assignment(relaxed.transposed());
        for (std::size_t c = 0; c < k; ++c) out(choice[c], c) = 1.0;
    }
    return out;
}

namespace {

bool is_binary(const DenseMatrix& x) {
    for (double v : x.values())
        if (v != 0.0 && v != 1.0) return false;
    return true;
}

}  // namespace

bool is_partial_permutation(const DenseMatrix& x) {
    if (!is_binary(x)) return false;
    for (double s : row_sums(x))
        if (s > 1.0) return false;
    for (double s : col_sums(x))
        if (s > 1.0) return false;
    return true;
}

bool is_universe_matching(const DenseMatrix& x) {
    if (!is_partial_permutation(x)) return false;
    for (double s : row_sums(x))
        if (s != 1.0) return false;
    return true;
}

}  // namespace graphsync
