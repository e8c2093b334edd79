#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "graphsync/matcore.hpp"
#include "parallel.hpp"

namespace graphsync {

void SinkhornParams::validate() const {
    require(tau > 0.0 && std::isfinite(tau), ErrorKind::parameter, "sinkhorn tau must be > 0");
    require(max_iters >= 1, ErrorKind::parameter, "sinkhorn max_iters must be >= 1");
    require(tol > 0.0, ErrorKind::parameter, "sinkhorn tol must be > 0");
    require(stall_ratio > 0.0 && stall_ratio < 1.0, ErrorKind::parameter,
            "sinkhorn stall_ratio must lie in (0,1)");
}

namespace {

using detail::for_index;

constexpr std::size_t kParallelCells = 4096;

double log_sum_exp(std::span<const double> logits, std::span<const double> shift) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i) peak = std::max(peak, logits[i] + shift[i]);
    double acc = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) acc += std::exp(logits[i] + shift[i] - peak);
    return peak + std::log(acc);
}

// Log-domain state of the augmented square problem. The k - n slack rows are
// identical, so they are stored once with multiplicity k - n; their
// potentials stay equal under every update. The plan is
// P_ab = exp(logk_ab + f_a + g_b); every public step leaves the rows exact,
// so progress is measured on the column residual alone.
class Projector {
public:
    Projector(const DenseMatrix& scores, double tau, bool warm_start, bool allow_parallel)
        : n_(scores.rows()), k_(scores.cols()), rows_(n_ < k_ ? n_ + 1 : n_), logk_(rows_, k_, 0.0),
          f_(rows_, 0.0), log_mult_(rows_, 0.0), g_(k_, 0.0), col_lse_(k_, 0.0) {
        for (std::size_t r = 0; r < n_; ++r)
            for (std::size_t c = 0; c < k_; ++c) logk_(r, c) = scores(r, c) / tau;
        // Any constant works for the slack logits because the row gets its
        // own potential.
        if (rows_ > n_) log_mult_[n_] = std::log(static_cast<double>(k_ - n_));
        logk_t_ = logk_.transposed();
        parallel_ = allow_parallel && rows_ * k_ >= kParallelCells;
        if (warm_start) {
            // Duals of the padded square assignment on the logits; the plan
            // they induce is 1 on the optimal permutation and <= 1 elsewhere.
            DenseMatrix padded(k_, k_, 0.0);
            for (std::size_t r = 0; r < n_; ++r)
                std::copy(logk_.row(r).begin(), logk_.row(r).end(), padded.row(r).begin());
            g_ = solve_assignment(padded).col_potential;
        }
        normalize_rows();
    }

    /// Column residual of the current iterate.
    double deviation() {
        std::vector<double> shift(rows_);
        for (std::size_t a = 0; a < rows_; ++a) shift[a] = f_[a] + log_mult_[a];
        for_index(k_, parallel_, [&](std::size_t b) { col_lse_[b] = log_sum_exp(logk_t_.row(b), shift); });
        double dev = 0.0;
        for (std::size_t b = 0; b < k_; ++b) dev = std::max(dev, std::abs(std::exp(g_[b] + col_lse_[b]) - 1.0));
        return dev;
    }

    /// One column + row normalization. Uses the column sums cached by the
    /// preceding deviation() call.
    void sweep() {
        for (std::size_t b = 0; b < k_; ++b) g_[b] = -col_lse_[b];
        normalize_rows();
    }

    /// Damped Newton step on the column potentials with rows eliminated.
    /// Returns false when no step decreases the dual objective.
    bool newton_step() {
        const DenseMatrix plan = current_plan(rows_);
        std::vector<double> cols(k_, 0.0);
        for (std::size_t a = 0; a < rows_; ++a) {
            const double w = std::exp(log_mult_[a]);
            for (std::size_t b = 0; b < k_; ++b) cols[b] += w * plan(a, b);
        }

        // Hessian diag(c) - P^T W P has the constant vector in its kernel;
        // pin the last potential and solve the reduced system.
        const Eigen::Index m = static_cast<Eigen::Index>(k_) - 1;
        const Eigen::Index r = static_cast<Eigen::Index>(rows_);
        if (m == 0) return false;
        double scale = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) scale = std::max(scale, cols[static_cast<std::size_t>(i)]);
        Eigen::VectorXd rhs(m), diag(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            rhs(i) = 1.0 - cols[static_cast<std::size_t>(i)];
            diag(i) = cols[static_cast<std::size_t>(i)] + 1e-13 * std::max(scale, 1.0);
        }
        Eigen::MatrixXd q(r, m);
        for (Eigen::Index a = 0; a < r; ++a) {
            const double root = std::exp(0.5 * log_mult_[static_cast<std::size_t>(a)]);
            for (Eigen::Index b = 0; b < m; ++b)
                q(a, b) = root * plan(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
        }

        Eigen::VectorXd step_dir;
        if (2 * r < m) {
            // Few distinct rows: Woodbury on diag - Q^T Q needs only an r×r
            // solve.
            const Eigen::VectorXd inv_diag = diag.cwiseInverse();
            const Eigen::MatrixXd q_scaled = q * inv_diag.asDiagonal();
            const Eigen::MatrixXd capacitance = Eigen::MatrixXd::Identity(r, r) - q_scaled * q.transpose();
            const Eigen::VectorXd base_dir = inv_diag.cwiseProduct(rhs);
            step_dir = base_dir + q_scaled.transpose() * capacitance.ldlt().solve(q * base_dir);
        } else {
            Eigen::MatrixXd hess = -(q.transpose() * q);
            hess.diagonal() += diag;
            step_dir = hess.ldlt().solve(rhs);
        }
        if (!step_dir.allFinite()) return false;

        double slope = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) slope -= rhs(i) * step_dir(i);
        if (!(slope < 0.0)) return false;

        const double base = dual_objective(g_);
        std::vector<double> trial(k_);
        double step = 1.0;
        for (int attempt = 0; attempt < 40; ++attempt, step *= 0.5) {
            for (std::size_t b = 0; b < k_; ++b)
                trial[b] = g_[b] + (b + 1 < k_ ? step * step_dir(static_cast<Eigen::Index>(b)) : 0.0);
            const double value = dual_objective(trial);
            if (std::isfinite(value) && value <= base + 1e-4 * step * slope) {
                g_ = trial;
                normalize_rows();
                return true;
            }
        }
        return false;
    }

    DenseMatrix current_plan(std::size_t rows) const {
        DenseMatrix plan(rows, k_);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < k_; ++c) plan(r, c) = std::exp(logk_(r, c) + f_[r] + g_[c]);
        return plan;
    }

private:
    void normalize_rows() {
        for_index(rows_, parallel_, [&](std::size_t a) { f_[a] = -log_sum_exp(logk_.row(a), g_); });
    }

    // Dual objective with the row potentials eliminated; invariant under a
    // constant shift of g.
    double dual_objective(std::span<const double> g) const {
        double value = 0.0;
        for (std::size_t a = 0; a < rows_; ++a) value += std::exp(log_mult_[a]) * log_sum_exp(logk_.row(a), g);
        for (double v : g) value -= v;
        return value;
    }

    std::size_t n_, k_, rows_;
    DenseMatrix logk_, logk_t_;
    std::vector<double> f_, log_mult_, g_, col_lse_;
    bool parallel_ = false;
};

SinkhornResult solve(const DenseMatrix& scores, const SinkhornParams& params, bool keep_trace,
                     bool allow_parallel) {
    params.validate();
    const std::size_t n = scores.rows(), k = scores.cols();
    require(n >= 1 && k >= 1, ErrorKind::dimension, "sinkhorn on empty matrix");
    if (!(n <= k)) fail(ErrorKind::dimension,
            "sinkhorn needs rows <= cols (got " + shape_string(scores) + ")");
    require_finite(scores, "sinkhorn input");

    Projector proj(scores, params.tau, params.warm_start, allow_parallel);
    SinkhornResult result;
    bool use_newton = false;
    double previous = std::numeric_limits<double>::infinity();
    for (int it = 0;; ++it) {
        const double dev = proj.deviation();
        result.deviation = dev;
        if (keep_trace) result.trace.push_back(dev);
        if (dev < params.tol) {
            result.converged = true;
            break;
        }
        if (it == params.max_iters) break;

        if (params.newton && !use_newton && it > 0 && dev > params.stall_ratio * previous)
            use_newton = true;
        previous = dev;

        // a rejected Newton step leaves the cached column sums valid
        if (!(use_newton && proj.newton_step())) proj.sweep();
        result.iterations = it + 1;
    }
    result.assignment = proj.current_plan(n);
    return result;
}

}  // namespace

SinkhornResult sinkhorn_solve(const DenseMatrix& scores, const SinkhornParams& params,
                              bool keep_trace) {
    return solve(scores, params, keep_trace, true);
}

namespace reference {

SinkhornResult sinkhorn_solve(const DenseMatrix& scores, const SinkhornParams& params) {
    return solve(scores, params, false, false);
}

}  // namespace reference

}  // namespace graphsync
