#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "graphsync/qapsolve.hpp"
#include "oracles.hpp"

using namespace graphsync;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::io;
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

double mlp_oracle(const AffinityParams& p, double x) {
    double out = p.b2;
    for (std::size_t k = 0; k < p.w1.size(); ++k) out += p.w2[k] * relu(p.w1[k] * x + p.b1[k]);
    return out;
}

PairwiseSet as_pairwise(const std::vector<std::vector<DenseMatrix>>& m) {
    PairwiseSet out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j) out.set(i, j, m[i][j]);
    return out;
}

AssignmentStack relaxed(std::vector<DenseMatrix> blocks) { return {std::move(blocks), AssignmentMode::relaxed}; }

}  // namespace

TEST_CASE("affinity with identity-like weights on orthonormal rows") {
    const AffinityParams p = AffinityParams::identity_like(3);
    for (double x : {-2.0, -0.1, 0.0, 0.7, 5.0}) CHECK(p.mlp(x) == doctest::Approx(x).epsilon(1e-15));
    const DenseMatrix v{{1.0, 0.0, 0.0}, {0.0, 0.6, 0.8}};
    const DenseMatrix m = affinity(v, v, p);
    CHECK(m(0, 0) == doctest::Approx(1.0));
    CHECK(m(1, 1) == doctest::Approx(1.0));
    CHECK(m(0, 1) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(m(1, 0) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("affinity with a zero output layer is zero") {
    Rng rng(1);
    AffinityParams p = AffinityParams::seeded(4, 6, rng);
    std::fill(p.w2.begin(), p.w2.end(), 0.0);
    p.b2 = 0.0;
    CHECK(affinity(oracle::random_matrix(3, 4, rng), oracle::random_matrix(5, 4, rng), p) == DenseMatrix(3, 5));
}

TEST_CASE("affinity matches a per-entry scalar evaluation") {
    Rng rng(2);
    AffinityParams p = AffinityParams::seeded(5, 7, rng);
    p.wx = oracle::random_matrix(5, 5, rng);
    p.wy = oracle::random_matrix(5, 5, rng);
    p.b2 = 0.3;
    const DenseMatrix vi = oracle::random_matrix(3, 5, rng), vj = oracle::random_matrix(4, 5, rng);
    const DenseMatrix m = affinity(vi, vj, p);
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 4; ++b) {
            double raw = 0.0;
            for (std::size_t k = 0; k < 5; ++k) {
                double left = 0.0, right = 0.0;
                for (std::size_t r = 0; r < 5; ++r) {
                    left += vi(a, r) * p.wx(r, k);
                    right += vj(b, r) * p.wy(r, k);
                }
                raw += left * right;
            }
            CHECK(m(a, b) == doctest::Approx(mlp_oracle(p, raw)).epsilon(1e-12));
        }
    CHECK(kind_of([&] { affinity(vi, oracle::random_matrix(2, 4, rng), p); }) == ErrorKind::dimension);

    const PairwiseSet all = all_affinities(std::vector<DenseMatrix>{vi, vj}, p);
    CHECK(all.has(0, 0));
    CHECK(all.at(1, 0) == affinity(vj, vi, p));
}

TEST_CASE("seeded mlp is nondecreasing and nonnegative") {
    Rng rng(3);
    const AffinityParams p = AffinityParams::seeded(4, 8, rng);
    double previous = p.mlp(-10.0);
    CHECK(previous >= 0.0);
    for (double x = -10.0; x <= 10.0; x += 0.25) {
        CHECK(p.mlp(x) >= previous);
        previous = p.mlp(x);
    }
}

TEST_CASE("taylor gradient trivial reductions") {
    Rng rng(4);
    oracle::SymmetricInstance s = oracle::symmetric_instance(3, 4, rng);
    const AssignmentStack stack = relaxed(s.u);

    std::vector<DenseMatrix> zero_adj;
    PairwiseSet zero_m(3);
    for (std::size_t i = 0; i < 3; ++i) {
        zero_adj.push_back(DenseMatrix(s.u[i].rows(), s.u[i].rows()));
        for (std::size_t j = 0; j < 3; ++j) zero_m.set(i, j, DenseMatrix(s.u[i].rows(), s.u[j].rows()));
    }
    CHECK(taylor_gradient(0, stack, zero_adj, zero_m, SolverParams{}) == DenseMatrix(s.u[0].rows(), 4));

    const DenseMatrix v = taylor_gradient(1, stack, s.a, as_pairwise(s.m), SolverParams{.lambda = 0.0});
    DenseMatrix expected(s.u[1].rows(), 4);
    for (std::size_t j = 0; j < 3; ++j) expected = add(expected, oracle::product(s.m[1][j], s.u[j]));
    CHECK(oracle::max_abs_diff(v, expected) < 1e-12);

    const DenseMatrix no_self =
        taylor_gradient(1, stack, s.a, as_pairwise(s.m), SolverParams{.lambda = 0.0, .include_self = false});
    CHECK(oracle::max_abs_diff(no_self, subtract(expected, oracle::product(s.m[1][1], s.u[1]))) < 1e-12);

    CHECK(kind_of([&] { taylor_gradient(5, stack, s.a, as_pairwise(s.m), SolverParams{}); }) == ErrorKind::dimension);
    std::vector<DenseMatrix> bad_adj = s.a;
    bad_adj[2] = DenseMatrix(7, 7);
    CHECK(kind_of([&] { taylor_gradient(0, stack, bad_adj, as_pairwise(s.m), SolverParams{}); }) ==
          ErrorKind::dimension);
}

TEST_CASE("taylor gradient matches central differences of the summed objective") {
    Rng rng(5);
    for (int trial = 0; trial < 6; ++trial) {
        oracle::SymmetricInstance s = oracle::symmetric_instance(2 + static_cast<std::size_t>(trial % 2), 4, rng);
        const double lambda = trial % 3 == 0 ? 0.0 : 1.0;
        const AssignmentStack stack = relaxed(s.u);
        for (std::size_t i = 0; i < s.u.size(); ++i) {
            const DenseMatrix v = taylor_gradient(i, stack, s.a, as_pairwise(s.m), SolverParams{.lambda = lambda});
            double worst = 0.0;
            for (std::size_t e = 0; e < v.size(); ++e) {
                const double h = 1e-5;
                std::vector<DenseMatrix> plus = s.u, minus = s.u;
                plus[i].values()[e] += h;
                minus[i].values()[e] -= h;
                const double fd =
                    (oracle::taylor_potential(plus, s.a, s.m, lambda) -
                     oracle::taylor_potential(minus, s.a, s.m, lambda)) /
                    (2 * h);
                worst = std::max(worst, std::abs(fd - v.values()[e]) / std::max(1.0, std::abs(v.values()[e])));
            }
            CHECK(worst <= 1e-4);
        }
    }
}

TEST_CASE("matching loss limits") {
    const SolverParams p{};
    // a dominant diagonal drives sinkhorn(M) to the identity
    PairwiseSet m(2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) m.set(i, j, DenseMatrix{{10.0, 0.0}, {0.0, 10.0}});
    const AssignmentStack agree = relaxed({DenseMatrix::identity(2), DenseMatrix::identity(2)});
    CHECK(matching_loss(agree, m, p) < 1e-12);
    CHECK(matching_loss(agree, m, p) >= 0.0);

    const AssignmentStack disagree = relaxed({DenseMatrix::identity(2), DenseMatrix{{0.0, 1.0}, {1.0, 0.0}}});
    // 2 ordered pairs x 4 entries, each ≈ |log eps|
    CHECK(matching_loss(disagree, m, p) == doctest::Approx(8.0 * std::abs(std::log(p.clamp_eps))).epsilon(1e-5));
}

TEST_CASE("matching loss matches an elementwise reference loop") {
    Rng rng(6);
    SolverParams p{.gamma = 2.0};
    // tight target so the comparison measures the loss, not the solver tolerance
    p.sinkhorn.tol = 1e-12;
    p.sinkhorn.max_iters = 1000;
    const std::vector<DenseMatrix> u{oracle::random_relaxed_matching(3, 4, rng),
                                     oracle::random_relaxed_matching(3, 4, rng)};
    PairwiseSet m(2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) m.set(i, j, oracle::random_matrix(3, 3, rng));
    double expected = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            if (i == j) continue;
            const DenseMatrix t = oracle::sinkhorn_long_double(m.at(i, j), p.sinkhorn.tau, 400000);
            const DenseMatrix x = oracle::product(u[i], oracle::transpose(u[j]));
            for (std::size_t e = 0; e < x.size(); ++e) {
                const double pe = std::min(std::max(x.values()[e], p.clamp_eps), 1.0 - p.clamp_eps);
                const double te = t.values()[e];
                expected += -te * te * (1.0 - pe) * std::log(pe) - (1.0 - te) * (1.0 - te) * pe * std::log(1.0 - pe);
            }
        }
    CHECK(matching_loss(relaxed(u), m, p) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("matching loss is covariant under node relabeling") {
    Rng rng(7);
    const SolverParams p{};
    std::vector<DenseMatrix> u{oracle::random_relaxed_matching(3, 5, rng), oracle::random_relaxed_matching(4, 5, rng),
                               oracle::random_relaxed_matching(3, 5, rng)};
    const std::vector<std::size_t> sizes{3, 4, 3};
    PairwiseSet m(3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) m.set(i, j, oracle::random_matrix(sizes[i], sizes[j], rng, 0.0, 2.0));
    const double base = matching_loss(relaxed(u), m, p);

    // relabel graph 1 with perm: new node a is old node perm[a]
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    auto permute_rows = [&](const DenseMatrix& x) {
        DenseMatrix out(x.rows(), x.cols());
        for (std::size_t a = 0; a < x.rows(); ++a)
            for (std::size_t c = 0; c < x.cols(); ++c) out(a, c) = x(perm[a], c);
        return out;
    };
    std::vector<DenseMatrix> u2 = u;
    u2[1] = permute_rows(u[1]);
    PairwiseSet m2(3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            DenseMatrix x = m.at(i, j);
            if (i == 1) x = permute_rows(x);
            if (j == 1) x = permute_rows(x.transposed()).transposed();
            m2.set(i, j, x);
        }
    // equal up to floating-point summation order
    CHECK(matching_loss(relaxed(u2), m2, p) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("pair objective: trivial forms and a quadruple-loop oracle") {
    Rng rng(8);
    const DenseMatrix a = oracle::random_symmetric(3, rng);
    CHECK(pair_kbqap_objective(DenseMatrix::identity(3), a, a, DenseMatrix(3, 3), 2.0) ==
          doctest::Approx(2.0 * trace(oracle::product(a, a))));
    CHECK(pair_kbqap_objective(DenseMatrix(3, 3), DenseMatrix(3, 3), DenseMatrix(3, 3), DenseMatrix(3, 3), 1.0) ==
          0.0);

    std::uniform_int_distribution<int> digit(-4, 4);
    auto integer_matrix = [&](std::size_t r, std::size_t c) {
        DenseMatrix x(r, c);
        for (double& v : x.values()) v = digit(rng);
        return x;
    };
    const DenseMatrix x = integer_matrix(3, 3), ai = integer_matrix(3, 3), aj = integer_matrix(3, 3),
                      mij = integer_matrix(3, 3);
    double quad = 0.0, lin = 0.0;
    for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t q = 0; q < 3; ++q) {
            lin += x(p, q) * mij(p, q);
            for (std::size_t r = 0; r < 3; ++r)
                for (std::size_t s = 0; s < 3; ++s) quad += x(r, p) * ai(r, s) * x(s, q) * aj(q, p);
        }
    CHECK(pair_kbqap_objective(x, ai, aj, mij, 1.5) == 1.5 * quad + lin);
    CHECK(kind_of([&] { pair_kbqap_objective(x, ai, DenseMatrix(2, 2), mij, 1.0); }) == ErrorKind::dimension);
}

TEST_CASE("parameter validation") {
    CHECK(kind_of([] { SolverParams{.clamp_eps = 0.5}.validate(); }) == ErrorKind::parameter);
    CHECK(kind_of([] { SolverParams{.clamp_eps = 0.0}.validate(); }) == ErrorKind::parameter);
    CHECK(kind_of([] { SolverParams{.lambda = -1.0}.validate(); }) == ErrorKind::parameter);
    CHECK(kind_of([] { SolverParams{.gamma = -1.0}.validate(); }) == ErrorKind::parameter);
    CHECK(kind_of([] { Adapter{DenseMatrix(2, 3)}.validate(2); }) == ErrorKind::dimension);
    AffinityParams p = AffinityParams::identity_like(2);
    p.b1.pop_back();
    CHECK(kind_of([&] { p.validate(2); }) == ErrorKind::dimension);
}

namespace {

struct Fixture {
    Instance inst;
    UniverseEmbedding universe;
    AffinityParams aff;
};

// Frozen universe holding the prototypes themselves plus spare random slots.
Fixture noiseless_fixture(std::uint64_t seed, std::size_t m, std::size_t n, std::size_t h, std::size_t d) {
    Rng rng(seed);
    const Prototypes protos = make_prototypes(n, h, 2, rng);
    Fixture f;
    f.inst = make_synthetic_from(protos, SyntheticParams{.m = m, .n = n, .h = h}, rng);
    DenseMatrix u = oracle::random_matrix(d, h, rng, -0.1, 0.1);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t c = 0; c < h; ++c) u(p, c) = protos.features(p, c);
    f.universe = UniverseEmbedding{u};
    f.aff = AffinityParams::seeded(h, 8, rng);
    return f;
}

}  // namespace

TEST_CASE("solve_multimatch recovers noiseless permuted copies") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Fixture f = noiseless_fixture(seed, 4, 6, 8, 12);
        const SolveResult r = solve_multimatch(f.inst.graphs, f.universe, f.aff, SolverParams{});
        CHECK(r.stack.satisfies_invariants());
        const AssignmentStack bin = discretize(r.stack);
        CHECK(cycle_violations(expand_matchings(bin)) == 0);
        std::vector<DenseMatrix> blocks;
        for (const auto& b : bin.blocks) blocks.push_back(b);
        CHECK(expand_matchings(bin).at(0, 1).rows() == 6);
        // accuracy against the generator's slots
        const auto& truth = *f.inst.truth;
        std::size_t hit = 0, total = 0;
        const PairwiseSet x = expand_matchings(bin);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                if (i == j) continue;
                for (std::size_t a = 0; a < 6; ++a)
                    for (std::size_t b = 0; b < 6; ++b)
                        if (truth[i][a] == truth[j][b]) {
                            ++total;
                            hit += x.at(i, j)(a, b) > 0.5;
                        }
            }
        CHECK(hit == total);
    }
}

TEST_CASE("solve_multimatch with zero iterations is the universe-match start") {
    const Fixture f = noiseless_fixture(9, 3, 4, 5, 6);
    const SolveResult r = solve_multimatch(f.inst.graphs, f.universe, f.aff, SolverParams{.max_iters = 0});
    CHECK(r.iterations == 0);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(r.stack.blocks[i] == universe_match(f.inst.graphs[i].features, f.universe, SinkhornParams{}));
}

TEST_CASE("solve_multimatch keeps relaxed invariants on random instances") {
    Rng rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        const Instance inst = make_synthetic(
            SyntheticParams{.m = 3, .n = 4, .h = 4, .noise_sigma = 0.5, .outliers = 1, .classes = 2}, rng);
        const UniverseEmbedding u = init_universe(7, 4, rng);
        const SolveResult r = solve_multimatch(inst.graphs, u, AffinityParams::seeded(4, 8, rng),
                                               SolverParams{.accumulate = trial % 2 == 0});
        CHECK(r.stack.satisfies_invariants());
        CHECK(cycle_violations(expand_matchings(discretize(r.stack))) == 0);
    }
    const UniverseEmbedding small = init_universe(3, 4, rng);
    const Instance inst = make_synthetic(SyntheticParams{.m = 2, .n = 4, .h = 4}, rng);
    CHECK(kind_of([&] { solve_multimatch(inst.graphs, small, AffinityParams::identity_like(4), SolverParams{}); }) ==
          ErrorKind::dimension);
}

TEST_CASE("solver improves the objective of its starting point on noiseless instances") {
    int improved = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const Fixture f = noiseless_fixture(1000 + seed, 3, 4, 4, 6);
        std::vector<DenseMatrix> feats, adj;
        for (const auto& g : f.inst.graphs) {
            feats.push_back(g.features);
            adj.push_back(g.adjacency);
        }
        const PairwiseSet m = all_affinities(feats, f.aff);
        const SolverParams p{};
        const SolveResult start = solve_multimatch(feats, adj, f.universe, f.aff, SolverParams{.max_iters = 0});
        const SolveResult end = solve_multimatch(feats, adj, f.universe, f.aff, p);
        improved += multi_kbqap_objective(discretize(end.stack), adj, m, p.lambda) >=
                    multi_kbqap_objective(discretize(start.stack), adj, m, p.lambda);
    }
    MESSAGE("objective not worse than the start on " << improved << " of 100 seeds");
    CHECK(improved >= 95);
}

TEST_CASE("adapt: zero learning rate and zero steps") {
    const Fixture f = noiseless_fixture(11, 3, 3, 3, 5);
    const AdaptResult frozen = adapt(f.inst, f.universe, Adapter::identity(3), f.aff, SolverParams{}, 0.0, 3);
    CHECK(frozen.adapter.p == DenseMatrix::identity(3));
    REQUIRE(frozen.loss_trace.size() == 4);
    for (double l : frozen.loss_trace) CHECK(l == frozen.loss_trace.front());
    CHECK(frozen.loss_trace.front() ==
          adapted_loss(f.inst, f.universe, Adapter::identity(3), f.aff, SolverParams{}));

    const AdaptResult none = adapt(f.inst, f.universe, Adapter::identity(3), f.aff, SolverParams{}, 1e-3, 0);
    CHECK(none.adapter.p == DenseMatrix::identity(3));
    CHECK(none.loss_trace.size() == 1);
    CHECK(kind_of([&] { adapt(f.inst, f.universe, Adapter{DenseMatrix(2, 2)}, f.aff, SolverParams{}, 1e-3, 1); }) ==
          ErrorKind::dimension);
}
