#include "graphsync/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <omp.h>

#include "graphsync/error.hpp"
#include "graphsync/oracle.hpp"
#include "graphsync/random.hpp"

namespace graphsync {

namespace {

// Child-stream indices under a run seed.
enum Stream : std::uint64_t { prototypes_stream = 0, source_stream = 1, test_stream = 2, universe_stream = 3,
                              affinity_stream = 4, dropedge_stream = 5 };

constexpr std::pair<RunMode, std::string_view> kModes[] = {{RunMode::fit_universe, "fit-universe"},
                                                           {RunMode::tta, "tta"},
                                                           {RunMode::oracle_compare, "oracle-compare"},
                                                           {RunMode::sweep, "sweep"}};

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <class T>
std::string join(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        if constexpr (std::is_floating_point_v<T>)
            out += format_number(values[i]);
        else
            out += std::to_string(values[i]);
    }
    return out;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

std::string_view to_string(RunMode mode) {
    for (const auto& [m, name] : kModes)
        if (m == mode) return name;
    return "?";
}

RunMode parse_mode(std::string_view name) {
    for (const auto& [m, text] : kModes)
        if (text == name) return m;
    fail(ErrorKind::config, "unknown mode '" + std::string(name) +
                                "' (expected fit-universe, tta, oracle-compare or sweep)");
}

void ExperimentConfig::validate() const {
    auto check = [](bool ok, const std::string& what) { require(ok, ErrorKind::config, what); };
    check(m >= 2, "m must be >= 2");
    check(n >= 2, "n must be >= 2");
    check(h >= 2, "h must be >= 2");
    check(classes >= 1, "classes must be >= 1");
    check(step >= 1, "step must be >= 1");
    check(d >= n + outliers, "d (" + std::to_string(d) + ") must be >= n + outliers (" +
                                 std::to_string(n + outliers) + ")");
    check(!noise_sigma.empty(), "noise_sigma list is empty");
    for (double s : noise_sigma) check(std::isfinite(s) && s >= 0.0, "noise_sigma values must be >= 0");
    check(!seeds.empty(), "seeds list is empty");
    check(std::isfinite(tau) && tau > 0.0, "tau must be > 0");
    check(sinkhorn_iters >= 1, "sinkhorn_iters must be >= 1");
    check(std::isfinite(sinkhorn_tol) && sinkhorn_tol > 0.0, "sinkhorn_tol must be > 0");
    check(std::isfinite(theta) && theta > 0.0, "theta must be > 0");
    check(hippi_iters >= 0, "hippi_iters must be >= 0");
    check(std::isfinite(lambda) && lambda >= 0.0, "lambda must be >= 0");
    check(std::isfinite(gamma) && gamma >= 0.0, "gamma must be >= 0");
    check(std::isfinite(alpha) && alpha >= 0.0, "alpha must be >= 0");
    check(std::isfinite(lr) && lr >= 0.0, "lr must be >= 0");
    check(fit_steps >= 0, "fit_steps must be >= 0");
    check(adapt_steps >= 0, "adapt_steps must be >= 0");
    check(miter >= 0, "miter must be >= 0");
    check(drop_rate >= 0.0 && drop_rate <= 1.0, "drop_rate must lie in [0,1]");
    check(mlp_hidden >= 1, "mlp_hidden must be >= 1");
    check(mode != RunMode::tta || !embedding.empty(), "tta mode needs an embedding path");
}

SinkhornParams ExperimentConfig::sinkhorn() const {
    SinkhornParams p;
    p.tau = tau;
    p.max_iters = sinkhorn_iters;
    p.tol = sinkhorn_tol;
    return p;
}

FitConfig ExperimentConfig::fit() const {
    FitConfig f;
    f.d = d;
    f.classes = classes;
    f.alpha = alpha;
    f.lr = lr;
    f.steps = fit_steps;
    f.hippi.theta = theta;
    f.hippi.max_iters = hippi_iters;
    f.hippi.sinkhorn = sinkhorn();
    return f;
}

SolverParams ExperimentConfig::solver() const {
    SolverParams p;
    p.lambda = lambda;
    p.gamma = gamma;
    p.max_iters = miter;
    p.sinkhorn = sinkhorn();
    return p;
}

namespace {

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;

template <class T>
T parse_scalar(std::string_view text) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, value);
    if (res.ec != std::errc{} || res.ptr != end || text.empty())
        fail(ErrorKind::config, "cannot parse '" + std::string(text) + "'");
    return value;
}

double parse_real(std::string_view text) {
    const double v = parse_scalar<double>(text);
    if (!(std::isfinite(v))) fail(ErrorKind::config, "non-finite value '" + std::string(text) + "'");
    return v;
}

std::vector<std::string_view> split_list(std::string_view text) {
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = text.find(',');
        out.push_back(trim(text.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return out;
}

// Comma list whose items may be inclusive ranges "a..b".
std::vector<std::uint64_t> parse_seeds(std::string_view text) {
    std::vector<std::uint64_t> out;
    for (auto item : split_list(text)) {
        const auto dots = item.find("..");
        if (dots == std::string_view::npos) {
            out.push_back(parse_scalar<std::uint64_t>(item));
            continue;
        }
        const auto lo = parse_scalar<std::uint64_t>(trim(item.substr(0, dots)));
        const auto hi = parse_scalar<std::uint64_t>(trim(item.substr(dots + 2)));
        if (!(lo <= hi)) fail(ErrorKind::config, "empty seed range '" + std::string(item) + "'");
        require(hi - lo < 1'000'000, ErrorKind::config, "seed range too long");
        for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    }
    return out;
}

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = {
        {"mode", [](ExperimentConfig& c, std::string_view v) { c.mode = parse_mode(v); }},
        {"m", [](ExperimentConfig& c, std::string_view v) { c.m = parse_scalar<std::size_t>(v); }},
        {"n", [](ExperimentConfig& c, std::string_view v) { c.n = parse_scalar<std::size_t>(v); }},
        {"h", [](ExperimentConfig& c, std::string_view v) { c.h = parse_scalar<std::size_t>(v); }},
        {"classes", [](ExperimentConfig& c, std::string_view v) { c.classes = parse_scalar<std::size_t>(v); }},
        {"step", [](ExperimentConfig& c, std::string_view v) { c.step = parse_scalar<std::size_t>(v); }},
        {"d",
         [](ExperimentConfig& c, std::string_view v) {
             c.d_auto = v == "auto";
             if (!c.d_auto) c.d = parse_scalar<std::size_t>(v);
         }},
        {"noise_sigma",
         [](ExperimentConfig& c, std::string_view v) {
             c.noise_sigma.clear();
             for (auto item : split_list(v)) c.noise_sigma.push_back(parse_real(item));
         }},
        {"outliers", [](ExperimentConfig& c, std::string_view v) { c.outliers = parse_scalar<std::size_t>(v); }},
        {"seeds", [](ExperimentConfig& c, std::string_view v) { c.seeds = parse_seeds(v); }},
        {"tau", [](ExperimentConfig& c, std::string_view v) { c.tau = parse_real(v); }},
        {"sinkhorn_iters", [](ExperimentConfig& c, std::string_view v) { c.sinkhorn_iters = parse_scalar<int>(v); }},
        {"sinkhorn_tol", [](ExperimentConfig& c, std::string_view v) { c.sinkhorn_tol = parse_real(v); }},
        {"theta", [](ExperimentConfig& c, std::string_view v) { c.theta = parse_real(v); }},
        {"hippi_iters", [](ExperimentConfig& c, std::string_view v) { c.hippi_iters = parse_scalar<int>(v); }},
        {"lambda", [](ExperimentConfig& c, std::string_view v) { c.lambda = parse_real(v); }},
        {"gamma", [](ExperimentConfig& c, std::string_view v) { c.gamma = parse_real(v); }},
        {"alpha", [](ExperimentConfig& c, std::string_view v) { c.alpha = parse_real(v); }},
        {"lr", [](ExperimentConfig& c, std::string_view v) { c.lr = parse_real(v); }},
        {"fit_steps", [](ExperimentConfig& c, std::string_view v) { c.fit_steps = parse_scalar<int>(v); }},
        {"adapt_steps", [](ExperimentConfig& c, std::string_view v) { c.adapt_steps = parse_scalar<int>(v); }},
        {"miter", [](ExperimentConfig& c, std::string_view v) { c.miter = parse_scalar<int>(v); }},
        {"drop_rate", [](ExperimentConfig& c, std::string_view v) { c.drop_rate = parse_real(v); }},
        {"mlp_hidden", [](ExperimentConfig& c, std::string_view v) { c.mlp_hidden = parse_scalar<std::size_t>(v); }},
        {"embedding", [](ExperimentConfig& c, std::string_view v) { c.embedding = std::string(v); }},
        {"out_dir", [](ExperimentConfig& c, std::string_view v) { c.out_dir = std::string(v); }},
    };
    return table;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig config;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto newline = text.find('\n');
        std::string_view line = text.substr(0, newline);
        text.remove_prefix(newline == std::string_view::npos ? text.size() : newline + 1);

        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const std::string where = "line " + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail(ErrorKind::config, where + "expected key=value");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) fail(ErrorKind::config, where + "unknown key '" + std::string(key) + "'");
        try {
            it->second(config, value);
        } catch (const Error& e) {
            fail(ErrorKind::config, where + std::string(key) + ": " + e.message());
        }
    }
    if (config.d_auto) config.d = universe_size(config.classes, config.step);
    config.validate();
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::config, "cannot read config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string render_config(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "mode=" << to_string(c.mode) << '\n'
        << "m=" << c.m << '\n'
        << "n=" << c.n << '\n'
        << "h=" << c.h << '\n'
        << "classes=" << c.classes << '\n'
        << "step=" << c.step << '\n'
        << "d=" << c.d << '\n'
        << "noise_sigma=" << join(c.noise_sigma) << '\n'
        << "outliers=" << c.outliers << '\n'
        << "seeds=" << join(c.seeds) << '\n'
        << "tau=" << format_number(c.tau) << '\n'
        << "sinkhorn_iters=" << c.sinkhorn_iters << '\n'
        << "sinkhorn_tol=" << format_number(c.sinkhorn_tol) << '\n'
        << "theta=" << format_number(c.theta) << '\n'
        << "hippi_iters=" << c.hippi_iters << '\n'
        << "lambda=" << format_number(c.lambda) << '\n'
        << "gamma=" << format_number(c.gamma) << '\n'
        << "alpha=" << format_number(c.alpha) << '\n'
        << "lr=" << format_number(c.lr) << '\n'
        << "fit_steps=" << c.fit_steps << '\n'
        << "adapt_steps=" << c.adapt_steps << '\n'
        << "miter=" << c.miter << '\n'
        << "drop_rate=" << format_number(c.drop_rate) << '\n'
        << "mlp_hidden=" << c.mlp_hidden << '\n';
    if (!c.embedding.empty()) out << "embedding=" << c.embedding << '\n';
    out << "out_dir=" << c.out_dir << '\n';
    return out.str();
}

ReportSummary summarize(const std::vector<ReportRow>& rows) {
    auto stats = [&](auto field) {
        ColumnStats s;
        if (rows.empty()) return s;
        for (const auto& r : rows) s.mean += static_cast<double>(field(r));
        s.mean /= static_cast<double>(rows.size());
        for (const auto& r : rows) {
            const double dev = static_cast<double>(field(r)) - s.mean;
            s.stddev += dev * dev;
        }
        s.stddev = std::sqrt(s.stddev / static_cast<double>(rows.size()));
        return s;
    };
    return {stats([](const ReportRow& r) { return r.accuracy; }),
            stats([](const ReportRow& r) { return r.objective_ratio; }),
            stats([](const ReportRow& r) { return r.cycle_violations; }),
            stats([](const ReportRow& r) { return r.iterations; }),
            stats([](const ReportRow& r) { return r.wall_time_s; })};
}

SeedSetup make_seed_setup(const ExperimentConfig& config, std::uint64_t seed) {
    SeedSetup out;
    Rng proto_rng(child_seed(seed, prototypes_stream));
    out.prototypes = make_prototypes(config.n, config.h, config.classes, proto_rng);

    SyntheticParams params{config.m, config.n, config.h, 0.0, config.outliers, config.classes};
    Rng source_rng(child_seed(seed, source_stream));
    out.source = make_synthetic_from(out.prototypes, params, source_rng);
    out.source.meta.seed = seed;

    // source-phase graphs are built in training mode, so DropEdge applies
    Rng drop_rng(child_seed(seed, dropedge_stream));
    AdjacencyParams adjacency = AdjacencyParams::identity(config.h);
    adjacency.drop_rate = config.drop_rate;
    adjacency.training_mode = true;
    for (auto& g : out.source.graphs) g.adjacency = build_adjacency(g.features, adjacency, drop_rng);

    Rng aff_rng(child_seed(seed, affinity_stream));
    out.affinity = AffinityParams::seeded(config.h, config.mlp_hidden, aff_rng);
    return out;
}

Instance make_test_instance(const ExperimentConfig& config, const Prototypes& prototypes, std::uint64_t seed,
                            double noise_sigma) {
    // Same stream for every noise level: node orders and noise draws line up,
    // only their scale changes.
    SyntheticParams params{config.m, config.n, config.h, noise_sigma, config.outliers, config.classes};
    Rng rng(child_seed(seed, test_stream));
    Instance inst = make_synthetic_from(prototypes, params, rng);
    inst.meta.seed = seed;
    return inst;
}

UniverseEmbedding fit_seed_universe(const ExperimentConfig& config, const SeedSetup& setup, std::uint64_t seed) {
    Rng rng(child_seed(seed, universe_stream));
    return fit_embeddings(setup.source, config.fit(), rng).universe;
}

AssignmentStack truth_stack(const Instance& instance, std::size_t d) {
    require(instance.truth.has_value(), ErrorKind::missing_truth, "instance carries no ground truth");
    AssignmentStack out;
    out.mode = AssignmentMode::binary;
    for (std::size_t g = 0; g < instance.graphs.size(); ++g) {
        const auto& slots = (*instance.truth)[g];
        std::vector<bool> used(d, false);
        for (const auto& s : slots)
            if (s) {
                require(*s < d, ErrorKind::dimension, "truth slot beyond universe size");
                used[*s] = true;
            }
        DenseMatrix block(slots.size(), d);
        std::size_t free_slot = 0;
        for (std::size_t a = 0; a < slots.size(); ++a) {
            if (slots[a]) {
                block(a, *slots[a]) = 1.0;
                continue;
            }
            while (free_slot < d && used[free_slot]) ++free_slot;
            require(free_slot < d, ErrorKind::dimension, "universe too small for outliers");
            used[free_slot] = true;
            block(a, free_slot) = 1.0;
        }
        out.blocks.push_back(std::move(block));
    }
    return out;
}

namespace {

struct Features {
    std::vector<DenseMatrix> v, a;
};

Features split(const Instance& inst) {
    Features f;
    for (const auto& g : inst.graphs) {
        f.v.push_back(g.features);
        f.a.push_back(g.adjacency);
    }
    return f;
}

double ratio(double value, double reference) {
    if (reference == 0.0) return value == 0.0 ? 1.0 : std::copysign(std::numeric_limits<double>::infinity(), value);
    return value / reference;
}

UniverseEmbedding fitted_universe(const ExperimentConfig& config, const SeedSetup& setup, std::uint64_t seed,
                                  std::vector<double>* trace = nullptr) {
    Rng rng(child_seed(seed, universe_stream));
    FitResult fit = fit_embeddings(setup.source, config.fit(), rng);
    if (trace) *trace = std::move(fit.loss_trace);
    return std::move(fit.universe);
}

struct Evaluation {
    double accuracy = 0.0;
    double objective = 0.0;
    std::size_t violations = 0;
};

Evaluation evaluate(const Instance& inst, const AssignmentStack& relaxed, const AffinityParams& aff,
                    double lambda, const std::vector<DenseMatrix>* features = nullptr) {
    const AssignmentStack binary = discretize(relaxed);
    const Features f = split(inst);
    const PairwiseSet m = all_affinities(features ? *features : f.v, aff);
    return {matching_accuracy(binary, inst), multi_kbqap_objective(binary, f.a, m, lambda),
            cycle_violations(expand_matchings(binary))};
}

double gt_objective(const ExperimentConfig& config, const Instance& inst, const AffinityParams& aff,
                    const std::vector<DenseMatrix>* features = nullptr) {
    const Features f = split(inst);
    return multi_kbqap_objective(truth_stack(inst, config.d), f.a, all_affinities(features ? *features : f.v, aff),
                                 config.lambda);
}

UniverseEmbedding load_embedding(const ExperimentConfig& config, std::uint64_t seed) {
    namespace fs = std::filesystem;
    std::string path = config.embedding;
    if (fs::is_directory(path)) path = (fs::path(path) / ("embedding_" + std::to_string(seed) + ".mat")).string();
    if (!fs::exists(path)) fail(ErrorKind::io, "embedding file not found: " + path);
    UniverseEmbedding u{load_matrix(path)};
    if (!(u.h() == config.h)) fail(ErrorKind::dimension,
            "embedding " + path + " has width " + std::to_string(u.h()) + ", config h=" + std::to_string(config.h));
    if (!(u.d() >= config.n + config.outliers)) fail(ErrorKind::dimension,
            "embedding " + path + " has only " + std::to_string(u.d()) + " slots");
    return u;
}

struct SeedOutput {
    std::vector<ReportRow> rows;
    std::vector<Artifact> artifacts;
    std::string loss_lines;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

SeedOutput run_fit_universe(const ExperimentConfig& config, std::uint64_t seed) {
    const auto start = Clock::now();
    const SeedSetup setup = make_seed_setup(config, seed);
    std::vector<double> trace;
    const UniverseEmbedding universe = fitted_universe(config, setup, seed, &trace);

    // report how well the fitted universe matches its own source batch
    const SolveResult solved = solve_multimatch(setup.source.graphs, universe, setup.affinity, config.solver());
    const Evaluation ev = evaluate(setup.source, solved.stack, setup.affinity, config.lambda);
    SeedOutput out;
    out.rows.push_back({seed, 0.0, ev.accuracy, ratio(ev.objective, gt_objective(config, setup.source, setup.affinity)),
                        ev.violations, config.fit_steps, seconds_since(start)});
    std::ostringstream mat;
    write_matrix(mat, universe.weights);
    out.artifacts.push_back({"embedding_" + std::to_string(seed) + ".mat", mat.str()});
    for (std::size_t s = 0; s < trace.size(); ++s)
        out.loss_lines += std::to_string(seed) + ",0," + std::to_string(s) + "," + format_number(trace[s]) + "\n";
    return out;
}

SeedOutput run_tta(const ExperimentConfig& config, std::uint64_t seed) {
    const SeedSetup setup = make_seed_setup(config, seed);
    const UniverseEmbedding universe = load_embedding(config, seed);
    SeedOutput out;
    for (double sigma : config.noise_sigma) {
        const auto start = Clock::now();
        const Instance test = make_test_instance(config, setup.prototypes, seed, sigma);
        const AdaptResult adapted =
            adapt(test, universe, Adapter::identity(config.h), setup.affinity, config.solver(), config.lr,
                  config.adapt_steps);

        std::vector<DenseMatrix> features, adjacency;
        for (const auto& g : test.graphs) {
            features.push_back(matmul(g.features, adapted.adapter.p));
            adjacency.push_back(g.adjacency);
        }
        const SolveResult solved = solve_multimatch(features, adjacency, universe, setup.affinity, config.solver());
        const Evaluation ev = evaluate(test, solved.stack, setup.affinity, config.lambda, &features);
        out.rows.push_back({seed, sigma, ev.accuracy,
                            ratio(ev.objective, gt_objective(config, test, setup.affinity, &features)), ev.violations,
                            solved.iterations, seconds_since(start)});
        for (std::size_t s = 0; s < adapted.loss_trace.size(); ++s)
            out.loss_lines += std::to_string(seed) + "," + format_number(sigma) + "," + std::to_string(s) + "," +
                              format_number(adapted.loss_trace[s]) + "\n";
    }
    return out;
}

SeedOutput run_solver_points(const ExperimentConfig& config, std::uint64_t seed, bool against_oracle) {
    auto start = Clock::now();
    const SeedSetup setup = make_seed_setup(config, seed);
    const UniverseEmbedding universe = fitted_universe(config, setup, seed);
    // the fit is shared by every noise level; charge it to the first row
    SeedOutput out;
    for (double sigma : config.noise_sigma) {
        const Instance test = make_test_instance(config, setup.prototypes, seed, sigma);
        const SolveResult solved = solve_multimatch(test.graphs, universe, setup.affinity, config.solver());
        const Evaluation ev = evaluate(test, solved.stack, setup.affinity, config.lambda);
        double reference = 0.0;
        if (against_oracle) {
            const Features f = split(test);
            reference = brute_force_multi(f.a, all_affinities(f.v, setup.affinity), config.lambda, config.d).objective;
        } else {
            reference = gt_objective(config, test, setup.affinity);
        }
        out.rows.push_back({seed, sigma, ev.accuracy, ratio(ev.objective, reference), ev.violations,
                            solved.iterations, seconds_since(start)});
        start = Clock::now();
    }
    return out;
}

}  // namespace

int configured_workers() {
    const char* env = std::getenv("GRAPHSYNC_THREADS");
    if (!env || !*env) return 0;
    const std::string_view text(env);
    int value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || value < 1)
        fail(ErrorKind::config, "GRAPHSYNC_THREADS must be a positive integer (got '" + std::string(text) + "')");
    return value;
}

RunReport run(const ExperimentConfig& config) {
    config.validate();
    RunReport report{config, {}, {}};
    const std::size_t count = config.seeds.size();
    std::vector<SeedOutput> outputs(count);
    std::vector<std::exception_ptr> errors(count);

    const int workers = configured_workers();
    const long total = static_cast<long>(count);
#pragma omp parallel for schedule(dynamic) num_threads(workers > 0 ? workers : omp_get_max_threads())
    for (long i = 0; i < total; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const std::uint64_t seed = config.seeds[idx];
        try {
            switch (config.mode) {
                case RunMode::fit_universe: outputs[idx] = run_fit_universe(config, seed); break;
                case RunMode::tta: outputs[idx] = run_tta(config, seed); break;
                case RunMode::oracle_compare: outputs[idx] = run_solver_points(config, seed, true); break;
                case RunMode::sweep: outputs[idx] = run_solver_points(config, seed, false); break;
            }
        } catch (...) {
            errors[idx] = std::current_exception();
        }
    }
    // rethrow the first failure in seed-list order
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::string losses;
    for (auto& o : outputs) {
        report.rows.insert(report.rows.end(), o.rows.begin(), o.rows.end());
        for (auto& a : o.artifacts) report.artifacts.push_back(std::move(a));
        losses += o.loss_lines;
    }
    std::stable_sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return a.seed != b.seed ? a.seed < b.seed : a.noise_sigma < b.noise_sigma;
    });
    if (config.mode == RunMode::fit_universe)
        report.artifacts.push_back({"fit_loss.csv", "seed,noise_sigma,step,loss\n" + losses});
    if (config.mode == RunMode::tta)
        report.artifacts.push_back({"adapt_loss.csv", "seed,noise_sigma,step,loss\n" + losses});
    return report;
}

std::string results_csv(const std::vector<ReportRow>& rows) {
    std::string out = "seed,noise_sigma,accuracy,objective_ratio,cycle_violations,iterations,wall_time_s\n";
    for (const auto& r : rows) {
        out += std::to_string(r.seed) + ',' + format_number(r.noise_sigma) + ',' + format_number(r.accuracy) + ',' +
               format_number(r.objective_ratio) + ',' + std::to_string(r.cycle_violations) + ',' +
               std::to_string(r.iterations) + ',' + format_number(r.wall_time_s) + '\n';
    }
    return out;
}

std::string summary_text(const RunReport& report) {
    const ReportSummary s = summarize(report.rows);
    std::ostringstream out;
    auto line = [&](const char* name, const ColumnStats& c) {
        out << name << ": " << format_number(c.mean) << " +- " << format_number(c.stddev) << '\n';
    };
    out << "mode: " << to_string(report.config.mode) << '\n' << "rows: " << report.rows.size() << '\n';
    line("accuracy", s.accuracy);
    line("objective_ratio", s.objective_ratio);
    line("cycle_violations", s.cycle_violations);
    line("iterations", s.iterations);
    line("wall_time_s", s.wall_time_s);

    // per-noise accuracy, the quantity noise sweeps are read for
    std::map<double, std::pair<double, std::size_t>> by_noise;
    for (const auto& r : report.rows) {
        auto& [sum, count] = by_noise[r.noise_sigma];
        sum += r.accuracy;
        ++count;
    }
    for (const auto& [sigma, acc] : by_noise)
        out << "accuracy@noise_sigma=" << format_number(sigma) << ": "
            << format_number(acc.first / static_cast<double>(acc.second)) << '\n';
    return out.str();
}

void write_report(const RunReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create " + out_dir + ": " + ec.message());
    auto put = [&](const std::string& name, const std::string& text) {
        const std::string path = (fs::path(out_dir) / name).string();
        std::ofstream out(path, std::ios::binary);
        out << text;
        out.close();
        if (!out) fail(ErrorKind::io, "cannot write " + path);
    };
    put("results.csv", results_csv(report.rows));
    put("summary.txt", summary_text(report));
    put("config.resolved", render_config(report.config));
    for (const auto& a : report.artifacts) put(a.name, a.text);
}

}  // namespace graphsync
