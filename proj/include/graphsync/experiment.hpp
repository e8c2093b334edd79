#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "graphsync/graphgen.hpp"
#include "graphsync/qapsolve.hpp"
#include "graphsync/universe.hpp"

namespace graphsync {

enum class RunMode { fit_universe, tta, oracle_compare, sweep };

std::string_view to_string(RunMode mode);
/// Throws a config error for unknown names.
RunMode parse_mode(std::string_view name);

struct ExperimentConfig {
    RunMode mode = RunMode::sweep;
    std::size_t m = 4;
    std::size_t n = 6;
    std::size_t h = 256;
    std::size_t classes = 2;
    std::size_t step = 5;
    std::size_t d = 120;
    bool d_auto = false;
    std::vector<double> noise_sigma{0.0};
    std::size_t outliers = 0;
    std::vector<std::uint64_t> seeds{1};
    double tau = 0.05;
    int sinkhorn_iters = 20;
    double sinkhorn_tol = 1e-6;
    double theta = 1e-5;
    int hippi_iters = 100;
    double lambda = 1.0;
    double gamma = 2.0;
    double alpha = 1e-3;
    double lr = 1e-3;
    int fit_steps = 200;
    int adapt_steps = 50;
    int miter = 30;
    double drop_rate = 0.1;
    std::size_t mlp_hidden = 8;
    /// Embedding file, or a directory holding embedding_<seed>.mat (tta).
    std::string embedding;
    std::string out_dir = "out";

    /// Throws a config error naming the violated invariant.
    void validate() const;
    SinkhornParams sinkhorn() const;
    FitConfig fit() const;
    SolverParams solver() const;
};

/// key=value lines, '#' comments, blank lines ignored. Unknown keys,
/// malformed values and broken invariants raise config errors that name the
/// line.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);
/// Canonical key=value rendering of every field; parses back to the same
/// config.
std::string render_config(const ExperimentConfig& config);

struct ReportRow {
    std::uint64_t seed = 0;
    double noise_sigma = 0.0;
    double accuracy = 0.0;
    double objective_ratio = 0.0;
    std::size_t cycle_violations = 0;
    int iterations = 0;
    double wall_time_s = 0.0;
};

/// Extra file produced by a run (embeddings, loss curves).
struct Artifact {
    std::string name;
    std::string text;
};

struct RunReport {
    ExperimentConfig config;
    std::vector<ReportRow> rows;
    std::vector<Artifact> artifacts;
};

struct ColumnStats {
    double mean = 0.0;
    double stddev = 0.0;
};

/// Mean and population standard deviation of the named numeric columns.
struct ReportSummary {
    ColumnStats accuracy, objective_ratio, cycle_violations, iterations, wall_time_s;
};
ReportSummary summarize(const std::vector<ReportRow>& rows);

/// Runs every (seed, noise) point of the configured mode. Rows come back
/// sorted by (seed, noise_sigma) whatever the worker count.
RunReport run(const ExperimentConfig& config);

/// Seed-level building blocks shared by the modes; exposed for tests.
struct SeedSetup {
    Prototypes prototypes;
    Instance source;
    AffinityParams affinity;
};
SeedSetup make_seed_setup(const ExperimentConfig& config, std::uint64_t seed);
Instance make_test_instance(const ExperimentConfig& config, const Prototypes& prototypes, std::uint64_t seed,
                            double noise_sigma);
/// Universe fitted on setup.source with the seed's own stream, as every mode
/// does before freezing it.
UniverseEmbedding fit_seed_universe(const ExperimentConfig& config, const SeedSetup& setup, std::uint64_t seed);
/// Binary stack placing each inlier in its ground-truth slot and outliers in
/// the remaining slots in node order.
AssignmentStack truth_stack(const Instance& instance, std::size_t d);

std::string results_csv(const std::vector<ReportRow>& rows);
std::string summary_text(const RunReport& report);
/// Writes results.csv, summary.txt, config.resolved and every artifact.
void write_report(const RunReport& report, const std::string& out_dir);

/// Worker count from GRAPHSYNC_THREADS; 0 when unset (runtime default).
int configured_workers();

}  // namespace graphsync
