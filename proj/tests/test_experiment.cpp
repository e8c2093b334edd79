#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "graphsync/experiment.hpp"
#include "graphsync/oracle.hpp"

using namespace graphsync;

namespace {

std::string config_error(std::string_view text) {
    try {
        parse_config(text);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
        return e.message();
    }
    FAIL("expected a config error");
    return {};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

ExperimentConfig tiny_sweep() {
    return parse_config(
        "mode=sweep\nm=3\nn=3\nh=4\nd=5\nnoise_sigma=0,0.1\nseeds=1..3\nfit_steps=5\nadapt_steps=2\n"
        "miter=5\nhippi_iters=10\n");
}

}  // namespace

TEST_CASE("empty config is the default config") {
    const ExperimentConfig c = parse_config("");
    const ExperimentConfig d;
    CHECK(c.mode == d.mode);
    CHECK(c.m == d.m);
    CHECK(c.h == d.h);
    CHECK(c.d == d.d);
    CHECK(c.tau == d.tau);
    CHECK(c.miter == d.miter);
    CHECK(c.seeds == d.seeds);
    CHECK(parse_config("# only a comment\n\n   \n").m == d.m);
}

TEST_CASE("config values, lists, ranges and auto universe size") {
    const ExperimentConfig c = parse_config("classes = 2\nstep = 10\nd = auto\nnoise_sigma=0, 0.05,0.1\n"
                                            "seeds=3,7..9\nmode=oracle-compare # trailing comment\n");
    CHECK(c.d == 30);
    CHECK(c.d_auto);
    CHECK(c.noise_sigma == std::vector<double>{0.0, 0.05, 0.1});
    CHECK(c.seeds == std::vector<std::uint64_t>{3, 7, 8, 9});
    CHECK(c.mode == RunMode::oracle_compare);
}

TEST_CASE("config errors name the offending line") {
    CHECK(config_error("m=3\ntau=-1\n").find("tau") != std::string::npos);
    CHECK(config_error("m=3\nbogus=1\n").find("line 2") != std::string::npos);
    CHECK(config_error("m=3\nbogus=1\n").find("bogus") != std::string::npos);
    CHECK(config_error("m=x\n").find("line 1") != std::string::npos);
    CHECK(config_error("just words\n").find("key=value") != std::string::npos);
    CHECK(config_error("seeds=5..2\n").find("line 1") != std::string::npos);
    CHECK(config_error("mode=dance\n").find("dance") != std::string::npos);
    CHECK(config_error("n=6\noutliers=2\nd=7\n").find("outliers") != std::string::npos);
    CHECK(config_error("mode=tta\n").find("embedding") != std::string::npos);
    CHECK(config_error("drop_rate=2\n").find("drop_rate") != std::string::npos);
}

TEST_CASE("rendered configs parse back to the same config") {
    ExperimentConfig c = parse_config("mode=fit-universe\nm=3\nn=4\nh=16\nd=9\nnoise_sigma=0,0.25\nseeds=4..6\n"
                                      "tau=0.125\nlambda=0.5\nout_dir=some dir\n");
    const std::string text = render_config(c);
    CHECK(render_config(parse_config(text)) == text);
    const ExperimentConfig back = parse_config(text);
    CHECK(back.noise_sigma == c.noise_sigma);
    CHECK(back.tau == c.tau);
    CHECK(back.out_dir == "some dir");
    CHECK(render_config(parse_config(render_config(ExperimentConfig{}))) == render_config(ExperimentConfig{}));
}

TEST_CASE("summary statistics match a direct recomputation") {
    std::vector<ReportRow> rows;
    for (int i = 0; i < 7; ++i)
        rows.push_back(ReportRow{static_cast<std::uint64_t>(i), 0.0, 0.1 * i, 1.0 - 0.05 * i,
                                 static_cast<std::size_t>(i % 2), 3 + i, 0.01 * i * i});
    const ReportSummary s = summarize(rows);
    double mean = 0.0;
    for (const auto& r : rows) mean += r.accuracy;
    mean /= 7.0;
    double var = 0.0;
    for (const auto& r : rows) var += (r.accuracy - mean) * (r.accuracy - mean);
    CHECK(std::abs(s.accuracy.mean - mean) <= 1e-12);
    CHECK(std::abs(s.accuracy.stddev - std::sqrt(var / 7.0)) <= 1e-12);
    CHECK(std::abs(s.iterations.mean - 6.0) <= 1e-12);
    CHECK(summarize({}).accuracy.mean == 0.0);
}

TEST_CASE("reports on disk") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "graphsync_report_test";
    fs::remove_all(dir);

    RunReport empty{ExperimentConfig{}, {}, {}};
    write_report(empty, dir.string());
    CHECK(count_lines(slurp(dir / "results.csv")) == 1);
    CHECK(parse_config(slurp(dir / "config.resolved")).m == ExperimentConfig{}.m);

    RunReport two{ExperimentConfig{}, {ReportRow{1, 0.0, 1.0, 1.0, 0, 2, 0.5}, ReportRow{2, 0.1, 0.5, 0.9, 1, 3, 0.25}},
                  {Artifact{"extra.txt", "hello\n"}}};
    write_report(two, dir.string());
    CHECK(count_lines(slurp(dir / "results.csv")) == 3);
    CHECK(slurp(dir / "extra.txt") == "hello\n");
    CHECK(slurp(dir / "summary.txt").find("rows: 2") != std::string::npos);
    fs::remove_all(dir);

    // a regular file where the directory should go
    const fs::path blocker = fs::temp_directory_path() / "graphsync_report_blocker";
    std::ofstream(blocker) << "x";
    CHECK_THROWS_AS(write_report(empty, (blocker / "sub").string()), Error);
    fs::remove(blocker);
}

TEST_CASE("truth stacks are exact on their own instances") {
    const ExperimentConfig c = tiny_sweep();
    const SeedSetup setup = make_seed_setup(c, 1);
    const Instance inst = make_test_instance(c, setup.prototypes, 1, 0.1);
    const AssignmentStack truth = truth_stack(inst, c.d);
    CHECK(truth.satisfies_invariants());
    CHECK(matching_accuracy(truth, inst) == 1.0);
    CHECK(cycle_violations(expand_matchings(truth)) == 0);
}

TEST_CASE("sweep runs are sorted and deterministic") {
    const ExperimentConfig c = tiny_sweep();
    const RunReport a = run(c);
    REQUIRE(a.rows.size() == 6);
    for (std::size_t r = 1; r < a.rows.size(); ++r) {
        const auto& p = a.rows[r - 1];
        const auto& q = a.rows[r];
        CHECK((p.seed < q.seed || (p.seed == q.seed && p.noise_sigma < q.noise_sigma)));
    }
    for (const auto& row : a.rows) {
        CHECK((row.accuracy >= 0.0 && row.accuracy <= 1.0));
        CHECK(row.cycle_violations == 0);
    }
    const RunReport b = run(c);
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
        CHECK(a.rows[r].accuracy == b.rows[r].accuracy);
        CHECK(a.rows[r].objective_ratio == b.rows[r].objective_ratio);
        CHECK(a.rows[r].iterations == b.rows[r].iterations);
    }
}
