#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evo/experiment.hpp"
#include "evo/plot.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace evo;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("evo_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Small enough to run in well under a second per method.
const char* kSmall = R"(
nfe_budget: 2000
seeds: [0, 1]
)";

std::string config_error(const std::string& text) {
    try {
        parse_experiment_config(text, "cfg.yaml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

int cli(const std::string& args) {
    const std::string cmd = std::string(EVO_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST_CASE("the shipped example config is the default config") {
    const auto shipped = load_experiment_config(fs::path(EVO_CONFIG_DIR) / "default.yaml");
    CHECK(dump_experiment_config(shipped) == dump_experiment_config(default_experiment_config()));
    CHECK(dump_experiment_config(parse_experiment_config("")) == dump_experiment_config(default_experiment_config()));
}

TEST_CASE("dumped configs parse back to themselves") {
    auto cfg = parse_experiment_config(R"(
model:
  kind: flow
  weights: [0.25, 0.75]
  means: [[-1.0, 0.5], [1.0, 0.0]]
  variances: [0.1, 0.2]
reward: {kind: expression, expression: "-(x - 1)^2 - y^2"}
methods: [best_of_n, evosearch]
nfe_budget: 5000
evosearch: {generations: 2, populations: [64, 32, 32], elites: 2}
seeds: {first: 3, count: 2}
)");
    const auto text = dump_experiment_config(cfg);
    CHECK(dump_experiment_config(parse_experiment_config(text)) == text);
    CHECK(cfg.model.kind == ModelKind::FlowVelocity);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4});
    CHECK(cfg.evosearch.schedule.times == std::vector<int>{50, 25});
}

TEST_CASE("configuration errors name file, line, column and field") {
    struct Case {
        const char* text;
        const char* expected;
    };
    const Case cases[] = {
        {"evosearch:\n  beta: 1.5\n", "cfg.yaml:2:9: evosearch.beta: must lie in [0, 1]"},
        {"model:\n  kind: gan\n", "cfg.yaml:2:9: model.kind:"},
        {"nfe_budget: 2000\nbogus: 1\n", "cfg.yaml:2:1: bogus: unknown key"},
        {"evosearch:\n  elites: -3\n", "cfg.yaml:2:11: evosearch.elites: expected a non-negative integer"},
        {"seeds: [0, x]\n", "cfg.yaml:1:12: seeds[1]:"},
        {"methods: [evosearch, evosearch]\n", "cfg.yaml:1:22: methods[1]: listed twice"},
        {"reward:\n  kind: circle\n  width: 2\n", "cfg.yaml:3:10: reward.width: not used"},
        {"nfe_budget: [1\n", "cfg.yaml:"},
        {"evosearch:\n  populations: [10, 5]\n", "cfg.yaml:2:16: "},
        {"sweep:\n  budgets: [2000, 1000]\n", "cfg.yaml:2:19: sweep.budgets[1]:"},
        {"nfe_budget: 20000\nevosearch:\n  scale_to_budget: false\n  populations: [10, 5, 5, 5, 5, 5]\n",
         "cfg.yaml:4:16: evosearch.populations: costs"},
    };
    for (const auto& c : cases) {
        CAPTURE(c.text);
        const auto msg = config_error(c.text);
        CAPTURE(msg);
        CHECK(msg.rfind(c.expected, 0) == 0);
    }
    CHECK_THROWS_AS(load_experiment_config("/nonexistent/config.yaml"), ConfigError);
}

TEST_CASE("budget resolution") {
    const auto cfg = default_experiment_config();
    const auto r = resolve_methods(cfg, 20000);
    CHECK(r.evosearch.populations.sizes == std::vector<std::size_t>{167, 83, 83, 83, 83, 83});
    CHECK(r.evosearch_nfe == 19970);
    CHECK(r.best_of_n == 400);
    CHECK(r.particle_sampling.num_particles == 400);
    const auto small = resolve_methods(cfg, 2000);
    CHECK(small.evosearch.populations.sizes == std::vector<std::size_t>{17, 8, 8, 8, 8, 8});
    CHECK(small.evosearch_nfe == 1970);
    const auto declared = resolve_methods(cfg, std::nullopt);
    CHECK(declared.evosearch_nfe == 15360);
}

TEST_CASE("run writes the documented artifacts") {
    const auto dir = scratch("run");
    auto cfg = parse_experiment_config(kSmall);
    const auto summaries = run_experiment(cfg, dir, cfg.nfe_budget, {true});
    CHECK(summaries.size() == 6);
    for (const char* f : {"manifest.yaml", "summary.csv", "generations.csv", "curve.svg", "evosearch/scatter.svg",
                          "best_of_n/seed_1/events.csv", "particle_sampling/seed_0/events.csv"}) {
        CAPTURE(f);
        CHECK(fs::exists(dir / f));
    }
    const auto summary = slurp(dir / "summary.csv");
    CHECK(summary.rfind("method,seed,budget,model_calls,events,final_best_reward,top_k_mean_reward,diversity_l2,"
                        "angular_coverage,mode_coverage\n", 0) == 0);
    CHECK(count_lines(summary) == 7);
    const auto events = slurp(dir / "evosearch/seed_0/events.csv");
    CHECK(events.rfind("event_index,generation,cumulative_nfe,reward,x0,x1\n", 0) == 0);
    CHECK(slurp(dir / "curve.svg").find("<polyline") != std::string::npos);
    const auto scatter = slurp(dir / "evosearch/scatter.svg");
    CHECK(scatter.find("<path") != std::string::npos);
    CHECK(scatter.find("<circle") != std::string::npos);

    // Every summary number is recomputable from the event log.
    const auto resolved = resolve_methods(cfg, cfg.nfe_budget);
    const auto log = read_event_log(dir / "evosearch/seed_1/events.csv");
    const auto again = summarize_events("evosearch", 1, 2000, log, 10, cfg.coverage, cfg.model.mixture);
    const auto& s = summaries[1];
    CHECK(again.final_best == s.final_best);
    CHECK(again.diversity == s.diversity);
    CHECK(again.model_calls == resolved.evosearch_nfe);
}

TEST_CASE("best-of-N with n = 4 logs exactly four events") {
    const auto dir = scratch("bon4");
    const auto cfg = parse_experiment_config("method: best_of_n\nnfe_budget: null\nbest_of_n: {n: 4}\nseeds: [0]\n");
    run_experiment(cfg, dir, cfg.nfe_budget, {true});
    CHECK(count_lines(slurp(dir / "best_of_n/seed_0/events.csv")) == 5);
}

TEST_CASE("runs are byte-for-byte reproducible and the manifest reproduces the run") {
    const auto a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
    auto cfg = parse_experiment_config(kSmall);
    run_experiment(cfg, a, cfg.nfe_budget, {true});
    cfg.policy = ExecPolicy::Parallel;
    run_experiment(cfg, b, cfg.nfe_budget, {true});
    const auto manifest = load_experiment_config(a / "manifest.yaml");
    run_experiment(manifest, c, manifest.nfe_budget, {true});
    for (const char* f : {"summary.csv", "generations.csv", "curve.svg", "evosearch/seed_0/events.csv",
                          "best_of_n/seed_1/events.csv", "particle_sampling/seed_1/events.csv", "evosearch/scatter.svg"}) {
        CAPTURE(f);
        CHECK(slurp(a / f) == slurp(b / f));
        CHECK(slurp(a / f) == slurp(c / f));
    }
}

TEST_CASE("sweeps") {
    const auto cfg = parse_experiment_config(kSmall);
    SUBCASE("a singleton sweep is a run") {
        const auto s = scratch("sweep1"), r = scratch("sweep1_run");
        sweep_experiment(cfg, s, {2000}, {true});
        run_experiment(cfg, r, 2000, {true});
        for (const char* f : {"summary.csv", "evosearch/seed_0/events.csv", "particle_sampling/seed_1/events.csv"}) {
            CHECK(slurp(s / "budget_2000" / f) == slurp(r / f));
        }
        CHECK(fs::exists(s / "sweep.csv"));
        CHECK(fs::exists(s / "scaling.svg"));
    }
    SUBCASE("doubling the budget never lowers the EvoSearch running best") {
        const auto s = scratch("sweep2");
        auto nested = cfg;
        nested.methods = {Method::EvoSearch};
        nested.seeds = {0, 1, 2, 3, 4};
        sweep_experiment(nested, s, {2000, 4000}, {true});
        for (auto seed : nested.seeds) {
            const auto seed_path = fs::path("evosearch") / ("seed_" + std::to_string(seed)) / "events.csv";
            const auto small = read_event_log(s / "budget_2000" / seed_path);
            const auto large = read_event_log(s / "budget_4000" / seed_path);
            const auto curve = reward_summary(large).curve;
            CHECK(best_at(curve, 4000) >= best_at(curve, 2000));
            // The first generation of the larger run contains the first
            // generation of the smaller one, sample for sample.
            std::size_t first_gen = 0;
            while (first_gen < small.size() && small[first_gen].generation == 0) ++first_gen;
            double small_gen0 = -INFINITY, large_gen0 = -INFINITY;
            for (std::size_t i = 0; i < first_gen; ++i) {
                CHECK(small[i].x == large[i].x);
                small_gen0 = std::max(small_gen0, small[i].reward);
            }
            for (const auto& e : large) {
                if (e.generation == 0) large_gen0 = std::max(large_gen0, e.reward);
            }
            CHECK(large_gen0 >= small_gen0);
        }
    }
    SUBCASE("budgets must ascend") {
        CHECK_THROWS_AS(sweep_experiment(cfg, scratch("sweep3"), {4000, 2000}, {true}), ConfigError);
        CHECK_THROWS_AS(sweep_experiment(cfg, scratch("sweep3"), {}, {true}), ConfigError);
    }
}

TEST_CASE("compare") {
    const auto a = scratch("cmp_a");
    const auto cfg = parse_experiment_config(kSmall);
    run_experiment(cfg, a, cfg.nfe_budget, {true});

    SUBCASE("a run compared with itself gives identical rows, one per method") {
        const auto rows = compare_runs({a, a});
        REQUIRE(rows.size() == 6);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(rows[i].method == rows[i + 3].method);
            CHECK(rows[i].final_best_mean == rows[i + 3].final_best_mean);
            CHECK(rows[i].diversity_mean == rows[i + 3].diversity_mean);
            CHECK(rows[i].nfe_mean == rows[i + 3].nfe_mean);
        }
        CHECK(comparison_markdown(rows).find("| evosearch |") != std::string::npos);
        CHECK(count_lines(comparison_csv(rows)) == 7);
    }
    SUBCASE("degenerate EvoSearch and best-of-N configs give identical rows") {
        const auto e = scratch("cmp_evo"), b = scratch("cmp_bon");
        const auto evo = parse_experiment_config(
            "method: evosearch\nnfe_budget: 800\nevosearch: {schedule: [50], populations: [16, 16], elites: 0, "
            "tournament_size: 1, scale_to_budget: false}\nseeds: [0, 1]\n");
        const auto bon = parse_experiment_config("method: best_of_n\nnfe_budget: 800\nseeds: [0, 1]\n");
        run_experiment(evo, e, evo.nfe_budget, {true});
        run_experiment(bon, b, bon.nfe_budget, {true});
        const auto rows = compare_runs({e, b});
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].final_best_mean == rows[1].final_best_mean);
        CHECK(rows[0].final_best_std == rows[1].final_best_std);
        CHECK(rows[0].diversity_mean == rows[1].diversity_mean);
        CHECK(rows[0].angular_coverage_mean == rows[1].angular_coverage_mean);
        CHECK(rows[0].nfe_mean == rows[1].nfe_mean);
    }
    SUBCASE("runs with different rewards are not comparable") {
        const auto other = scratch("cmp_other");
        const auto c = parse_experiment_config("method: best_of_n\nnfe_budget: 500\nreward: {kind: circle, radius: 1.5}\nseeds: [0]\n");
        run_experiment(c, other, c.nfe_budget, {true});
        CHECK_THROWS_AS(compare_runs({a, other}), ConfigError);
    }
    SUBCASE("a directory without a manifest is a runtime error") {
        CHECK_THROWS_AS(compare_runs({scratch("cmp_empty")}), RuntimeError);
    }
}

TEST_CASE("command-line interface exit codes") {
    const auto dir = scratch("cli");
    {
        std::ofstream(dir / "ok.yaml") << kSmall << "methods: [best_of_n]\n";
        std::ofstream(dir / "bad.yaml") << "evosearch:\n  beta: 2\n";
    }
    const auto out = (dir / "out").string();
    CHECK(cli("run " + (dir / "ok.yaml").string() + " --quiet --output-dir " + out) == 0);
    CHECK(fs::exists(dir / "out" / "summary.csv"));
    CHECK(cli("run " + (dir / "ok.yaml").string() + " --quiet --seed-override 7 --output-dir " + out + "_7") == 0);
    CHECK(fs::exists(dir / "out_7" / "best_of_n" / "seed_7" / "events.csv"));
    CHECK_FALSE(fs::exists(dir / "out_7" / "best_of_n" / "seed_0"));
    CHECK(cli("sweep " + (dir / "ok.yaml").string() + " --budgets 1000,2000 --quiet --output-dir " + out + "_sweep") == 0);
    CHECK(fs::exists(dir / "out_sweep" / "sweep.csv"));
    CHECK(cli("compare " + out + " " + out + " --quiet --output-dir " + out) == 0);
    CHECK(fs::exists(dir / "out" / "comparison.md"));

    CHECK(cli("run " + (dir / "bad.yaml").string()) == 2);
    CHECK(cli("run " + (dir / "missing.yaml").string()) == 2);
    CHECK(cli("") == 2);
    CHECK(cli("frobnicate") == 2);
    CHECK(cli("sweep " + (dir / "ok.yaml").string() + " --budgets 2000,1000") == 2);
    CHECK(cli("compare " + (dir / "nowhere").string()) == 3);
}

TEST_CASE("contour extraction") {
    // f(x, y) = x on a 3 x 3 grid: the level 0.5 contour is the vertical line x = 0.5.
    std::vector<double> v;
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) v.push_back(i);
    }
    const auto segs = contour_segments(v, 3, 3, 0.0, 0.0, 1.0, 1.0, 0.5);
    CHECK(segs.size() == 2);
    for (const auto& s : segs) {
        CHECK(s.x0 == doctest::Approx(0.5));
        CHECK(s.x1 == doctest::Approx(0.5));
    }
    CHECK(contour_segments(v, 3, 3, 0.0, 0.0, 1.0, 1.0, 5.0).empty());
    CHECK_THROWS(contour_segments(v, 2, 3, 0.0, 0.0, 1.0, 1.0, 0.5));
}
