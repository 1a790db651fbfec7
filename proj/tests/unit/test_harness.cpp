#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "supcfa/classify.hpp"
#include "supcfa/harness.hpp"
#include "test_util.hpp"

using namespace supcfa;
using supcfa::testing::count_lines;
using supcfa::testing::read_file;
using supcfa::testing::TempDir;

namespace {

SyntheticSpec spec(double noise, std::uint64_t seed = 5) {
    SyntheticSpec s;
    s.n = 200;
    s.d_image = 16;
    s.d_text = 12;
    s.num_classes = 4;
    s.shared_dim = 4;
    s.noise_sigma = noise;
    s.seed = seed;
    return s;
}

ExperimentConfig config_for(const SyntheticSpec& s, std::size_t folds = 5) {
    ExperimentConfig c;
    c.dataset.synthetic = s;
    c.hyperparams.shared_dim = s.shared_dim;
    c.num_folds = folds;
    c.seed = 11;
    c.threads = 2;
    return c;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

} // namespace

TEST_CASE("summarize") {
    SUBCASE("constant data") {
        const BoxSummary s = summarize(std::vector<double>(10, 0.8));
        for (double v : {s.min, s.q1, s.median, s.q3, s.max}) CHECK(v == 0.8);
    }
    SUBCASE("even count") {
        const BoxSummary s = summarize({0.8, 0.2, 0.6, 0.4});
        CHECK(s.median == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(s.q1 == doctest::Approx(0.35).epsilon(1e-15));
        CHECK(s.q3 == doctest::Approx(0.65).epsilon(1e-15));
        CHECK(s.min == 0.2);
        CHECK(s.max == 0.8);
    }
    SUBCASE("odd count") {
        const BoxSummary s = summarize({5, 1, 3, 2, 4});
        CHECK(s.median == 3.0);
        CHECK(s.q1 == 2.0);
        CHECK(s.q3 == 4.0);
    }
    CHECK_THROWS_AS(summarize({}), std::invalid_argument);
}

TEST_CASE("k = 2 on four documents") {
    const Dataset d = Dataset::from_class_indices({{1, 0}, {0, 1}, {1, 0.1}, {0.1, 1}}, {{1, 0}, {0, 1}, {1, 0.2}, {0.2, 1}},
                                                  std::vector<std::size_t>{0, 1, 0, 1}, 2);
    ExperimentConfig c;
    c.dataset.path = "unused";
    c.hyperparams.shared_dim = 1;
    c.num_folds = 2;
    // Pick a seed whose folds keep both classes in every training split.
    for (c.seed = 0;; ++c.seed) {
        const FoldPlan plan = make_folds(d, 2, c.seed);
        bool ok = true;
        for (std::size_t f = 0; f < 2; ++f) ok = ok && d.subset(plan.train_indices(f)).class_counts() == std::vector<std::size_t>{1, 1};
        if (ok) break;
    }
    const ExperimentReport r = run_cv(c, d);
    REQUIRE(r.methods.size() == 2);
    for (const MethodResult& m : r.methods) {
        CHECK(m.fold_rates.size() == 2);
        CHECK(m.fold_events == std::vector<std::size_t>{4, 4});
    }
    CHECK(r.supcfa_traces.size() == 2);
}

TEST_CASE("a fold missing a class in training is reported") {
    const Dataset d = Dataset::from_class_indices({{1.0}, {2.0}, {3.0}}, {{1.0}, {2.0}, {3.0}}, std::vector<std::size_t>{0, 0, 1}, 2);
    ExperimentConfig c;
    c.dataset.path = "unused";
    c.hyperparams.shared_dim = 1;
    c.num_folds = 3;
    try {
        (void)run_cv(c, d);
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("absent from the training split") != std::string::npos);
    }
}

TEST_CASE("run_cv is deterministic regardless of thread count") {
    ExperimentConfig c = config_for(spec(0.3));
    const ExperimentReport a = run_cv(c);
    c.threads = 1;
    const ExperimentReport b = run_cv(c);
    REQUIRE(a.methods.size() == b.methods.size());
    for (std::size_t i = 0; i < a.methods.size(); ++i) CHECK(a.methods[i].fold_rates == b.methods[i].fold_rates);
    for (std::size_t f = 0; f < a.supcfa_traces.size(); ++f) {
        REQUIRE(a.supcfa_traces[f].size() == b.supcfa_traces[f].size());
        for (std::size_t t = 0; t < a.supcfa_traces[f].size(); ++t)
            CHECK(a.supcfa_traces[f][t].primal_objective == b.supcfa_traces[f][t].primal_objective);
    }
}

TEST_CASE("end-to-end rates") {
    SUBCASE("noiseless data: supcfa mean rate ≥ 0.95, baseline well above chance") {
        const ExperimentReport r = run_cv(config_for(spec(0.0)));
        for (const MethodResult& m : r.methods) {
            for (double rate : m.fold_rates) {
                CHECK(rate >= 0.0);
                CHECK(rate <= 1.0);
            }
            if (m.method == Method::supcfa) CHECK(mean(m.fold_rates) >= 0.95);
            else CHECK(mean(m.fold_rates) >= 0.25 + 0.2);
        }
    }
    SUBCASE("permuted labels bring the baseline to chance") {
        const Dataset d = generate_synthetic(spec(0.3));
        std::vector<std::size_t> perm(d.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), std::mt19937_64(77));
        ExperimentConfig c = config_for(spec(0.3));
        c.methods = {Method::cfa_baseline};
        const ExperimentReport r = run_cv(c, d.with_labels_from(perm));
        CHECK(std::abs(mean(r.methods[0].fold_rates) - 0.25) <= 0.15);
    }
    SUBCASE("training-set rate is at least the held-out rate on separable data") {
        const Dataset d = generate_synthetic(spec(0.3));
        const FoldPlan plan = make_folds(d, 4, 1);
        const Dataset train = d.subset(plan.train_indices(0));
        const Dataset test = d.subset(plan.test_indices(0));
        Hyperparams hp;
        hp.shared_dim = 4;
        CHECK(run_baseline_cfa(train, train, hp) >= run_baseline_cfa(train, test, hp));
    }
    SUBCASE("standardization is fitted per training fold and keeps rates sane") {
        ExperimentConfig c = config_for(spec(0.0));
        c.standardize = true;
        const ExperimentReport r = run_cv(c);
        CHECK(mean(r.methods[0].fold_rates) >= 0.95);
    }
}

TEST_CASE("emit_convergence") {
    TempDir dir;
    TrainTrace trace;
    for (std::size_t t = 1; t <= 5; ++t) {
        TraceRecord rec;
        rec.iteration = t;
        rec.primal_objective = 100.0 / 3.0 + 1.0 / static_cast<double>(t * 7);
        rec.qp_dual_objective = 0.1 * static_cast<double>(t) + 1e-17;
        trace.push_back(rec);
    }
    emit_convergence(trace, dir / "c.csv");
    const auto rows = read_csv(dir / "c.csv");
    REQUIRE(rows.size() == 6);
    CHECK(rows[0] == std::vector<std::string>{"iteration", "primal_objective", "qp_dual_objective"});
    for (std::size_t t = 0; t < 5; ++t) {
        CHECK(std::stoul(rows[t + 1][0]) == t + 1);
        CHECK(std::stod(rows[t + 1][1]) == trace[t].primal_objective);
        CHECK(std::stod(rows[t + 1][2]) == trace[t].qp_dual_objective);
    }
    CHECK_THROWS(emit_convergence({}, dir / "e.csv"));
    CHECK_THROWS(emit_convergence(trace, dir / "missing" / "c.csv"));
}

TEST_CASE("synthetic training converges: last ten iterations are flat") {
    const Dataset d = generate_synthetic(spec(0.3));
    Hyperparams hp;
    hp.shared_dim = 4;
    hp.outer_tol = 0.0;
    hp.max_iters = 40;
    const TrainTrace trace = fit_supervised(d, hp).trace;
    REQUIRE(trace.size() == 40);
    const double a = trace[29].primal_objective, b = trace[39].primal_objective;
    CHECK(std::abs(b - a) / std::abs(a) < 1e-3);
}

TEST_CASE("emit_boxplot_data") {
    TempDir dir;
    ExperimentReport r;
    MethodResult m;
    m.method = Method::cfa_baseline;
    m.fold_rates = {0.2, 0.4, 0.6, 0.8};
    m.fold_events = {2, 2, 2, 2};
    m.summary = summarize(m.fold_rates);
    r.methods.push_back(m);
    emit_boxplot_data(r, dir / "box.csv", dir / "raw.csv");
    const auto box = read_csv(dir / "box.csv");
    REQUIRE(box.size() == 2);
    CHECK(box[0] == std::vector<std::string>{"method", "min", "q1", "median", "q3", "max"});
    CHECK(box[1][0] == "cfa_baseline");
    CHECK(std::stod(box[1][3]) == doctest::Approx(0.5).epsilon(1e-15));
    const auto raw = read_csv(dir / "raw.csv");
    REQUIRE(raw.size() == 5);
    CHECK(raw[0] == std::vector<std::string>{"method", "fold", "rate"});
    CHECK(std::stod(raw[3][2]) == 0.6);
    CHECK(count_lines(dir / "raw.csv") == 5);
}

TEST_CASE("experiment config parsing") {
    SUBCASE("relative paths resolve against the config directory") {
        const auto c = experiment_config_from_json(
            R"({"dataset":{"path":"data.jsonl"},"hyperparams":{"shared_dim":2},"num_folds":3,"seed":4})", "/base");
        CHECK(*c.dataset.path == std::filesystem::path("/base/data.jsonl"));
        CHECK(c.num_folds == 3);
        CHECK(c.methods.size() == 2);
    }
    SUBCASE("round trip through JSON") {
        ExperimentConfig c = config_for(spec(0.1));
        c.methods = {Method::cfa_baseline};
        c.init = Initialization::random(9);
        const ExperimentConfig back = experiment_config_from_json(experiment_config_to_json(c));
        CHECK(experiment_config_to_json(back) == experiment_config_to_json(c));
    }
    SUBCASE("rejections") {
        CHECK_THROWS_AS(experiment_config_from_json(R"({"dataset":{"path":"x"},"hyperparams":{"shared_dim":2},"bogus":1})"),
                        std::invalid_argument);
        CHECK_THROWS_AS(experiment_config_from_json(R"({"dataset":{"path":"x"},"hyperparams":{"shared_dim":2},"num_folds":1})"),
                        std::invalid_argument);
        CHECK_THROWS_AS(experiment_config_from_json(R"({"dataset":{},"hyperparams":{"shared_dim":2}})"),
                        std::invalid_argument);
        CHECK_THROWS_AS(
            experiment_config_from_json(R"({"dataset":{"path":"x"},"hyperparams":{"shared_dim":2},"methods":["svm"]})"),
            std::invalid_argument);
        CHECK_THROWS(experiment_config_from_json("{"));
    }
}

TEST_CASE("shipped configs load") {
    const std::filesystem::path root = SUPCFA_SOURCE_DIR;
    const auto bench = load_experiment_config(root / "configs" / "benchmark.json");
    CHECK(bench.num_folds == 10);
    CHECK(bench.dataset.synthetic.has_value());
    const auto noiseless = load_experiment_config(root / "configs" / "noiseless.json");
    CHECK(noiseless.dataset.synthetic->noise_sigma == 0.0);
}
