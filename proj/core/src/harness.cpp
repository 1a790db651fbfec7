#include "supcfa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "json_io.hpp"
#include "supcfa/classify.hpp"
#include "supcfa/model_io.hpp"

namespace supcfa {

namespace {

using detail::json;

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    return out;
}

struct FoldOutcome {
    std::vector<double> rates;   // per configured method
    std::vector<std::size_t> events;
    TrainTrace trace;
};

FoldOutcome run_fold(const ExperimentConfig& config, const Dataset& dataset, const FoldPlan& plan, std::size_t fold) {
    const auto train_idx = plan.train_indices(fold);
    const auto test_idx = plan.test_indices(fold);
    Dataset train = dataset.subset(train_idx);
    Dataset test = dataset.subset(test_idx);
    const auto counts = train.class_counts();
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) {
            throw std::runtime_error("fold " + std::to_string(fold) + ": class " +
                                     std::to_string(dataset.class_ids()[k]) +
                                     " is absent from the training split; try a different seed or fewer folds");
        }
    }
    if (config.standardize) {
        const Standardizer s = Standardizer::fit(train);
        train = s.apply(train);
        test = s.apply(test);
    }
    FoldOutcome out;
    for (Method m : config.methods) {
        if (m == Method::supcfa) {
            TrainResult r = fit_supervised(train, config.hyperparams, config.init);
            out.rates.push_back(evaluate_rate(r.params, test));
            out.trace = std::move(r.trace);
        } else {
            out.rates.push_back(run_baseline_cfa(train, test, config.hyperparams));
        }
        out.events.push_back(2 * test.size());
    }
    return out;
}

} // namespace

Method parse_method(const std::string& name) {
    if (name == "supcfa") return Method::supcfa;
    if (name == "cfa_baseline") return Method::cfa_baseline;
    throw std::invalid_argument("unknown method '" + name + "' (expected supcfa or cfa_baseline)");
}

const char* to_string(Method m) { return m == Method::supcfa ? "supcfa" : "cfa_baseline"; }

void ExperimentConfig::validate() const {
    if (num_folds < 2) throw std::invalid_argument("config: num_folds must be >= 2");
    if (methods.empty()) throw std::invalid_argument("config: methods must be nonempty");
    for (std::size_t i = 0; i < methods.size(); ++i)
        for (std::size_t j = i + 1; j < methods.size(); ++j)
            if (methods[i] == methods[j]) throw std::invalid_argument("config: duplicate method");
    if (dataset.path.has_value() == dataset.synthetic.has_value())
        throw std::invalid_argument("config: dataset needs exactly one of 'path' or 'synthetic'");
    if (dataset.synthetic) dataset.synthetic->validate();
}

ExperimentConfig experiment_config_from_json(const std::string& text, const std::filesystem::path& base_dir) {
    const json j = detail::parse_json(text, "config");
    detail::reject_unknown_keys(
        j, {"dataset", "hyperparams", "num_folds", "seed", "methods", "init", "init_seed", "standardize", "threads"},
        "config");
    ExperimentConfig c;
    try {
        const json& ds = j.at("dataset");
        detail::reject_unknown_keys(ds, {"path", "format", "synthetic"}, "config.dataset");
        if (ds.contains("path")) {
            std::filesystem::path p = ds["path"].get<std::string>();
            c.dataset.path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
            c.dataset.format = parse_dataset_format(ds.value("format", std::string("jsonl")));
        }
        if (ds.contains("synthetic")) c.dataset.synthetic = detail::synthetic_spec_from(ds["synthetic"]);
        c.hyperparams = detail::hyperparams_from(j.at("hyperparams"));
        c.num_folds = j.value("num_folds", c.num_folds);
        c.seed = j.value("seed", c.seed);
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j["methods"]) c.methods.push_back(parse_method(m.get<std::string>()));
        }
        const std::string init = j.value("init", std::string("unsupervised"));
        if (init == "unsupervised") c.init = Initialization::unsupervised();
        else if (init == "random") c.init = Initialization::random(j.value("init_seed", c.seed));
        else throw std::invalid_argument("config: init must be 'unsupervised' or 'random'");
        c.standardize = j.value("standardize", c.standardize);
        c.threads = j.value("threads", c.threads);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return experiment_config_from_json(read_text_file(path), path.parent_path());
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
    json j;
    json ds = json::object();
    if (c.dataset.path) {
        ds["path"] = c.dataset.path->string();
        ds["format"] = c.dataset.format == DatasetFormat::jsonl ? "jsonl" : "csv-pair";
    }
    if (c.dataset.synthetic) ds["synthetic"] = detail::to_json(*c.dataset.synthetic);
    j["dataset"] = ds;
    j["hyperparams"] = detail::to_json(c.hyperparams);
    j["num_folds"] = c.num_folds;
    j["seed"] = c.seed;
    json methods = json::array();
    for (Method m : c.methods) methods.push_back(to_string(m));
    j["methods"] = methods;
    j["init"] = c.init.kind == Initialization::Kind::unsupervised ? "unsupervised" : "random";
    if (c.init.kind == Initialization::Kind::random) j["init_seed"] = c.init.seed;
    j["standardize"] = c.standardize;
    j["threads"] = c.threads;
    return j.dump(2) + "\n";
}

Dataset load_dataset_source(const DatasetSource& source) {
    if (source.synthetic) return generate_synthetic(*source.synthetic);
    if (source.path) return load_dataset(*source.path, source.format);
    throw std::invalid_argument("dataset source is empty");
}

BoxSummary summarize(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("summarize: no values");
    std::sort(values.begin(), values.end());
    const auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return values[lo] + frac * (values[hi] - values[lo]);
    };
    return {values.front(), quantile(0.25), quantile(0.5), quantile(0.75), values.back()};
}

ModelParams fit_baseline_cfa(const Dataset& train, const Hyperparams& hp) {
    hp.validate(train.d_image(), train.d_text());
    OmegaPair omegas = fit_unsupervised_cfa(train, hp.shared_dim);
    const QpResult qp = solve_qp(build_qp_for(train, omegas.image, omegas.text, hp), std::nullopt,
                                 QpOptions{hp.qp_tol, hp.qp_max_sweeps});
    Matrix w = recover_w(train, qp.duals, omegas.image, omegas.text);
    return {std::move(omegas.image), std::move(omegas.text), std::move(w)};
}

double run_baseline_cfa(const Dataset& train, const Dataset& test, const Hyperparams& hp) {
    return evaluate_rate(fit_baseline_cfa(train, hp), test);
}

ExperimentReport run_cv(const ExperimentConfig& config) { return run_cv(config, load_dataset_source(config.dataset)); }

ExperimentReport run_cv(const ExperimentConfig& config, const Dataset& dataset) {
    config.validate();
    config.hyperparams.validate(dataset.d_image(), dataset.d_text());
    const FoldPlan plan = make_folds(dataset, config.num_folds, config.seed);

    std::vector<FoldOutcome> outcomes(config.num_folds);
    std::vector<std::exception_ptr> errors(config.num_folds);
    std::atomic<std::size_t> next{0};
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min(config.num_folds, config.threads > 0 ? config.threads : hw);
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t f = next++; f < config.num_folds; f = next++) {
                    try {
                        outcomes[f] = run_fold(config, dataset, plan, f);
                    } catch (...) {
                        errors[f] = std::current_exception();
                    }
                }
            });
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    ExperimentReport report;
    report.config = config;
    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
        MethodResult r;
        r.method = config.methods[mi];
        for (const auto& o : outcomes) {
            r.fold_rates.push_back(o.rates[mi]);
            r.fold_events.push_back(o.events[mi]);
        }
        r.summary = summarize(r.fold_rates);
        report.methods.push_back(std::move(r));
    }
    if (std::find(config.methods.begin(), config.methods.end(), Method::supcfa) != config.methods.end())
        for (auto& o : outcomes) report.supcfa_traces.push_back(std::move(o.trace));
    return report;
}

void emit_convergence(const TrainTrace& trace, const std::filesystem::path& path) {
    if (trace.empty()) throw std::invalid_argument("emit_convergence: empty trace");
    auto out = open_csv(path);
    out << "iteration,primal_objective,qp_dual_objective\n";
    for (const auto& r : trace) out << r.iteration << ',' << r.primal_objective << ',' << r.qp_dual_objective << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void emit_boxplot_data(const ExperimentReport& report, const std::filesystem::path& summary_path,
                       const std::filesystem::path& raw_path) {
    if (report.methods.empty()) throw std::invalid_argument("emit_boxplot_data: report has no methods");
    auto summary = open_csv(summary_path);
    summary << "method,min,q1,median,q3,max\n";
    for (const auto& m : report.methods) {
        const auto& s = m.summary;
        summary << to_string(m.method) << ',' << s.min << ',' << s.q1 << ',' << s.median << ',' << s.q3 << ','
                << s.max << '\n';
    }
    auto raw = open_csv(raw_path);
    raw << "method,fold,rate\n";
    for (const auto& m : report.methods)
        for (std::size_t f = 0; f < m.fold_rates.size(); ++f)
            raw << to_string(m.method) << ',' << f << ',' << m.fold_rates[f] << '\n';
    if (!summary || !raw) throw std::runtime_error("write failed: " + summary_path.string());
}

} // namespace supcfa
