#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "supcfa/classify.hpp"
#include "supcfa/dataset.hpp"
#include "supcfa/harness.hpp"
#include "supcfa/model_io.hpp"
#include "supcfa/supcfa.hpp"

namespace supcfa::cli {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_parent_dir(const fs::path& out) {
    const fs::path parent = out.parent_path();
    if (!parent.empty() && !fs::is_directory(parent))
        throw UsageError("output directory does not exist: " + parent.string());
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    return out;
}

struct SynthArgs {
    std::string spec, out, format = "jsonl";
};

struct TrainArgs {
    std::string data, format = "jsonl", hyper, init = "unsupervised", model_out, trace_out;
    std::uint64_t seed = 0;
    bool standardize = false;
};

struct PredictArgs {
    std::string model, modality, input, out;
};

struct CvArgs {
    std::string config, out_dir;
    std::vector<std::string> methods;
    std::size_t threads = 0;
};

struct ConvergenceArgs {
    std::string config, out, model_out;
    std::size_t iters = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& err) {
    const SyntheticSpec spec = load_synthetic_spec(a.spec);
    const DatasetFormat format = parse_dataset_format(a.format);
    require_parent_dir(a.out);
    const Dataset d = generate_synthetic(spec);
    if (format == DatasetFormat::jsonl) save_dataset_jsonl(d, a.out);
    else save_dataset_csv_pair(d, a.out);
    err << "synth: n=" << d.size() << " d_image=" << d.d_image() << " d_text=" << d.d_text()
        << " m=" << d.num_classes() << " -> " << a.out << "\n";
    return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& err) {
    require_parent_dir(a.model_out);
    if (!a.trace_out.empty()) require_parent_dir(a.trace_out);
    Dataset data = load_dataset(a.data, parse_dataset_format(a.format));
    const Hyperparams hp = load_hyperparams(a.hyper);
    hp.validate(data.d_image(), data.d_text());
    Initialization init;
    if (a.init == "random") init = Initialization::random(a.seed);
    else if (a.init != "unsupervised") throw UsageError("--init must be unsupervised or random");

    SavedModel saved;
    if (a.standardize) {
        saved.standardizer = Standardizer::fit(data);
        data = saved.standardizer->apply(data);
    }
    err << "train: n=" << data.size() << " d=" << hp.shared_dim << " T=" << hp.max_iters << "\n";
    TrainResult r = fit_supervised(data, hp, init);
    if (!r.qp_converged) err << "train: warning: some QP solves stopped at the sweep cap\n";
    err << "train: " << r.trace.size() << " iterations, training rate " << evaluate_rate(r.params, data) << "\n";

    saved.params = std::move(r.params);
    saved.hyperparams = hp;
    saved.class_ids = data.class_ids();
    save_model(saved, a.model_out);
    // Reload to confirm the written file satisfies the model invariants.
    load_model(a.model_out);
    if (!a.trace_out.empty() && !r.trace.empty()) emit_convergence(r.trace, a.trace_out);
    return kExitOk;
}

std::vector<std::vector<double>> read_queries(const fs::path& path, Modality modality) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t index = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("input record " + std::to_string(index) + ": invalid JSON: " + e.what());
        }
        const nlohmann::json* vec = &j;
        if (j.is_object()) {
            const char* key = to_string(modality);
            if (!j.contains(key)) throw std::runtime_error("input record " + std::to_string(index) + ": missing '" + key + "'");
            vec = &j[key];
        }
        try {
            rows.push_back(vec->get<std::vector<double>>());
        } catch (const nlohmann::json::exception&) {
            throw std::runtime_error("input record " + std::to_string(index) + ": expected an array of numbers");
        }
        ++index;
    }
    if (rows.empty()) throw std::runtime_error("empty input: " + path.string());
    return rows;
}

int cmd_predict(const PredictArgs& a, std::ostream& err) {
    require_parent_dir(a.out);
    const SavedModel model = load_model(a.model);
    const Modality modality = parse_modality(a.modality);
    const auto queries = read_queries(a.input, modality);
    const std::size_t expected = modality == Modality::image ? model.params.omega_image.rows() : model.params.omega_text.rows();
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (queries[i].size() != expected) {
            throw std::runtime_error("input record " + std::to_string(i) + ": expected " + std::to_string(expected) +
                                     " " + a.modality + " features, got " + std::to_string(queries[i].size()));
        }
    }
    auto out = open_out(a.out);
    out << "index,predicted_class";
    for (std::size_t k = 0; k < model.params.num_classes(); ++k) out << ",score_" << k;
    out << '\n';
    for (std::size_t i = 0; i < queries.size(); ++i) {
        std::vector<double> x = queries[i];
        if (model.standardizer)
            x = modality == Modality::image ? model.standardizer->apply_image(x) : model.standardizer->apply_text(x);
        const Prediction p = predict(x, modality, model.params);
        out << i << ',' << model.class_ids[p.predicted_class];
        for (double s : p.scores) out << ',' << s;
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + a.out);
    err << "predict: " << queries.size() << " " << a.modality << " queries -> " << a.out << "\n";
    return kExitOk;
}

int cmd_cv(const CvArgs& a, std::ostream& err) {
    if (!fs::is_directory(a.out_dir)) throw UsageError("output directory does not exist: " + a.out_dir);
    ExperimentConfig config = load_experiment_config(a.config);
    if (!a.methods.empty()) {
        config.methods.clear();
        for (const auto& m : a.methods) config.methods.push_back(parse_method(m));
    }
    if (a.threads > 0) config.threads = a.threads;
    config.validate();
    const Dataset data = load_dataset_source(config.dataset);
    err << "cv: n=" << data.size() << " folds=" << config.num_folds << "\n";
    const ExperimentReport report = run_cv(config, data);

    const fs::path dir = a.out_dir;
    emit_boxplot_data(report, dir / "boxplot.csv", dir / "rates.csv");
    for (std::size_t f = 0; f < report.supcfa_traces.size(); ++f) {
        std::ostringstream name;
        name << "convergence_fold" << (f < 10 ? "0" : "") << f << ".csv";
        emit_convergence(report.supcfa_traces[f], dir / name.str());
    }
    auto echo = open_out(dir / "config.json");
    echo << experiment_config_to_json(report.config);
    for (const auto& m : report.methods) {
        err << "cv: " << to_string(m.method) << " median " << m.summary.median << " (min " << m.summary.min
            << ", max " << m.summary.max << ")\n";
    }
    return kExitOk;
}

int cmd_convergence(const ConvergenceArgs& a, std::ostream& err) {
    require_parent_dir(a.out);
    if (!a.model_out.empty()) require_parent_dir(a.model_out);
    ExperimentConfig config = load_experiment_config(a.config);
    Hyperparams hp = config.hyperparams;
    hp.outer_tol = 0.0; // full curve
    if (a.iters > 0) hp.max_iters = a.iters;
    Dataset data = load_dataset_source(config.dataset);
    SavedModel saved;
    if (config.standardize) {
        saved.standardizer = Standardizer::fit(data);
        data = saved.standardizer->apply(data);
    }
    err << "convergence: n=" << data.size() << " T=" << hp.max_iters << "\n";
    TrainResult r = fit_supervised(data, hp, config.init);
    if (r.trace.empty()) throw std::runtime_error("convergence: max_iters must be positive");
    emit_convergence(r.trace, a.out);
    if (!a.model_out.empty()) {
        saved.params = std::move(r.params);
        saved.hyperparams = hp;
        saved.class_ids = data.class_ids();
        save_model(saved, a.model_out);
    }
    err << "convergence: final primal objective " << r.trace.back().primal_objective << "\n";
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& err) {
    CLI::App app{"Supervised cross-modal factor analysis"};
    app.name("supcfa");
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic two-modal dataset");
    s->add_option("--spec", synth.spec, "Synthetic spec (JSON)")->required();
    s->add_option("--out", synth.out, "Output dataset path")->required();
    s->add_option("--format", synth.format, "jsonl or csv-pair (path is then a stem)");

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train a model");
    t->add_option("--data", train.data, "Dataset path")->required();
    t->add_option("--format", train.format, "jsonl or csv-pair");
    t->add_option("--hyper", train.hyper, "Hyperparameters (JSON)")->required();
    t->add_option("--init", train.init, "unsupervised or random")->check(CLI::IsMember({"unsupervised", "random"}));
    t->add_option("--seed", train.seed, "Seed for random initialization");
    t->add_option("--model-out", train.model_out, "Model file to write")->required();
    t->add_option("--trace-out", train.trace_out, "Convergence CSV to write");
    t->add_flag("--standardize", train.standardize, "Standardize features with training statistics");

    PredictArgs pred;
    auto* p = app.add_subcommand("predict", "Classify single-modality queries");
    p->add_option("--model", pred.model, "Model file")->required();
    p->add_option("--modality", pred.modality, "image or text")->required()->check(CLI::IsMember({"image", "text"}));
    p->add_option("--input", pred.input, "JSONL queries: records or bare arrays")->required();
    p->add_option("--out", pred.out, "Predictions CSV to write")->required();

    CvArgs cv;
    auto* c = app.add_subcommand("cv", "k-fold cross-validation report");
    c->add_option("--config", cv.config, "Experiment config (JSON)")->required();
    c->add_option("--out-dir", cv.out_dir, "Existing output directory")->required();
    c->add_option("--methods", cv.methods, "Override methods: supcfa, cfa_baseline")->delimiter(',');
    c->add_option("--threads", cv.threads, "Worker threads (0 = all cores)");

    ConvergenceArgs conv;
    auto* v = app.add_subcommand("convergence", "Objective curve over a fixed number of iterations");
    v->add_option("--config", conv.config, "Experiment config (JSON)")->required();
    v->add_option("--out", conv.out, "Convergence CSV to write")->required();
    v->add_option("--iters", conv.iters, "Override max_iters");
    v->add_option("--model-out", conv.model_out, "Also write the trained model");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        err << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "supcfa: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*s) return cmd_synth(synth, err);
        if (*t) return cmd_train(train, err);
        if (*p) return cmd_predict(pred, err);
        if (*c) return cmd_cv(cv, err);
        if (*v) return cmd_convergence(conv, err);
    } catch (const UsageError& e) {
        err << "supcfa: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "supcfa: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

} // namespace supcfa::cli
