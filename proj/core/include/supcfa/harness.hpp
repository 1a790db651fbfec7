#pragma once

// k-fold cross-validation of the supervised trainer against the unsupervised
// baseline, plus CSV emission for boxplots and convergence curves.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "supcfa/dataset.hpp"
#include "supcfa/supcfa.hpp"

namespace supcfa {

enum class Method { supcfa, cfa_baseline };

Method parse_method(const std::string& name);
const char* to_string(Method m);

/// Either a file on disk or a synthetic spec.
struct DatasetSource {
    std::optional<std::filesystem::path> path;
    DatasetFormat format = DatasetFormat::jsonl;
    std::optional<SyntheticSpec> synthetic;
};

struct ExperimentConfig {
    DatasetSource dataset;
    Hyperparams hyperparams;
    std::size_t num_folds = 10;
    std::uint64_t seed = 0;
    std::vector<Method> methods{Method::supcfa, Method::cfa_baseline};
    Initialization init;
    bool standardize = false; // statistics from the training folds only
    std::size_t threads = 0;  // 0 = hardware concurrency

    void validate() const;
};

/// Relative dataset paths resolve against the config file's directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig experiment_config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});
std::string experiment_config_to_json(const ExperimentConfig& config);

Dataset load_dataset_source(const DatasetSource& source);

struct BoxSummary {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

/// Five-number summary; quartiles interpolate linearly between order
/// statistics (position p·(n−1)).
BoxSummary summarize(std::vector<double> values);

struct MethodResult {
    Method method = Method::supcfa;
    std::vector<double> fold_rates; // ordered by fold index
    std::vector<std::size_t> fold_events; // classification events per fold (2 per test document)
    BoxSummary summary;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<MethodResult> methods;
    std::vector<TrainTrace> supcfa_traces; // per fold, empty unless supcfa ran
};

/// Baseline model: unsupervised CFA omegas, then one QP and W recovery at
/// those fixed omegas.
ModelParams fit_baseline_cfa(const Dataset& train, const Hyperparams& hp);

/// Rate of the baseline model trained on `train`, evaluated on `test`.
double run_baseline_cfa(const Dataset& train, const Dataset& test, const Hyperparams& hp);

ExperimentReport run_cv(const ExperimentConfig& config);
ExperimentReport run_cv(const ExperimentConfig& config, const Dataset& dataset);

/// Header `iteration,primal_objective,qp_dual_objective`, one row per record.
void emit_convergence(const TrainTrace& trace, const std::filesystem::path& path);

/// `summary_path`: method,min,q1,median,q3,max per method.
/// `raw_path`: method,fold,rate per fold.
void emit_boxplot_data(const ExperimentReport& report, const std::filesystem::path& summary_path,
                       const std::filesystem::path& raw_path);

} // namespace supcfa
