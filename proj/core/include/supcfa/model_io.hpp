#pragma once

// JSON documents: model files, hyperparameter files and synthetic-data specs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "supcfa/dataset.hpp"
#include "supcfa/supcfa.hpp"

namespace supcfa {

inline constexpr int kModelFormatVersion = 1;

struct SavedModel {
    ModelParams params;
    Hyperparams hyperparams;
    std::vector<std::int64_t> class_ids;
    std::optional<Standardizer> standardizer; // applied to raw features before projection
};

/// Writes dimensions, hyperparameters, class ids, the optional standardizer
/// and omega_image/omega_text/w as nested row-major arrays. Doubles are
/// written in shortest round-trip form, so a reload is bit-exact.
void save_model(const SavedModel& model, const std::filesystem::path& path);
std::string model_to_json(const SavedModel& model);

/// Parses and validates a model file, including the orthonormality check.
SavedModel load_model(const std::filesystem::path& path);
SavedModel model_from_json(const std::string& text);

/// Missing keys keep their defaults; unknown keys are rejected.
Hyperparams hyperparams_from_json(const std::string& text);
Hyperparams load_hyperparams(const std::filesystem::path& path);
std::string hyperparams_to_json(const Hyperparams& hp);

SyntheticSpec synthetic_spec_from_json(const std::string& text);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

} // namespace supcfa
