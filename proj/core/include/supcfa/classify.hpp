#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "supcfa/dataset.hpp"
#include "supcfa/supcfa.hpp"

namespace supcfa {

enum class Modality { image, text };

Modality parse_modality(const std::string& name);
const char* to_string(Modality m);

struct Prediction {
    std::vector<double> scores;
    std::size_t predicted_class = 0; // argmax of scores, first index on ties
};

/// scores = (features·Ω_modality)·W.
Prediction predict(std::span<const double> features, Modality modality, const ModelParams& model);

/// Fraction of predictions whose class matches the truth. Each test document
/// contributes one event per modality, so callers pass both.
double classification_rate(std::span<const Prediction> predictions, std::span<const std::size_t> truths);

/// Classifies every image and every text of `test` independently and returns
/// the rate over the 2n events.
double evaluate_rate(const ModelParams& model, const Dataset& test);

} // namespace supcfa
