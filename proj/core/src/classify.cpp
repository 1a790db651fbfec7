#include "supcfa/classify.hpp"

#include <stdexcept>

namespace supcfa {

Modality parse_modality(const std::string& name) {
    if (name == "image") return Modality::image;
    if (name == "text") return Modality::text;
    throw std::invalid_argument("unknown modality '" + name + "' (expected image or text)");
}

const char* to_string(Modality m) { return m == Modality::image ? "image" : "text"; }

Prediction predict(std::span<const double> features, Modality modality, const ModelParams& model) {
    const Matrix& omega = modality == Modality::image ? model.omega_image : model.omega_text;
    if (features.size() != omega.rows()) {
        throw std::invalid_argument(std::string(to_string(modality)) + " features: expected length " +
                                    std::to_string(omega.rows()) + ", got " + std::to_string(features.size()));
    }
    Prediction p;
    p.scores = row_times(project(features, omega), model.w);
    for (std::size_t k = 1; k < p.scores.size(); ++k)
        if (p.scores[k] > p.scores[p.predicted_class]) p.predicted_class = k;
    return p;
}

double classification_rate(std::span<const Prediction> predictions, std::span<const std::size_t> truths) {
    if (predictions.size() != truths.size())
        throw std::invalid_argument("classification_rate: predictions and truths differ in length");
    if (predictions.empty()) throw std::invalid_argument("classification_rate: no predictions");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i].predicted_class == truths[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double evaluate_rate(const ModelParams& model, const Dataset& test) {
    std::vector<Prediction> predictions;
    std::vector<std::size_t> truths;
    predictions.reserve(2 * test.size());
    truths.reserve(2 * test.size());
    for (const auto& doc : test.documents()) {
        predictions.push_back(predict(doc.image_features, Modality::image, model));
        truths.push_back(doc.class_index());
        predictions.push_back(predict(doc.text_features, Modality::text, model));
        truths.push_back(doc.class_index());
    }
    return classification_rate(predictions, truths);
}

} // namespace supcfa
