#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "supcfa/tensor.hpp"

namespace supcfa {

/// One two-modal item. Features are row vectors; `label` is the one-of-m sign
/// vector (+1 at the document's class, -1 elsewhere).
struct Document {
    std::vector<double> image_features;
    std::vector<double> text_features;
    std::vector<int> label;

    /// Index of the +1 entry.
    std::size_t class_index() const;
};

class Dataset {
public:
    Dataset() = default;

    /// Validates shared dimensions, finite features and one-of-m labels.
    /// `class_ids` maps class index to the external id (sorted ascending).
    Dataset(std::vector<Document> documents, std::size_t d_image, std::size_t d_text, std::size_t num_classes,
            std::vector<std::int64_t> class_ids = {});

    /// Builds sign-vector labels from class indices in [0, num_classes).
    static Dataset from_class_indices(std::vector<std::vector<double>> images, std::vector<std::vector<double>> texts,
                                      std::span<const std::size_t> classes, std::size_t num_classes);

    const std::vector<Document>& documents() const noexcept { return documents_; }
    const Document& operator[](std::size_t i) const { return documents_[i]; }
    std::size_t size() const noexcept { return documents_.size(); }
    std::size_t d_image() const noexcept { return d_image_; }
    std::size_t d_text() const noexcept { return d_text_; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    const std::vector<std::int64_t>& class_ids() const noexcept { return class_ids_; }

    Matrix image_matrix() const; // n x d_image
    Matrix text_matrix() const;  // n x d_text
    Matrix label_matrix() const; // n x m, entries ±1
    std::vector<std::size_t> class_indices() const;
    std::vector<std::size_t> class_counts() const;

    /// Documents at `indices`, in that order; dimensions and class ids kept.
    Dataset subset(std::span<const std::size_t> indices) const;

    /// Same dataset with every label replaced by labels[perm[i]].
    Dataset with_labels_from(std::span<const std::size_t> perm) const;

    /// Copy with features replaced; shapes must match.
    Dataset with_features(const Matrix& images, const Matrix& texts) const;

private:
    std::vector<Document> documents_;
    std::size_t d_image_ = 0;
    std::size_t d_text_ = 0;
    std::size_t num_classes_ = 0;
    std::vector<std::int64_t> class_ids_;
};

enum class DatasetFormat { jsonl, csv_pair };

DatasetFormat parse_dataset_format(const std::string& name);

/// jsonl: one {"image": [...], "text": [...], "class": int} per line.
/// csv_pair: `path` is a stem; reads `<stem>.image.csv` (header, `class`
/// column first) and `<stem>.text.csv` (header), row-aligned.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);

void save_dataset_jsonl(const Dataset& dataset, const std::filesystem::path& path);
void save_dataset_csv_pair(const Dataset& dataset, const std::filesystem::path& stem);

struct SyntheticSpec {
    std::size_t n = 0;
    std::size_t d_image = 0;
    std::size_t d_text = 0;
    std::size_t num_classes = 0;
    std::size_t shared_dim = 0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    double class_separation = 3.0; // norm of each latent class mean
    double within_class_std = 0.5; // latent spread around the class mean

    void validate() const;
};

/// Latent z ~ class mean + N(0, within_class_std²); image = z·A_I + noise,
/// text = z·A_T + noise, with A_I, A_T seeded maps having orthonormal rows.
/// Classes are assigned round-robin, then shuffled.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Per-coordinate mean/scale fitted on one dataset and applied to others.
struct Standardizer {
    std::vector<double> image_mean, image_scale;
    std::vector<double> text_mean, text_scale;

    static Standardizer fit(const Dataset& train);
    Dataset apply(const Dataset& d) const;
    std::vector<double> apply_image(std::span<const double> x) const;
    std::vector<double> apply_text(std::span<const double> x) const;
};

struct FoldPlan {
    std::size_t num_folds = 0;
    std::vector<std::size_t> assignments; // fold index per document
    std::uint64_t seed = 0;

    std::vector<std::size_t> test_indices(std::size_t fold) const;
    std::vector<std::size_t> train_indices(std::size_t fold) const;
    std::vector<std::size_t> fold_sizes() const;
};

/// Seeded shuffle, then position i goes to fold i mod k.
FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed);
inline FoldPlan make_folds(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
    return make_folds(dataset.size(), k, seed);
}

} // namespace supcfa
