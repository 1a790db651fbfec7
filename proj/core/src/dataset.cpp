#include "supcfa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rng.hpp"

namespace supcfa {

namespace {

using json = nlohmann::json;

std::string record_error(std::size_t index, const std::string& what) {
    return "record " + std::to_string(index) + ": " + what;
}

std::vector<double> parse_vector(const json& j, const char* key, std::size_t index) {
    if (!j.contains(key) || !j[key].is_array()) throw std::runtime_error(record_error(index, std::string("missing array '") + key + "'"));
    std::vector<double> out;
    out.reserve(j[key].size());
    for (const auto& x : j[key]) {
        if (!x.is_number()) throw std::runtime_error(record_error(index, std::string("non-numeric entry in '") + key + "'"));
        out.push_back(x.get<double>());
    }
    return out;
}

struct RawRecord {
    std::vector<double> image;
    std::vector<double> text;
    std::int64_t class_id = 0;
};

// Maps external class ids onto sorted indices and checks dimensions.
Dataset assemble(std::vector<RawRecord> records) {
    if (records.empty()) throw std::runtime_error("empty dataset");
    const std::size_t d_image = records.front().image.size();
    const std::size_t d_text = records.front().text.size();
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].image.size() != d_image) {
            throw std::runtime_error(record_error(i, "image vector has length " + std::to_string(records[i].image.size()) +
                                                         ", expected " + std::to_string(d_image)));
        }
        if (records[i].text.size() != d_text) {
            throw std::runtime_error(record_error(i, "text vector has length " + std::to_string(records[i].text.size()) +
                                                         ", expected " + std::to_string(d_text)));
        }
    }
    std::vector<std::int64_t> ids;
    for (const auto& r : records) ids.push_back(r.class_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::map<std::int64_t, std::size_t> index_of;
    for (std::size_t k = 0; k < ids.size(); ++k) index_of[ids[k]] = k;

    std::vector<Document> docs;
    docs.reserve(records.size());
    for (auto& r : records) {
        Document d{std::move(r.image), std::move(r.text), std::vector<int>(ids.size(), -1)};
        d.label[index_of[r.class_id]] = 1;
        docs.push_back(std::move(d));
    }
    const std::size_t num_classes = ids.size();
    return Dataset(std::move(docs), d_image, d_text, num_classes, std::move(ids));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& cell, std::size_t index) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(record_error(index, "cannot parse number '" + cell + "'"));
    }
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        lines.push_back(std::move(line));
    }
    return lines;
}

Dataset load_jsonl(const std::filesystem::path& path) {
    std::vector<RawRecord> records;
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        json j;
        try {
            j = json::parse(lines[i]);
        } catch (const json::exception& e) {
            throw std::runtime_error(record_error(i, std::string("invalid JSON: ") + e.what()));
        }
        if (!j.is_object()) throw std::runtime_error(record_error(i, "expected a JSON object"));
        RawRecord r;
        r.image = parse_vector(j, "image", i);
        r.text = parse_vector(j, "text", i);
        if (!j.contains("class") || !j["class"].is_number_integer())
            throw std::runtime_error(record_error(i, "missing integer 'class'"));
        r.class_id = j["class"].get<std::int64_t>();
        records.push_back(std::move(r));
    }
    return assemble(std::move(records));
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
    return std::filesystem::path(stem.string() + suffix);
}

Dataset load_csv_pair(const std::filesystem::path& stem) {
    const auto image_lines = read_lines(with_suffix(stem, ".image.csv"));
    const auto text_lines = read_lines(with_suffix(stem, ".text.csv"));
    if (image_lines.size() <= 1 && text_lines.size() <= 1) throw std::runtime_error("empty dataset");
    if (image_lines.size() != text_lines.size()) {
        throw std::runtime_error("csv-pair: image file has " + std::to_string(image_lines.size()) +
                                 " lines but text file has " + std::to_string(text_lines.size()));
    }
    const auto header = split_csv_line(image_lines.front());
    if (header.empty() || header.front() != "class")
        throw std::runtime_error("csv-pair: image header must start with 'class'");

    std::vector<RawRecord> records;
    for (std::size_t row = 1; row < image_lines.size(); ++row) {
        const std::size_t index = row - 1;
        const auto icells = split_csv_line(image_lines[row]);
        const auto tcells = split_csv_line(text_lines[row]);
        if (icells.empty()) throw std::runtime_error(record_error(index, "missing class column"));
        RawRecord r;
        try {
            std::size_t used = 0;
            r.class_id = std::stoll(icells.front(), &used);
            if (used != icells.front().size()) throw std::invalid_argument(icells.front());
        } catch (const std::exception&) {
            throw std::runtime_error(record_error(index, "class '" + icells.front() + "' is not an integer"));
        }
        for (std::size_t c = 1; c < icells.size(); ++c) r.image.push_back(parse_double(icells[c], index));
        for (const auto& cell : tcells) r.text.push_back(parse_double(cell, index));
        records.push_back(std::move(r));
    }
    return assemble(std::move(records));
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    return out;
}

void write_csv_row(std::ostream& out, std::span<const double> values, bool leading_comma) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0 || leading_comma) out << ',';
        out << values[i];
    }
    out << '\n';
}

} // namespace

std::size_t Document::class_index() const {
    for (std::size_t k = 0; k < label.size(); ++k)
        if (label[k] == 1) return k;
    throw std::logic_error("Document: label has no +1 entry");
}

Dataset::Dataset(std::vector<Document> documents, std::size_t d_image, std::size_t d_text, std::size_t num_classes,
                 std::vector<std::int64_t> class_ids)
    : documents_(std::move(documents)), d_image_(d_image), d_text_(d_text), num_classes_(num_classes),
      class_ids_(std::move(class_ids)) {
    if (documents_.empty()) throw std::invalid_argument("empty dataset");
    if (d_image_ == 0 || d_text_ == 0) throw std::invalid_argument("Dataset: feature dimensions must be positive");
    if (num_classes_ == 0) throw std::invalid_argument("Dataset: need at least one class");
    if (class_ids_.empty()) {
        class_ids_.resize(num_classes_);
        std::iota(class_ids_.begin(), class_ids_.end(), std::int64_t{0});
    }
    if (class_ids_.size() != num_classes_) throw std::invalid_argument("Dataset: class id table size mismatch");
    for (std::size_t i = 0; i < documents_.size(); ++i) {
        const auto& d = documents_[i];
        if (d.image_features.size() != d_image_ || d.text_features.size() != d_text_ || d.label.size() != num_classes_)
            throw std::invalid_argument(record_error(i, "dimensions disagree with the dataset"));
        std::size_t positives = 0;
        for (int y : d.label) {
            if (y == 1) ++positives;
            else if (y != -1) throw std::invalid_argument(record_error(i, "label entries must be +1 or -1"));
        }
        if (positives != 1) throw std::invalid_argument(record_error(i, "label must have exactly one +1 entry"));
        for (double x : d.image_features)
            if (!std::isfinite(x)) throw std::invalid_argument(record_error(i, "non-finite image feature"));
        for (double x : d.text_features)
            if (!std::isfinite(x)) throw std::invalid_argument(record_error(i, "non-finite text feature"));
    }
}

Dataset Dataset::from_class_indices(std::vector<std::vector<double>> images, std::vector<std::vector<double>> texts,
                                    std::span<const std::size_t> classes, std::size_t num_classes) {
    if (images.size() != texts.size() || images.size() != classes.size())
        throw std::invalid_argument("Dataset::from_class_indices: length mismatch");
    if (images.empty()) throw std::invalid_argument("empty dataset");
    const std::size_t d_image = images.front().size();
    const std::size_t d_text = texts.front().size();
    std::vector<Document> docs;
    docs.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (classes[i] >= num_classes) throw std::invalid_argument(record_error(i, "class index out of range"));
        Document d{std::move(images[i]), std::move(texts[i]), std::vector<int>(num_classes, -1)};
        d.label[classes[i]] = 1;
        docs.push_back(std::move(d));
    }
    return Dataset(std::move(docs), d_image, d_text, num_classes);
}

Matrix Dataset::image_matrix() const {
    Matrix out(size(), d_image_);
    for (std::size_t i = 0; i < size(); ++i) std::copy_n(documents_[i].image_features.begin(), d_image_, out.row(i).begin());
    return out;
}

Matrix Dataset::text_matrix() const {
    Matrix out(size(), d_text_);
    for (std::size_t i = 0; i < size(); ++i) std::copy_n(documents_[i].text_features.begin(), d_text_, out.row(i).begin());
    return out;
}

Matrix Dataset::label_matrix() const {
    Matrix out(size(), num_classes_);
    for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t k = 0; k < num_classes_; ++k) out(i, k) = documents_[i].label[k];
    return out;
}

std::vector<std::size_t> Dataset::class_indices() const {
    std::vector<std::size_t> out;
    out.reserve(size());
    for (const auto& d : documents_) out.push_back(d.class_index());
    return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(num_classes_, 0);
    for (const auto& d : documents_) ++counts[d.class_index()];
    return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<Document> docs;
    docs.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= size()) throw std::out_of_range("Dataset::subset: index " + std::to_string(i));
        docs.push_back(documents_[i]);
    }
    return Dataset(std::move(docs), d_image_, d_text_, num_classes_, class_ids_);
}

Dataset Dataset::with_labels_from(std::span<const std::size_t> perm) const {
    if (perm.size() != size()) throw std::invalid_argument("with_labels_from: permutation length mismatch");
    std::vector<Document> docs = documents_;
    for (std::size_t i = 0; i < size(); ++i) docs[i].label = documents_.at(perm[i]).label;
    return Dataset(std::move(docs), d_image_, d_text_, num_classes_, class_ids_);
}

Dataset Dataset::with_features(const Matrix& images, const Matrix& texts) const {
    if (images.rows() != size() || images.cols() != d_image_ || texts.rows() != size() || texts.cols() != d_text_)
        throw std::invalid_argument("with_features: shape mismatch");
    std::vector<Document> docs = documents_;
    for (std::size_t i = 0; i < size(); ++i) {
        docs[i].image_features.assign(images.row(i).begin(), images.row(i).end());
        docs[i].text_features.assign(texts.row(i).begin(), texts.row(i).end());
    }
    return Dataset(std::move(docs), d_image_, d_text_, num_classes_, class_ids_);
}

DatasetFormat parse_dataset_format(const std::string& name) {
    if (name == "jsonl") return DatasetFormat::jsonl;
    if (name == "csv-pair" || name == "csv_pair") return DatasetFormat::csv_pair;
    throw std::invalid_argument("unknown dataset format '" + name + "' (expected jsonl or csv-pair)");
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    switch (format) {
    case DatasetFormat::jsonl: return load_jsonl(path);
    case DatasetFormat::csv_pair: return load_csv_pair(path);
    }
    throw std::invalid_argument("unknown dataset format");
}

void save_dataset_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    for (const auto& d : dataset.documents()) {
        json j;
        j["image"] = d.image_features;
        j["text"] = d.text_features;
        j["class"] = dataset.class_ids()[d.class_index()];
        out << j.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void save_dataset_csv_pair(const Dataset& dataset, const std::filesystem::path& stem) {
    auto img = open_for_write(with_suffix(stem, ".image.csv"));
    auto txt = open_for_write(with_suffix(stem, ".text.csv"));
    img << "class";
    for (std::size_t c = 0; c < dataset.d_image(); ++c) img << ",i" << c;
    img << '\n';
    for (std::size_t c = 0; c < dataset.d_text(); ++c) txt << (c ? "," : "") << 't' << c;
    txt << '\n';
    for (const auto& d : dataset.documents()) {
        img << dataset.class_ids()[d.class_index()];
        write_csv_row(img, d.image_features, true);
        write_csv_row(txt, d.text_features, false);
    }
    if (!img || !txt) throw std::runtime_error("write failed: " + stem.string());
}

void SyntheticSpec::validate() const {
    if (n == 0) throw std::invalid_argument("synthetic: n must be positive");
    if (num_classes == 0) throw std::invalid_argument("synthetic: num_classes must be positive");
    if (n < num_classes) throw std::invalid_argument("synthetic: n must be >= num_classes");
    if (shared_dim == 0) throw std::invalid_argument("synthetic: shared_dim must be positive");
    if (shared_dim > std::min(d_image, d_text))
        throw std::invalid_argument("synthetic: shared_dim must be <= min(d_image, d_text)");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw std::invalid_argument("synthetic: noise_sigma must be >= 0");
    if (!(within_class_std >= 0.0) || !(class_separation > 0.0))
        throw std::invalid_argument("synthetic: class_separation must be > 0 and within_class_std >= 0");
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t k = spec.shared_dim;
    // Transposed so rows of the latent-to-feature maps are orthonormal.
    const Matrix map_image = random_orthonormal(spec.d_image, k, detail::derive_seed(spec.seed, 0)).transposed();
    const Matrix map_text = random_orthonormal(spec.d_text, k, detail::derive_seed(spec.seed, 1)).transposed();

    Matrix means(spec.num_classes, k);
    if (spec.num_classes <= k) {
        const Matrix dirs = random_orthonormal(k, spec.num_classes, detail::derive_seed(spec.seed, 2));
        for (std::size_t c = 0; c < spec.num_classes; ++c)
            for (std::size_t j = 0; j < k; ++j) means(c, j) = spec.class_separation * dirs(j, c);
    } else {
        std::mt19937_64 rng(detail::derive_seed(spec.seed, 2));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t c = 0; c < spec.num_classes; ++c) {
            std::vector<double> v(k);
            for (double& x : v) x = normal(rng);
            const double len = std::sqrt(dot(v, v));
            for (std::size_t j = 0; j < k; ++j) means(c, j) = spec.class_separation * v[j] / len;
        }
    }

    std::vector<std::size_t> classes(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) classes[i] = i % spec.num_classes;
    std::mt19937_64 rng(detail::derive_seed(spec.seed, 3));
    detail::shuffle(classes, rng);

    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> images, texts;
    images.reserve(spec.n);
    texts.reserve(spec.n);
    std::vector<double> z(k);
    for (std::size_t i = 0; i < spec.n; ++i) {
        for (std::size_t j = 0; j < k; ++j) z[j] = means(classes[i], j) + spec.within_class_std * normal(rng);
        auto img = row_times(z, map_image);
        auto txt = row_times(z, map_text);
        if (spec.noise_sigma > 0.0) {
            for (double& x : img) x += spec.noise_sigma * normal(rng);
            for (double& x : txt) x += spec.noise_sigma * normal(rng);
        }
        images.push_back(std::move(img));
        texts.push_back(std::move(txt));
    }
    return Dataset::from_class_indices(std::move(images), std::move(texts), classes, spec.num_classes);
}

namespace {

void fit_columns(const Matrix& x, std::vector<double>& mean, std::vector<double>& scale) {
    const std::size_t n = x.rows();
    mean.assign(x.cols(), 0.0);
    scale.assign(x.cols(), 1.0);
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r) s += x(r, c);
        mean[c] = s / static_cast<double>(n);
        double v = 0.0;
        for (std::size_t r = 0; r < n; ++r) v += (x(r, c) - mean[c]) * (x(r, c) - mean[c]);
        const double sd = std::sqrt(v / static_cast<double>(n));
        // Constant columns are only centered.
        scale[c] = sd > 1e-12 ? sd : 1.0;
    }
}

std::vector<double> standardize(std::span<const double> x, const std::vector<double>& mean,
                                const std::vector<double>& scale) {
    if (x.size() != mean.size())
        throw std::invalid_argument("standardize: expected length " + std::to_string(mean.size()) + ", got " +
                                    std::to_string(x.size()));
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / scale[i];
    return out;
}

} // namespace

Standardizer Standardizer::fit(const Dataset& train) {
    Standardizer s;
    fit_columns(train.image_matrix(), s.image_mean, s.image_scale);
    fit_columns(train.text_matrix(), s.text_mean, s.text_scale);
    return s;
}

std::vector<double> Standardizer::apply_image(std::span<const double> x) const {
    return standardize(x, image_mean, image_scale);
}

std::vector<double> Standardizer::apply_text(std::span<const double> x) const {
    return standardize(x, text_mean, text_scale);
}

Dataset Standardizer::apply(const Dataset& d) const {
    Matrix images(d.size(), d.d_image());
    Matrix texts(d.size(), d.d_text());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto a = apply_image(d[i].image_features);
        const auto b = apply_text(d[i].text_features);
        std::copy(a.begin(), a.end(), images.row(i).begin());
        std::copy(b.begin(), b.end(), texts.row(i).begin());
    }
    return d.with_features(images, texts);
}

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] != fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
    std::vector<std::size_t> sizes(num_folds, 0);
    for (std::size_t f : assignments) ++sizes[f];
    return sizes;
}

FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("make_folds: need k >= 2, got " + std::to_string(k));
    if (k > n) throw std::invalid_argument("make_folds: k (" + std::to_string(k) + ") exceeds n (" + std::to_string(n) + ")");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(detail::derive_seed(seed, 100));
    detail::shuffle(order, rng);
    FoldPlan plan{k, std::vector<std::size_t>(n), seed};
    for (std::size_t pos = 0; pos < n; ++pos) plan.assignments[order[pos]] = pos % k;
    return plan;
}

} // namespace supcfa
