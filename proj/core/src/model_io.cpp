#include "supcfa/model_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json_io.hpp"

namespace supcfa {

namespace detail {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& context) {
    if (!j.is_object()) throw std::invalid_argument(context + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
        if (!known) throw std::invalid_argument(context + ": unknown key '" + key + "'");
    }
}

json to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
    return rows;
}

Matrix matrix_from_json(const json& j, const std::string& context) {
    if (!j.is_array() || j.empty()) throw std::invalid_argument(context + ": expected a non-empty array of rows");
    const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
    std::vector<double> entries;
    entries.reserve(j.size() * cols);
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != cols) throw std::invalid_argument(context + ": ragged or malformed rows");
        for (const auto& x : row) {
            if (!x.is_number()) throw std::invalid_argument(context + ": non-numeric entry");
            entries.push_back(x.get<double>());
        }
    }
    return Matrix(j.size(), cols, std::move(entries));
}

json to_json(const Hyperparams& hp) {
    return json{{"c1", hp.c1},
                {"c2", hp.c2},
                {"h", hp.h},
                {"shared_dim", hp.shared_dim},
                {"max_iters", hp.max_iters},
                {"qp_tol", hp.qp_tol},
                {"outer_tol", hp.outer_tol},
                {"qp_max_sweeps", hp.qp_max_sweeps}};
}

Hyperparams hyperparams_from(const json& j) {
    reject_unknown_keys(j, {"c1", "c2", "h", "shared_dim", "max_iters", "qp_tol", "outer_tol", "qp_max_sweeps"},
                        "hyperparams");
    Hyperparams hp;
    try {
        hp.c1 = j.value("c1", hp.c1);
        hp.c2 = j.value("c2", hp.c2);
        hp.h = j.value("h", hp.h);
        hp.shared_dim = j.value("shared_dim", hp.shared_dim);
        hp.max_iters = j.value("max_iters", hp.max_iters);
        hp.qp_tol = j.value("qp_tol", hp.qp_tol);
        hp.outer_tol = j.value("outer_tol", hp.outer_tol);
        hp.qp_max_sweeps = j.value("qp_max_sweeps", hp.qp_max_sweeps);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("hyperparams: ") + e.what());
    }
    if (hp.shared_dim == 0) throw std::invalid_argument("hyperparams: shared_dim is required and must be positive");
    return hp;
}

json to_json(const SyntheticSpec& spec) {
    return json{{"n", spec.n},
                {"d_image", spec.d_image},
                {"d_text", spec.d_text},
                {"num_classes", spec.num_classes},
                {"shared_dim", spec.shared_dim},
                {"noise_sigma", spec.noise_sigma},
                {"seed", spec.seed},
                {"class_separation", spec.class_separation},
                {"within_class_std", spec.within_class_std}};
}

SyntheticSpec synthetic_spec_from(const json& j) {
    reject_unknown_keys(j,
                        {"n", "d_image", "d_text", "num_classes", "shared_dim", "noise_sigma", "seed",
                         "class_separation", "within_class_std"},
                        "synthetic spec");
    SyntheticSpec s;
    try {
        for (const char* key : {"n", "d_image", "d_text", "num_classes", "shared_dim"})
            if (!j.contains(key)) throw std::invalid_argument(std::string("synthetic spec: missing '") + key + "'");
        s.n = j.at("n").get<std::size_t>();
        s.d_image = j.at("d_image").get<std::size_t>();
        s.d_text = j.at("d_text").get<std::size_t>();
        s.num_classes = j.at("num_classes").get<std::size_t>();
        s.shared_dim = j.at("shared_dim").get<std::size_t>();
        s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
        s.seed = j.value("seed", s.seed);
        s.class_separation = j.value("class_separation", s.class_separation);
        s.within_class_std = j.value("within_class_std", s.within_class_std);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("synthetic spec: ") + e.what());
    }
    s.validate();
    return s;
}

json parse_json(const std::string& text, const std::string& context) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(context + ": invalid JSON: " + e.what());
    }
}

} // namespace detail

namespace {

using detail::json;

json standardizer_to_json(const Standardizer& s) {
    return json{{"image_mean", s.image_mean},
                {"image_scale", s.image_scale},
                {"text_mean", s.text_mean},
                {"text_scale", s.text_scale}};
}

Standardizer standardizer_from_json(const json& j) {
    detail::reject_unknown_keys(j, {"image_mean", "image_scale", "text_mean", "text_scale"}, "standardization");
    Standardizer s;
    s.image_mean = j.at("image_mean").get<std::vector<double>>();
    s.image_scale = j.at("image_scale").get<std::vector<double>>();
    s.text_mean = j.at("text_mean").get<std::vector<double>>();
    s.text_scale = j.at("text_scale").get<std::vector<double>>();
    return s;
}

} // namespace

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string model_to_json(const SavedModel& model) {
    const auto& p = model.params;
    json j;
    j["format_version"] = kModelFormatVersion;
    j["dimensions"] = {{"d_image", p.omega_image.rows()},
                       {"d_text", p.omega_text.rows()},
                       {"shared_dim", p.w.rows()},
                       {"num_classes", p.w.cols()}};
    j["hyperparams"] = detail::to_json(model.hyperparams);
    j["class_ids"] = model.class_ids;
    j["omega_image"] = detail::to_json(p.omega_image);
    j["omega_text"] = detail::to_json(p.omega_text);
    j["w"] = detail::to_json(p.w);
    j["standardization"] = model.standardizer ? standardizer_to_json(*model.standardizer) : json(nullptr);
    return j.dump(1) + "\n";
}

void save_model(const SavedModel& model, const std::filesystem::path& path) {
    const std::string text = model_to_json(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

SavedModel model_from_json(const std::string& text) {
    const json j = detail::parse_json(text, "model");
    detail::reject_unknown_keys(j,
                                {"format_version", "dimensions", "hyperparams", "class_ids", "omega_image",
                                 "omega_text", "w", "standardization"},
                                "model");
    SavedModel m;
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion)
            throw std::runtime_error("model: unsupported format_version " + std::to_string(version));
        m.hyperparams = detail::hyperparams_from(j.at("hyperparams"));
        m.class_ids = j.at("class_ids").get<std::vector<std::int64_t>>();
        m.params.omega_image = detail::matrix_from_json(j.at("omega_image"), "omega_image");
        m.params.omega_text = detail::matrix_from_json(j.at("omega_text"), "omega_text");
        m.params.w = detail::matrix_from_json(j.at("w"), "w");
        if (j.contains("standardization") && !j["standardization"].is_null())
            m.standardizer = standardizer_from_json(j["standardization"]);
        const auto& dims = j.at("dimensions");
        if (dims.at("d_image").get<std::size_t>() != m.params.omega_image.rows() ||
            dims.at("d_text").get<std::size_t>() != m.params.omega_text.rows() ||
            dims.at("shared_dim").get<std::size_t>() != m.params.w.rows() ||
            dims.at("num_classes").get<std::size_t>() != m.params.w.cols())
            throw std::runtime_error("model: dimensions block disagrees with the stored matrices");
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("model: ") + e.what());
    }
    if (m.class_ids.size() != m.params.num_classes())
        throw std::runtime_error("model: class_ids length disagrees with w");
    if (m.standardizer && (m.standardizer->image_mean.size() != m.params.omega_image.rows() ||
                           m.standardizer->text_mean.size() != m.params.omega_text.rows()))
        throw std::runtime_error("model: standardization dimensions disagree with the omegas");
    m.params.check_invariants();
    return m;
}

SavedModel load_model(const std::filesystem::path& path) { return model_from_json(read_text_file(path)); }

Hyperparams hyperparams_from_json(const std::string& text) {
    return detail::hyperparams_from(detail::parse_json(text, "hyperparams"));
}

Hyperparams load_hyperparams(const std::filesystem::path& path) { return hyperparams_from_json(read_text_file(path)); }

std::string hyperparams_to_json(const Hyperparams& hp) { return detail::to_json(hp).dump(2) + "\n"; }

SyntheticSpec synthetic_spec_from_json(const std::string& text) {
    return detail::synthetic_spec_from(detail::parse_json(text, "synthetic spec"));
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
    return synthetic_spec_from_json(read_text_file(path));
}

} // namespace supcfa
