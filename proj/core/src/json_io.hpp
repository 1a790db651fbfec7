#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "supcfa/dataset.hpp"
#include "supcfa/supcfa.hpp"
#include "supcfa/tensor.hpp"

namespace supcfa::detail {

using json = nlohmann::json;

/// Throws if `j` has a key outside `allowed`.
void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& context);

json to_json(const Matrix& m);
Matrix matrix_from_json(const json& j, const std::string& context);

json to_json(const Hyperparams& hp);
Hyperparams hyperparams_from(const json& j);

json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from(const json& j);

json parse_json(const std::string& text, const std::string& context);

} // namespace supcfa::detail
