#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace tracealign::schema {

// Validates `value` against a JSON-Schema subset: type (string or list), properties,
// required, additionalProperties (bool), items, enum, const, minimum, maximum,
// minItems, maxItems, minLength. Returns the first violation as "<pointer>: <reason>".
std::optional<std::string> validate(const nlohmann::json& schema, const nlohmann::json& value);

}  // namespace tracealign::schema
