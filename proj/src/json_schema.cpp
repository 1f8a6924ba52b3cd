#include "tracealign/json_schema.hpp"

namespace tracealign::schema {

namespace {

bool type_matches(const std::string& type, const nlohmann::json& v) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  return false;
}

std::optional<std::string> check(const nlohmann::json& s, const nlohmann::json& v, const std::string& at) {
  auto fail = [&](const std::string& why) { return std::optional<std::string>(at + ": " + why); };
  const std::string where = at.empty() ? "/" : at;

  if (auto it = s.find("type"); it != s.end()) {
    bool ok = false;
    if (it->is_string()) {
      ok = type_matches(it->get<std::string>(), v);
    } else {
      for (const auto& t : *it) ok = ok || type_matches(t.get<std::string>(), v);
    }
    if (!ok) return std::optional<std::string>(where + ": expected type " + it->dump());
  }
  if (auto it = s.find("const"); it != s.end() && *it != v) return fail("expected constant " + it->dump());
  if (auto it = s.find("enum"); it != s.end()) {
    bool found = false;
    for (const auto& option : *it) found = found || option == v;
    if (!found) return fail("value " + v.dump() + " not in " + it->dump());
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    if (auto it = s.find("minimum"); it != s.end() && x < it->get<double>()) return fail("below minimum");
    if (auto it = s.find("maximum"); it != s.end() && x > it->get<double>()) return fail("above maximum");
  }
  if (v.is_string()) {
    if (auto it = s.find("minLength"); it != s.end() && v.get_ref<const std::string&>().size() < it->get<std::size_t>())
      return fail("string shorter than minLength");
  }
  if (v.is_array()) {
    if (auto it = s.find("minItems"); it != s.end() && v.size() < it->get<std::size_t>()) return fail("too few items");
    if (auto it = s.find("maxItems"); it != s.end() && v.size() > it->get<std::size_t>()) return fail("too many items");
    if (auto it = s.find("items"); it != s.end()) {
      for (std::size_t i = 0; i < v.size(); ++i)
        if (auto err = check(*it, v[i], at + "/" + std::to_string(i))) return err;
    }
  }
  if (v.is_object()) {
    if (auto it = s.find("required"); it != s.end()) {
      for (const auto& key : *it)
        if (!v.contains(key.get<std::string>())) return std::optional<std::string>(where + ": missing required property '" + key.get<std::string>() + "'");
    }
    const auto props = s.find("properties");
    for (const auto& [key, val] : v.items()) {
      if (props != s.end() && props->contains(key)) {
        if (auto err = check(props->at(key), val, at + "/" + key)) return err;
      } else if (auto ap = s.find("additionalProperties"); ap != s.end()) {
        if (ap->is_boolean() && !ap->get<bool>()) return fail("unexpected property '" + key + "'");
        if (ap->is_object())
          if (auto err = check(*ap, val, at + "/" + key)) return err;
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> validate(const nlohmann::json& schema, const nlohmann::json& value) {
  return check(schema, value, "");
}

}  // namespace tracealign::schema
