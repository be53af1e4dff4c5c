#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace chronoforge {

/// Reads the TOML subset used by run and hyperparameter configs: [tables]
/// and [dotted.tables], key = value with basic/literal strings, integers,
/// floats, booleans and single-line arrays of those, plus # comments.
/// Throws ParseError with the offending line.
nlohmann::json parse_toml(std::string_view text);

/// Inverse for flat objects of scalars (no nested tables).
std::string format_toml_flat(const nlohmann::ordered_json& obj);

}  // namespace chronoforge
