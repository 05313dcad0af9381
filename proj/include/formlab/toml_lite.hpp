#pragma once

#include <string>

#include "json.hpp"

namespace formlab::toml_lite {

/// Parses the TOML subset used by scenario configs into JSON: bare-key
/// `key = value` pairs, [table] and [[array-of-table]] headers with dotted
/// paths, strings with the usual escapes, booleans, numbers (inf and nan
/// included), and single-line arrays. No dotted keys, inline tables,
/// multiline strings, or dates. Throws std::runtime_error with a line number
/// on malformed input.
nlohmann::json parse(const std::string& text);

}  // namespace formlab::toml_lite
