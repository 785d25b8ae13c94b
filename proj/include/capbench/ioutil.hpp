#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace capbench {

// Reads a whole file as bytes; throws std::runtime_error naming the path.
std::string read_text_file(const std::string& path);

// Writes bytes, creating parent directories as needed.
void write_text_file(const std::string& path, const std::string& content);

// Finds the first ``` fenced block (with or without a language tag) that
// parses as a JSON object. Model replies wrap structured answers this way.
std::optional<nlohmann::json> extract_fenced_json(const std::string& reply);

}  // namespace capbench
