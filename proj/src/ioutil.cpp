#include "capbench/ioutil.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace capbench {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

std::optional<json> extract_fenced_json(const std::string& reply) {
  std::size_t pos = 0;
  while ((pos = reply.find("```", pos)) != std::string::npos) {
    std::size_t body = reply.find('\n', pos);
    if (body == std::string::npos) return std::nullopt;
    ++body;
    const std::size_t close = reply.find("```", body);
    if (close == std::string::npos) return std::nullopt;
    const std::string block = reply.substr(body, close - body);
    try {
      json j = json::parse(block);
      if (j.is_object()) return j;
    } catch (const json::exception&) {
      // not JSON; keep scanning for a later fence
    }
    pos = close + 3;
  }
  return std::nullopt;
}

}  // namespace capbench
