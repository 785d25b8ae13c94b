#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace capbench {

// SHA-256 of the input bytes as a lowercase hex string. Used for content
// addressing (replay digests, config/corpus fingerprints), not for security.
std::string sha256_hex(const std::string& bytes);
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);

}  // namespace capbench
