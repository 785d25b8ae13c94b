#pragma once

namespace capbench {

inline constexpr const char* kToolVersion = "capbench 0.1.0";

}
