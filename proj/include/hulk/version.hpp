#pragma once

namespace hulk {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace hulk
