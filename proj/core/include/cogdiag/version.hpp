#pragma once

namespace cogdiag {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cogdiag
