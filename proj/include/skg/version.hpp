#pragma once

namespace skg {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace skg
