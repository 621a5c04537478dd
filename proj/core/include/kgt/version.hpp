#pragma once

namespace kgt {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace kgt
