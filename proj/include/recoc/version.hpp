#pragma once

namespace recoc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace recoc
