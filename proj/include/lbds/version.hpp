#pragma once

namespace lbds {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace lbds
