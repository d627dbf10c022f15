#pragma once

namespace prognoses {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace prognoses
