#pragma once

namespace tae {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tae
