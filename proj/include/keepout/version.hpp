#pragma once

namespace keepout {

inline constexpr const char* kToolVersion = "0.1.0";

} // namespace keepout
