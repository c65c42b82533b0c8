#pragma once

namespace pmred {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pmred
