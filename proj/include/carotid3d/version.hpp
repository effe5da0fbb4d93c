#pragma once

namespace carotid {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace carotid
