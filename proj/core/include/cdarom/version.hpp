#pragma once

namespace cdarom {

inline constexpr const char* version_string = "cdarom 0.1.0";

}  // namespace cdarom
