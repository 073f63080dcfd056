#pragma once

namespace eitnoise {

inline constexpr const char* kEngineVersion = "0.1.0";

}  // namespace eitnoise
