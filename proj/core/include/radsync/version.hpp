#pragma once

namespace radsync {
inline constexpr const char* kVersion = "0.1.0";
}
