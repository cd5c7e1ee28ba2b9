#pragma once

namespace erosym {

inline constexpr const char* kVersion = "0.1.0";

} // namespace erosym
