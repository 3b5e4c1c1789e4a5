#pragma once

namespace phasejump {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace phasejump
