#pragma once

namespace fairsweep {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fairsweep
