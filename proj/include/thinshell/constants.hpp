#pragma once

#include <numbers>

namespace thinshell {

inline constexpr double pi = std::numbers::pi;
/// Vacuum permeability, H/m.
inline constexpr double mu0 = 4.0e-7 * std::numbers::pi;

}  // namespace thinshell
