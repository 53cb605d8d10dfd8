#pragma once

#include <cmath>

namespace axygate {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kSqrt3 = 1.7320508075688772935274463415059;

// All internal frequencies are angular (rad/s). The CLI and config surfaces
// speak ordinary Hz; conversion happens only at those boundaries.
inline constexpr double angular_from_hz(double hz) { return kTwoPi * hz; }
inline constexpr double hz_from_angular(double w) { return w / kTwoPi; }

} // namespace axygate
