#pragma once

// Frozen constants of the quantitative dissipation bounds, produced by
// tools/calibrate (see README). Regenerate with `calibrate --write`.

namespace cagg::calibration {

/// c0 in F(Omega) <= -c0 A(Omega)^3 |Omega|^2: half the smallest ratio
/// -F / (A^3 |Omega|^2) over the calibration shapes at h = 1/64.
inline constexpr double kC0 = 0.033612633618773188;

/// C2 in C1 = C2 |Omega0|^(2/3) (1 + |Omega0| + M2)^(7/6), from c0.
inline constexpr double kC2 = 70.411387273991934;

}  // namespace cagg::calibration
