#pragma once

namespace flowact {

// Minimum-jerk time scaling s(u) on u in [0,1]: s(0)=0, s(1)=1 and zero
// velocity/acceleration at both ends.
inline double quintic_s(double u) { return u * u * u * (10.0 + u * (-15.0 + 6.0 * u)); }

inline double quintic_ds(double u) { return u * u * (30.0 + u * (-60.0 + 30.0 * u)); }

inline double quintic_dds(double u) { return u * (60.0 + u * (-180.0 + 120.0 * u)); }

// Max |jerk| of the unit quintic is at the endpoints: |s'''(0)| = 60.
inline double quintic_ddds(double u) { return 60.0 + u * (-360.0 + 360.0 * u); }

}  // namespace flowact
