#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "axygate/units.hpp"

namespace axygate {

// Fundamental constants in SI units. Two presets differ only in the electron
// gyromagnetic ratio: the rounded (2pi)x2.8 MHz/G value used to quote the
// headline numbers, and the exact CODATA value.
struct PhysicalConstants {
  double hbar = 1.054571817e-34;           // J s
  double kB = 1.380649e-23;                // J/K
  double gammaE = kTwoPi * 2.8e10;         // rad/(s T)
  double gamma = kTwoPi * 1.4e10;          // rad/(s T), = gammaE/2
  double ionMass = 2.838464542e-25;        // kg, 171Yb (170.9363302 u)
  double elemCharge = 1.602176634e-19;     // C
  double vacPermittivity = 8.8541878128e-12; // F/m

  static PhysicalConstants yb171() { return PhysicalConstants{}; }

  static PhysicalConstants yb171_codata() {
    PhysicalConstants c;
    c.gammaE = 1.76085963023e11;
    c.gamma = c.gammaE / 2.0;
    return c;
  }

  void validate() const {
    if (hbar <= 0 || kB <= 0 || gammaE <= 0 || ionMass <= 0 ||
        elemCharge <= 0 || vacPermittivity <= 0)
      throw std::invalid_argument("PhysicalConstants: all values must be positive");
    if (std::abs(gamma - gammaE / 2.0) > 1e-12 * gammaE)
      throw std::invalid_argument("PhysicalConstants: gamma must equal gammaE/2");
  }
};

// Trap operating point. Mode frequencies follow as nu1 = nu, nu2 = sqrt(3) nu.
struct TrapConfig {
  double nuAxial = angular_from_hz(150e3);  // rad/s
  double gradB = 150.0;                     // T/m
  double temperature = 50.0;                // K
  double electrodeDistance = 150e-6;        // m
  double ionSeparationOverride = 0.0;       // m; 0 = derive from equilibrium

  double nu1() const { return nuAxial; }
  double nu2() const { return kSqrt3 * nuAxial; }

  void validate() const {
    if (nuAxial <= 0) throw std::invalid_argument("TrapConfig: nuAxial must be > 0");
    if (gradB < 0) throw std::invalid_argument("TrapConfig: gradB must be >= 0");
    if (temperature <= 0) throw std::invalid_argument("TrapConfig: temperature must be > 0");
    if (electrodeDistance <= 0)
      throw std::invalid_argument("TrapConfig: electrodeDistance must be > 0");
    if (ionSeparationOverride < 0)
      throw std::invalid_argument("TrapConfig: ionSeparationOverride must be >= 0");
  }
};

// Measured reference point for the heating power-law extrapolation.
struct HeatingReference {
  double nDotComRef = 41.0;                    // phonons/s
  double nuComRef = angular_from_hz(427e3);    // rad/s
  double nDotBreRef = 7.0;                     // phonons/s
  double nuBreRef = angular_from_hz(459e3);    // rad/s
  double distRef = 310e-6;                     // m
  double tempRef = 300.0;                      // K
  double tempExponent = 2.13;

  void validate() const {
    if (nDotComRef <= 0 || nuComRef <= 0 || nDotBreRef <= 0 || nuBreRef <= 0 ||
        distRef <= 0 || tempRef <= 0)
      throw std::invalid_argument("HeatingReference: reference values must be positive");
  }
};

struct CouplingSet {
  double delta1 = 0.0;         // rad/s, qubit-com coupling
  double delta2 = 0.0;         // rad/s, qubit-breathing coupling
  double qubitSplitting = 0.0; // rad/s, omega2 - omega1
  double ionSeparation = 0.0;  // m
};

// Delta_m = (gammaE gB / 8) sqrt(hbar / (M nu_m)); the splitting comes from
// the two-ion Coulomb equilibrium separation, gamma gB dz.
inline CouplingSet derive_couplings(const PhysicalConstants& c, const TrapConfig& t) {
  c.validate();
  t.validate();
  CouplingSet out;
  out.delta1 = c.gammaE * t.gradB / 8.0 * std::sqrt(c.hbar / (c.ionMass * t.nu1()));
  out.delta2 = c.gammaE * t.gradB / 8.0 * std::sqrt(c.hbar / (c.ionMass * t.nu2()));
  double dz = t.ionSeparationOverride;
  if (dz == 0.0) {
    dz = std::cbrt(c.elemCharge * c.elemCharge /
                   (kTwoPi * c.vacPermittivity * c.ionMass * t.nuAxial * t.nuAxial));
  }
  out.ionSeparation = dz;
  out.qubitSplitting = c.gamma * t.gradB * dz;
  return out;
}

// Rabi frequency making the off-resonant crosstalk of a pi-pulse a pure
// z-rotation: Omega = delta / sqrt(4k^2 - 1), so that
// (1/2) sqrt(Omega^2 + delta^2) * (pi/Omega) = pi k.
inline double magic_rabi(double delta, int k) {
  if (delta <= 0) throw std::invalid_argument("magic_rabi: delta must be > 0");
  if (k < 1) throw std::invalid_argument("magic_rabi: k must be >= 1");
  return delta / std::sqrt(4.0 * double(k) * double(k) - 1.0);
}

// Bose-Einstein occupation of a mode at temperature T.
inline double thermal_occupation(double nu, double T,
                                 const PhysicalConstants& c = PhysicalConstants::yb171()) {
  if (nu <= 0 || T <= 0)
    throw std::invalid_argument("thermal_occupation: nu and T must be > 0");
  const double x = c.hbar * nu / (c.kB * T);
  return 1.0 / std::expm1(x);
}

struct HeatingRates {
  double nDotCom = 0.0;  // quanta/s
  double nDotBre = 0.0;  // quanta/s
  double gammaB = 0.0;   // 1/s, dissipator rate com
  double gammaC = 0.0;   // 1/s, dissipator rate breathing
  double nBarB = 0.0;    // bath occupation com
  double nBarC = 0.0;    // bath occupation breathing
};

// Power-law extrapolation from the reference point:
// ndot = ndot_ref (nu_ref/nu)^2 (d_ref/d)^4 (T_ref/T)^{-q}; Gamma = ndot/Nbar.
inline HeatingRates heating_rates(const PhysicalConstants& c, const TrapConfig& t,
                                  const HeatingReference& ref = HeatingReference{}) {
  t.validate();
  ref.validate();
  HeatingRates out;
  const double geom = std::pow(ref.distRef / t.electrodeDistance, 4.0) *
                      std::pow(ref.tempRef / t.temperature, -ref.tempExponent);
  out.nDotCom = ref.nDotComRef * std::pow(ref.nuComRef / t.nu1(), 2.0) * geom;
  out.nDotBre = ref.nDotBreRef * std::pow(ref.nuBreRef / t.nu2(), 2.0) * geom;
  out.nBarB = thermal_occupation(t.nu1(), t.temperature, c);
  out.nBarC = thermal_occupation(t.nu2(), t.temperature, c);
  out.gammaB = out.nDotCom / out.nBarB;
  out.gammaC = out.nDotBre / out.nBarC;
  return out;
}

// Ion-electrode distance needed for a target gradient, assuming gB ~ 1/d^2.
inline double distance_for_gradient(double gradTarget, double gradAnchor, double distAnchor) {
  if (gradTarget <= 0 || gradAnchor <= 0 || distAnchor <= 0)
    throw std::invalid_argument("distance_for_gradient: inputs must be positive");
  return distAnchor * std::sqrt(gradAnchor / gradTarget);
}

} // namespace axygate
