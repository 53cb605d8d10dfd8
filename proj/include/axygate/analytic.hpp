#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "axygate/physics.hpp"
#include "axygate/sequence.hpp"
#include "axygate/units.hpp"

namespace axygate {

using cplx = std::complex<double>;

// G(t0,t) = int_{t0}^{t} f(t') e^{-i nu t'} dt', summed exactly over the
// constant-sign segments of f. A segment [a,b] with sign s contributes
// s (i/nu)(e^{-i nu b} - e^{-i nu a}); nu = 0 degenerates to s (b - a).
inline cplx g_integral(const ModulationFunction& f, double nu, double t0, double t) {
  if (t < t0) throw std::invalid_argument("g_integral: t must be >= t0");
  const auto& sw = f.switches();
  auto lo = std::upper_bound(sw.begin(), sw.end(), t0);
  cplx acc(0.0, 0.0);
  double a = t0;
  int sign = f.sign_at(t0);
  const cplx iOverNu = (nu != 0.0) ? cplx(0.0, 1.0 / nu) : cplx(0.0, 0.0);
  cplx ea = (nu != 0.0) ? std::polar(1.0, -nu * a) : cplx(1.0, 0.0);
  for (auto it = lo; it != sw.end() && *it < t; ++it) {
    const double b = *it;
    if (nu != 0.0) {
      const cplx eb = std::polar(1.0, -nu * b);
      acc += double(sign) * iOverNu * (eb - ea);
      ea = eb;
    } else {
      acc += double(sign) * (b - a);
    }
    a = b;
    sign = -sign;
  }
  if (nu != 0.0) {
    acc += double(sign) * iOverNu * (std::polar(1.0, -nu * t) - ea);
  } else {
    acc += double(sign) * (t - a);
  }
  return acc;
}

struct PhaseTilde {
  double phi1 = 0.0; // nu1^2 Im int [f1 G21 + f2 G11] e^{i nu1 t}
  double phi2 = 0.0; // nu2^2 Im int [f1 G22 + f2 G12] e^{i nu2 t}
  double phi = 0.0;  // phi1 - phi2 / (3 sqrt 3)
};

namespace detail {

// Im int_0^T [f1(t) G2(t) + f2(t) G1(t)] e^{i nu t} dt in closed form.
// Within a merged segment both signs are constant, so each inner G is
// (constant + exponential) and the outer integrand integrates exactly.
inline double phase_integral(const ModulationFunction& f1, const ModulationFunction& f2,
                             double nu, double T) {
  std::vector<double> pts;
  pts.reserve(f1.switches().size() + f2.switches().size() + 2);
  pts.push_back(0.0);
  for (double s : f1.switches())
    if (s > 0.0 && s < T) pts.push_back(s);
  for (double s : f2.switches())
    if (s > 0.0 && s < T) pts.push_back(s);
  pts.push_back(T);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  const cplx iOverNu(0.0, 1.0 / nu);
  cplx G1(0.0, 0.0), G2(0.0, 0.0);
  cplx acc(0.0, 0.0);
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double a = pts[k], b = pts[k + 1];
    const double m = 0.5 * (a + b);
    const double s1 = f1.sign_at(m), s2 = f2.sign_at(m);
    const cplx ema = std::polar(1.0, -nu * a);
    const cplx epa = std::polar(1.0, nu * a);
    const cplx epb = std::polar(1.0, nu * b);
    // f1 G2 + f2 G1 = [s1 (G2(a) - s2 (i/nu) e^{-i nu a}) +
    //                  s2 (G1(a) - s1 (i/nu) e^{-i nu a})] e^{i nu t} ... constant part
    //                 + 2 s1 s2 (i/nu)
    const cplx c0 = s1 * (G2 - s2 * iOverNu * ema) + s2 * (G1 - s1 * iOverNu * ema);
    acc += c0 * (epb - epa) / cplx(0.0, nu) + 2.0 * s1 * s2 * iOverNu * (b - a);
    const cplx emb = std::polar(1.0, -nu * b);
    G1 += s1 * iOverNu * (emb - ema);
    G2 += s2 * iOverNu * (emb - ema);
  }
  return acc.imag();
}

} // namespace detail

// Dimensionless two-qubit phase accumulants; nu2/nu1 = sqrt(3) fixed by the
// two-ion axial spectrum. Horizons of f1 and f2 must both cover T.
inline PhaseTilde phase_tilde(const ModulationFunction& f1, const ModulationFunction& f2,
                              double nu1, double T) {
  if (f1.horizon() + 1e-12 * T < T || f2.horizon() + 1e-12 * T < T)
    throw std::invalid_argument("phase_tilde: modulation horizons do not cover T");
  PhaseTilde out;
  const double nu2 = kSqrt3 * nu1;
  out.phi1 = nu1 * nu1 * detail::phase_integral(f1, f2, nu1, T);
  out.phi2 = nu2 * nu2 * detail::phase_integral(f1, f2, nu2, T);
  out.phi = out.phi1 - out.phi2 / (3.0 * kSqrt3);
  return out;
}

// Dimensionless AXY evaluation at nu1 = 1, tau = 2 pi r; staggerFrac is the
// ion-2 shift in units of tau. Depends only on (tauA, tauB, nBlocks, r).
inline PhaseTilde phase_tilde_axy(int r, int nBlocks, double tauA, double tauB,
                                  double staggerFrac = 0.0) {
  const double tau = kTwoPi * r;
  const auto f1 = make_axy_modulation(r, nBlocks, tauA, tauB, tau);
  const auto f2 = make_axy_modulation(r, nBlocks, tauA, tauB, tau, staggerFrac * tau);
  return phase_tilde(f1, f2, 1.0, nBlocks * tau);
}

// phi = (Delta1 / nu)^2 phi~.
inline double physical_phase(double phiTilde, const CouplingSet& cs, double nu) {
  const double pref = cs.delta1 / nu;
  return pref * pref * phiTilde;
}

// Spin-dependent displacement amplitudes and two-qubit phase of the exact
// Magnus solution: U = exp[-i sum_j {D1 b G_j1 + (-1)^j D2 c G_j2 + H.c.} sz_j]
// exp[i phi sz1 sz2]. disp[j][m] = (signed Delta_m) * G_jm(t).
struct MagnusResult {
  cplx disp[2][2] = {{cplx(0, 0), cplx(0, 0)}, {cplx(0, 0), cplx(0, 0)}};
  double phase = 0.0;
};

inline MagnusResult magnus_propagator(const ModulationFunction& f1,
                                      const ModulationFunction& f2,
                                      const CouplingSet& cs, double nu1, double nu2,
                                      double t) {
  MagnusResult out;
  out.disp[0][0] = cs.delta1 * g_integral(f1, nu1, 0.0, t);
  out.disp[0][1] = -cs.delta2 * g_integral(f1, nu2, 0.0, t);
  out.disp[1][0] = cs.delta1 * g_integral(f2, nu1, 0.0, t);
  out.disp[1][1] = cs.delta2 * g_integral(f2, nu2, 0.0, t);
  const double i1 = detail::phase_integral(f1, f2, nu1, t);
  const double i2 = detail::phase_integral(f1, f2, nu2, t);
  out.phase = cs.delta1 * cs.delta1 * i1 - cs.delta2 * cs.delta2 * i2;
  return out;
}

// Summary of the ideal gate produced by a modulation pair.
struct AnalyticGateReport {
  cplx gTilde[2][2] = {{cplx(0, 0), cplx(0, 0)}, {cplx(0, 0), cplx(0, 0)}}; // nu_m G_jm
  double phiTilde = 0.0;
  double phiPhysical = 0.0;
  double gateTime = 0.0;
  int r = 0;
  int nBlocks = 0;
};

inline AnalyticGateReport analyze_gate(const ModulationFunction& f1,
                                       const ModulationFunction& f2,
                                       const CouplingSet& cs, double nu1, int r,
                                       int nBlocks) {
  AnalyticGateReport rep;
  rep.r = r;
  rep.nBlocks = nBlocks;
  const double nu2 = kSqrt3 * nu1;
  rep.gateTime = nBlocks * kTwoPi * r / nu1;
  rep.gTilde[0][0] = nu1 * g_integral(f1, nu1, 0.0, rep.gateTime);
  rep.gTilde[0][1] = nu2 * g_integral(f1, nu2, 0.0, rep.gateTime);
  rep.gTilde[1][0] = nu1 * g_integral(f2, nu1, 0.0, rep.gateTime);
  rep.gTilde[1][1] = nu2 * g_integral(f2, nu2, 0.0, rep.gateTime);
  const PhaseTilde pt = phase_tilde(f1, f2, nu1, rep.gateTime);
  rep.phiTilde = pt.phi;
  rep.phiPhysical = physical_phase(pt.phi, cs, nu1);
  return rep;
}

} // namespace axygate
