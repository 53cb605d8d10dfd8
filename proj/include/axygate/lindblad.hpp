#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "axygate/designer.hpp"
#include "axygate/operators.hpp"
#include "axygate/physics.hpp"
#include "axygate/sequence.hpp"

namespace axygate {

struct TruncationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Systematic error knobs. Signs are applied as given (positive by default
// convention); the schedule always remains the nominally designed one.
struct ErrorInjection {
  double rabiRelError = 0.0;   // Omega -> (1+e) Omega inside H, durations unchanged
  double trapRelShift = 0.0;   // nu_m -> (1+e) nu_m inside H, schedule nominal
  double qubitShift = 0.0;     // rad/s, + (xi/2) sigma_z on both ions
  double staggerFactor = 1.0;  // multiplies the designed stagger when executing
  bool shiftCouplings = false; // co-shift Delta_m with the trap shift
  bool includeCrosstalk = true;

  void validate() const {
    if (std::abs(rabiRelError) >= 0.2 || std::abs(trapRelShift) >= 0.2)
      throw std::invalid_argument("ErrorInjection: relative errors must stay below 0.2");
    if (staggerFactor <= 0.0)
      throw std::invalid_argument("ErrorInjection: staggerFactor must be > 0");
  }
};

struct SimConfig {
  GateDesign design;
  int fockB = 8;
  int fockC = 8;
  double initThermal = 0.2;
  Eigen::Vector4cd initQubit = Eigen::Vector4cd::Zero();
  bool dissipation = true;
  HeatingRates heating;
  ErrorInjection errors;

  enum class Method { PiecewiseExact, Rk4 };
  Method method = Method::PiecewiseExact;
  double gapChunk = 250e-9;       // s, splitting interval of the exact stepper
  double pulseStepDivisor = 40.0; // rk4 pulse step = 2pi / (divisor * delta_max)
  double gapStepCap = 10e-9;      // rk4 gap step = min(2pi/(divisor nu2'), cap)
  double topLevelTol = 1e-4;      // truncation-overflow threshold
  double initTailTol = 1e-5;      // initial thermal tail beyond the kept levels

  // optional (t, rho) observer invoked at segment boundaries
  std::function<void(double, const MatrixXcd&)> observer;

  void validate() const {
    if (fockB < 4 || fockC < 4)
      throw std::invalid_argument("SimConfig: truncations must be >= 4");
    if (initThermal < 0) throw std::invalid_argument("SimConfig: initThermal must be >= 0");
    if (gapChunk <= 0 || gapStepCap <= 0)
      throw std::invalid_argument("SimConfig: steps must be positive");
    if (pulseStepDivisor < 20.0)
      throw std::invalid_argument("SimConfig: pulse step must resolve delta_max (divisor >= 20)");
    if (std::abs(initQubit.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("SimConfig: initQubit must be normalized");
    errors.validate();
  }

  std::string method_tag() const {
    return method == Method::PiecewiseExact ? "strang-exact" : "rk4-fixed";
  }
};

struct EvolveDiagnostics {
  double traceDrift = 0.0;
  double hermDrift = 0.0;
  double minEigenvalue = 0.0;
  double topPopB = 0.0;
  double topPopC = 0.0;
  long windowCount = 0;
  long stepCount = 0;
  std::string methodTag;
};

struct EvolveResult {
  MatrixXcd rho;  // interaction-picture density operator at the final time
  double finalTime = 0.0;
  EvolveDiagnostics diag;
};

struct SimReport {
  std::string state;
  double infidelity = 0.0;
  double phaseEstimate = 0.0;
  double traceDrift = 0.0;
  double hermDrift = 0.0;
  double minEigenvalue = 0.0;
  double topPopB = 0.0;
  double topPopC = 0.0;
  double wallSeconds = 0.0;
  std::string methodTag;
};

// Table-style initial states, normalized as printed.
inline Eigen::Vector4cd standard_state(int index) {
  using std::complex;
  const complex<double> i(0.0, 1.0);
  Eigen::Vector4cd v = Eigen::Vector4cd::Zero();
  switch (index) {
    case 1: v << 1, 1, 0, 0; break;                 // g (g+e)
    case 2: v << 1, 1, 1, 1; break;                 // (g+e)(g+e)
    case 3: v << 1, i, 0, 1; break;                 // g(g+ie) + ee
    case 4: v << 1, 0, 1, -i; break;                // e(g-ie) + gg
    case 5: v << 1, i, 1, -i; break;                // e(g-ie) + g(g+ie)
    default: throw std::invalid_argument("standard_state: index must be 1..5");
  }
  v.normalize();
  return v;
}

// exp(i phi sz1 sz2) |psi>
inline Eigen::Vector4cd ideal_target(const Eigen::Vector4cd& init, double phi) {
  Eigen::Vector4cd out = init;
  const double zz[4] = {1.0, -1.0, -1.0, 1.0}; // gg, ge, eg, ee
  for (int q = 0; q < 4; ++q) out(q) *= std::polar(1.0, phi * zz[q]);
  return out;
}

namespace simdetail {

struct PulseWindow {
  double t0 = 0.0;
  double t1 = 0.0;
  int ion = 1;
  double phase = 0.0;
  double rabiNominal = 0.0;
};

struct Context {
  // problem sizes
  int nb = 0, nc = 0, modeDim = 0, dim = 0;
  // physics
  double nu1p = 0.0, nu2p = 0.0;   // shifted mode frequencies
  double d1 = 0.0, d2 = 0.0;       // couplings used in H
  double splitting = 0.0;          // omega2 - omega1
  double xi = 0.0;                 // qubit shift
  double rabiScale = 1.0;
  bool crosstalk = true;
  // spin-sector data: z1, z2 per q index (gg, ge, eg, ee)
  int z1[4] = {-1, -1, 1, 1};
  int z2[4] = {-1, 1, -1, 1};
  // sector mode Hamiltonians, eigendecomposed
  Eigen::SelfAdjointEigenSolver<MatrixXcd> eigB[4];
  Eigen::SelfAdjointEigenSolver<MatrixXcd> eigC[4];
  double sectorConst[4] = {0, 0, 0, 0};
  MatrixXcd hStatic; // dense semi-lab static Hamiltonian
  // dissipator rates
  bool dissipation = false;
  double kdB = 0, kuB = 0, kdC = 0, kuC = 0;

  std::vector<PulseWindow> windows;
  double horizon = 0.0;

  int flat(int q, int ib, int ic) const { return (q * nb + ib) * nc + ic; }
};

inline Context build_context(const SimConfig& cfg) {
  cfg.validate();
  Context cx;
  cx.nb = cfg.fockB;
  cx.nc = cfg.fockC;
  cx.modeDim = cx.nb * cx.nc;
  cx.dim = 4 * cx.modeDim;

  const GateDesign& d = cfg.design;
  const double nu1 = d.trap.nu1();
  const double nu2 = d.trap.nu2();
  cx.nu1p = nu1 * (1.0 + cfg.errors.trapRelShift);
  cx.nu2p = nu2 * (1.0 + cfg.errors.trapRelShift);
  const double cShift = cfg.errors.shiftCouplings
                            ? 1.0 / std::sqrt(1.0 + cfg.errors.trapRelShift)
                            : 1.0;
  cx.d1 = d.couplings.delta1 * cShift;
  cx.d2 = d.couplings.delta2 * cShift;
  cx.splitting = d.couplings.qubitSplitting;
  cx.xi = cfg.errors.qubitShift;
  cx.rabiScale = 1.0 + cfg.errors.rabiRelError;
  cx.crosstalk = cfg.errors.includeCrosstalk;

  const MatrixXcd b = destroy_op(cx.nb);
  const MatrixXcd c = destroy_op(cx.nc);
  const MatrixXcd xb = b + b.adjoint();
  const MatrixXcd xc = c + c.adjoint();
  const MatrixXcd numB = number_op(cx.nb);
  const MatrixXcd numC = number_op(cx.nc);

  cx.hStatic = MatrixXcd::Zero(cx.dim, cx.dim);
  for (int q = 0; q < 4; ++q) {
    const double gb = cx.d1 * (cx.z1[q] + cx.z2[q]);
    const double gc = cx.d2 * (cx.z2[q] - cx.z1[q]);
    const MatrixXcd hb = cx.nu1p * numB + gb * xb;
    const MatrixXcd hc = cx.nu2p * numC + gc * xc;
    cx.eigB[q].compute(hb);
    cx.eigC[q].compute(hc);
    cx.sectorConst[q] = 0.5 * cx.xi * (cx.z1[q] + cx.z2[q]);
    MatrixXcd hsec = kron(hb, MatrixXcd::Identity(cx.nc, cx.nc)) +
                     kron(MatrixXcd::Identity(cx.nb, cx.nb), hc);
    hsec.diagonal().array() += cx.sectorConst[q];
    cx.hStatic.block(q * cx.modeDim, q * cx.modeDim, cx.modeDim, cx.modeDim) = hsec;
  }

  if (cfg.dissipation) {
    cx.dissipation = true;
    cx.kdB = cfg.heating.gammaB * (cfg.heating.nBarB + 1.0);
    cx.kuB = cfg.heating.gammaB * cfg.heating.nBarB;
    cx.kdC = cfg.heating.gammaC * (cfg.heating.nBarC + 1.0);
    cx.kuC = cfg.heating.gammaC * cfg.heating.nBarC;
  }

  // executed schedule: nominal design, stagger scaled by the error knob
  AxyParams seq = d.seq;
  seq.stagger *= cfg.errors.staggerFactor;
  auto [s1, s2] = build_schedule(seq, nu1);
  for (const auto& sch : {s1, s2}) {
    for (const auto& e : sch.events) {
      PulseWindow w;
      w.t0 = e.start();
      w.t1 = e.end();
      w.ion = e.ion;
      w.phase = e.axisPhase;
      w.rabiNominal = e.rabi;
      cx.windows.push_back(w);
    }
  }
  std::sort(cx.windows.begin(), cx.windows.end(),
            [](const PulseWindow& a, const PulseWindow& b) { return a.t0 < b.t0; });
  cx.horizon = std::max({s1.nominalTime, s1.totalTime, s2.totalTime});
  return cx;
}

// D(rho), thermal Lindblad terms on both modes, written directly from the
// ladder-operator index shifts (O(dim^2)).
inline void apply_dissipator(const Context& cx, const MatrixXcd& rho, MatrixXcd& out) {
  const int dim = cx.dim, nb = cx.nb, nc = cx.nc;
  out.setZero(dim, dim);
  if (!cx.dissipation) return;
  auto ibOf = [&](int i) { return (i / nc) % nb; };
  auto icOf = [&](int i) { return i % nc; };
  // L+L for the truncated raising operator vanishes in the top level; using
  // N+1 there would leak trace at the truncation edge.
  auto upB = [&](int n) { return (n + 1 < nb) ? double(n + 1) : 0.0; };
  auto upC = [&](int n) { return (n + 1 < nc) ? double(n + 1) : 0.0; };
  for (int i = 0; i < dim; ++i) {
    const int bi = ibOf(i), ci = icOf(i);
    for (int j = 0; j < dim; ++j) {
      const int bj = ibOf(j), cj = icOf(j);
      std::complex<double> acc(0.0, 0.0);
      // mode b down: kd [ b rho b+ - 1/2 {n, rho} ]
      if (bi + 1 < nb && bj + 1 < nb)
        acc += cx.kdB * std::sqrt(double((bi + 1) * (bj + 1))) * rho(i + nc, j + nc);
      acc -= cx.kdB * 0.5 * double(bi + bj) * rho(i, j);
      // mode b up: ku [ b+ rho b - 1/2 {b b+, rho} ]
      if (bi >= 1 && bj >= 1)
        acc += cx.kuB * std::sqrt(double(bi * bj)) * rho(i - nc, j - nc);
      acc -= cx.kuB * 0.5 * (upB(bi) + upB(bj)) * rho(i, j);
      // mode c down
      if (ci + 1 < nc && cj + 1 < nc)
        acc += cx.kdC * std::sqrt(double((ci + 1) * (cj + 1))) * rho(i + 1, j + 1);
      acc -= cx.kdC * 0.5 * double(ci + cj) * rho(i, j);
      // mode c up
      if (ci >= 1 && cj >= 1)
        acc += cx.kuC * std::sqrt(double(ci * cj)) * rho(i - 1, j - 1);
      acc -= cx.kuC * 0.5 * (upC(ci) + upC(cj)) * rho(i, j);
      out(i, j) = acc;
    }
  }
}

// rho <- exp(D h) rho, second-order Taylor (rates x h stay far below 1e-3).
inline void dissipator_halfstep(const Context& cx, MatrixXcd& rho, double h, MatrixXcd& w1,
                                MatrixXcd& w2) {
  if (!cx.dissipation || h == 0.0) return;
  apply_dissipator(cx, rho, w1);
  apply_dissipator(cx, w1, w2);
  rho += h * w1 + (0.5 * h * h) * w2;
}

// Sector gap propagator for duration h: kron(Ub_q, Uc_q) e^{-i const_q h}.
inline MatrixXcd gap_unitary(const Context& cx, int q, double h) {
  const auto& eb = cx.eigB[q];
  const auto& ec = cx.eigC[q];
  VectorXcd pb(cx.nb), pc(cx.nc);
  for (int k = 0; k < cx.nb; ++k) pb(k) = std::polar(1.0, -eb.eigenvalues()(k) * h);
  for (int k = 0; k < cx.nc; ++k) pc(k) = std::polar(1.0, -ec.eigenvalues()(k) * h);
  MatrixXcd ub = eb.eigenvectors() * pb.asDiagonal() * eb.eigenvectors().adjoint();
  MatrixXcd uc = ec.eigenvectors() * pc.asDiagonal() * ec.eigenvectors().adjoint();
  MatrixXcd u = kron(ub, uc);
  u *= std::polar(1.0, -cx.sectorConst[q] * h);
  return u;
}

// Window Hamiltonian in the frame where the spectator crosstalk is static:
// H~ = H_static + (W/2) sigma_ion^phi + [crosstalk] (W/2) sigma_spec^phi
//      + (delta_spec/2) sigma_spec^z.
inline MatrixXcd window_hamiltonian(const Context& cx, int ion, double phase, double rabi) {
  const MatrixXcd i2 = MatrixXcd::Identity(2, 2);
  const MatrixXcd im = MatrixXcd::Identity(cx.modeDim, cx.modeDim);
  const MatrixXcd sp = sigma_phi(phase);
  MatrixXcd h = cx.hStatic;
  const MatrixXcd drive = (ion == 1) ? kron(kron(sp, i2), im) : kron(kron(i2, sp), im);
  h += 0.5 * rabi * drive;
  if (cx.crosstalk) {
    const int spec = (ion == 1) ? 2 : 1;
    const double deltaSpec = (ion == 1) ? cx.splitting : -cx.splitting;
    const MatrixXcd spSpec = (spec == 1) ? kron(kron(sp, i2), im) : kron(kron(i2, sp), im);
    const MatrixXcd zSpec = (spec == 1) ? kron(kron(pauli_z(), i2), im)
                                        : kron(kron(i2, pauli_z()), im);
    h += 0.5 * rabi * spSpec + 0.5 * deltaSpec * zSpec;
  }
  return h;
}

// Diagonal of exp(+i (delta_spec/2) t sigma_spec^z) in the full space.
inline VectorXcd spectator_phase(const Context& cx, int ion, double t) {
  VectorXcd ph = VectorXcd::Ones(cx.dim);
  if (!cx.crosstalk) return ph;
  const int spec = (ion == 1) ? 2 : 1;
  const double deltaSpec = (ion == 1) ? cx.splitting : -cx.splitting;
  for (int q = 0; q < 4; ++q) {
    const int z = (spec == 1) ? cx.z1[q] : cx.z2[q];
    const std::complex<double> f = std::polar(1.0, 0.5 * deltaSpec * t * z);
    for (int k = 0; k < cx.modeDim; ++k) ph(q * cx.modeDim + k) = f;
  }
  return ph;
}

} // namespace simdetail

// Rotating-frame Hamiltonian of the simulation model at time t: sigma_z-boson
// couplings with e^{-i nu' t} phases, resonant drives inside pulse windows,
// crosstalk on the spectator with e^{i delta t}, and the static qubit shifts.
inline MatrixXcd hamiltonian_at(double t, const SimConfig& cfg) {
  using namespace simdetail;
  const Context cx = build_context(cfg);
  const MatrixXcd i2 = MatrixXcd::Identity(2, 2);
  const MatrixXcd ib = MatrixXcd::Identity(cx.nb, cx.nb);
  const MatrixXcd ic = MatrixXcd::Identity(cx.nc, cx.nc);
  const MatrixXcd b = destroy_op(cx.nb);
  const MatrixXcd c = destroy_op(cx.nc);
  const MatrixXcd z1 = kron(kron(pauli_z(), i2), kron(ib, ic));
  const MatrixXcd z2 = kron(kron(i2, pauli_z()), kron(ib, ic));
  const MatrixXcd bFull = kron(kron(i2, i2), kron(b, ic));
  const MatrixXcd cFull = kron(kron(i2, i2), kron(ib, c));

  MatrixXcd h = MatrixXcd::Zero(cx.dim, cx.dim);
  const cplx e1 = std::polar(1.0, -cx.nu1p * t);
  const cplx e2 = std::polar(1.0, -cx.nu2p * t);
  MatrixXcd m1 = cx.d1 * e1 * bFull;
  m1 += m1.adjoint().eval();
  MatrixXcd m2 = cx.d2 * e2 * cFull;
  m2 += m2.adjoint().eval();
  h += m1 * (z1 + z2) + m2 * (z2 - z1);
  h += 0.5 * cx.xi * (z1 + z2);

  for (const auto& w : cx.windows) {
    if (t < w.t0 || t >= w.t1) continue;
    const double rabi = w.rabiNominal * cx.rabiScale;
    const MatrixXcd sp = sigma_phi(w.phase);
    h += 0.5 * rabi * ((w.ion == 1) ? kron(kron(sp, i2), kron(ib, ic))
                                    : kron(kron(i2, sp), kron(ib, ic)));
    if (cx.crosstalk) {
      const int spec = (w.ion == 1) ? 2 : 1;
      const double deltaSpec = (w.ion == 1) ? cx.splitting : -cx.splitting;
      const MatrixXcd spl = sigma_plus();
      MatrixXcd ct = (spec == 1) ? kron(kron(spl, i2), kron(ib, ic))
                                 : kron(kron(i2, spl), kron(ib, ic));
      ct *= 0.5 * rabi * std::polar(1.0, deltaSpec * t + w.phase);
      h += ct + ct.adjoint().eval();
    }
  }
  return h;
}

namespace simdetail {

inline EvolveResult evolve_exact(const SimConfig& cfg, const Context& cx) {
  const int dim = cx.dim, m = cx.modeDim;
  MatrixXcd rho = MatrixXcd::Zero(dim, dim);
  {
    const MatrixXcd q0 = cfg.initQubit * cfg.initQubit.adjoint();
    const MatrixXcd th = kron(thermal_state(cfg.initThermal, cx.nb),
                              thermal_state(cfg.initThermal, cx.nc));
    rho = kron(q0, th);
  }
  MatrixXcd w1(dim, dim), w2(dim, dim);

  // distinct window Hamiltonians, eigendecomposed once
  std::map<std::pair<int, long long>, Eigen::SelfAdjointEigenSolver<MatrixXcd>> windowEig;
  auto windowKey = [](int ion, double phase) {
    return std::make_pair(ion, std::llround(phase * 1e12));
  };
  for (const auto& w : cx.windows) {
    const auto key = windowKey(w.ion, w.phase);
    if (windowEig.count(key)) continue;
    windowEig[key].compute(window_hamiltonian(cx, w.ion, w.phase, w.rabiNominal * cx.rabiScale));
  }

  long steps = 0;
  MatrixXcd us[4];
  auto propagate_gap = [&](double t0, double t1) {
    double t = t0;
    double hCached = -1.0;
    while (t < t1 - 1e-18) {
      const double h = std::min(cfg.gapChunk, t1 - t);
      if (h != hCached) {
        for (int q = 0; q < 4; ++q) us[q] = gap_unitary(cx, q, h);
        hCached = h;
      }
      dissipator_halfstep(cx, rho, 0.5 * h, w1, w2);
      for (int q = 0; q < 4; ++q) w2.block(q * m, 0, m, dim) = us[q] * rho.block(q * m, 0, m, dim);
      for (int p = 0; p < 4; ++p) rho.block(0, p * m, dim, m) = w2.block(0, p * m, dim, m) * us[p].adjoint();
      dissipator_halfstep(cx, rho, 0.5 * h, w1, w2);
      t += h;
      ++steps;
      if (cfg.observer) cfg.observer(t, rho);
    }
  };

  double t = 0.0;
  for (const auto& w : cx.windows) {
    if (w.t0 > t) propagate_gap(t, w.t0);
    const double tw = w.t1 - w.t0;
    dissipator_halfstep(cx, rho, 0.5 * tw, w1, w2);
    const auto& es = windowEig.at(windowKey(w.ion, w.phase));
    VectorXcd ph(dim);
    for (int k = 0; k < dim; ++k) ph(k) = std::polar(1.0, -es.eigenvalues()(k) * tw);
    MatrixXcd u = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
    if (cx.crosstalk) {
      const VectorXcd p1 = spectator_phase(cx, w.ion, w.t1);
      const VectorXcd p0 = spectator_phase(cx, w.ion, w.t0);
      u = p1.asDiagonal() * u * p0.conjugate().asDiagonal();
    }
    rho = u * rho * u.adjoint();
    dissipator_halfstep(cx, rho, 0.5 * tw, w1, w2);
    t = w.t1;
    ++steps;
    if (cfg.observer) cfg.observer(t, rho);
  }
  if (t < cx.horizon) propagate_gap(t, cx.horizon);

  EvolveResult out;
  out.rho = std::move(rho);
  out.finalTime = cx.horizon;
  out.diag.stepCount = steps;
  out.diag.windowCount = long(cx.windows.size());
  return out;
}

inline MatrixXcd rk4_rhs(const Context& cx, const MatrixXcd& h, const MatrixXcd& rho,
                         MatrixXcd& wd) {
  MatrixXcd out = cplx(0.0, -1.0) * (h * rho - rho * h);
  if (cx.dissipation) {
    apply_dissipator(cx, rho, wd);
    out += wd;
  }
  return out;
}

// Rotating-frame Hamiltonian assembled from cached constant pieces.
struct Rk4Pieces {
  MatrixXcd t1, t2;       // Delta (Zsum) B and Delta (Zdiff) C, to be phased
  MatrixXcd hShift;       // static qubit shifts
  MatrixXcd drive1, drive2;       // per-window resonant parts (phase applied later)
  MatrixXcd ctPlus1, ctPlus2;     // sigma^+ embeddings for crosstalk
};

inline EvolveResult evolve_rk4(const SimConfig& cfg, const Context& cx) {
  const int dim = cx.dim;
  MatrixXcd rho;
  {
    const MatrixXcd q0 = cfg.initQubit * cfg.initQubit.adjoint();
    rho = kron(q0, kron(thermal_state(cfg.initThermal, cx.nb),
                        thermal_state(cfg.initThermal, cx.nc)));
  }
  const MatrixXcd i2 = MatrixXcd::Identity(2, 2);
  const MatrixXcd ib = MatrixXcd::Identity(cx.nb, cx.nb);
  const MatrixXcd ic = MatrixXcd::Identity(cx.nc, cx.nc);
  const MatrixXcd bFull = kron(kron(i2, i2), kron(destroy_op(cx.nb), ic));
  const MatrixXcd cFull = kron(kron(i2, i2), kron(ib, destroy_op(cx.nc)));
  const MatrixXcd z1 = kron(kron(pauli_z(), i2), kron(ib, ic));
  const MatrixXcd z2 = kron(kron(i2, pauli_z()), kron(ib, ic));
  const MatrixXcd t1 = cx.d1 * (z1 + z2) * bFull;
  const MatrixXcd t2 = cx.d2 * (z2 - z1) * cFull;
  const MatrixXcd hShift = 0.5 * cx.xi * (z1 + z2);
  const MatrixXcd sPlus1 = kron(kron(sigma_plus(), i2), kron(ib, ic));
  const MatrixXcd sPlus2 = kron(kron(i2, sigma_plus()), kron(ib, ic));

  const simdetail::PulseWindow* active = nullptr;
  auto hAt = [&](double t) {
    MatrixXcd h = std::polar(1.0, -cx.nu1p * t) * t1 + std::polar(1.0, -cx.nu2p * t) * t2;
    h += h.adjoint().eval();
    h += hShift;
    if (active) {
      const double rabi = active->rabiNominal * cx.rabiScale;
      const MatrixXcd sp = sigma_phi(active->phase);
      h += 0.5 * rabi * ((active->ion == 1) ? kron(kron(sp, i2), kron(ib, ic))
                                            : kron(kron(i2, sp), kron(ib, ic)));
      if (cx.crosstalk) {
        const double deltaSpec = (active->ion == 1) ? cx.splitting : -cx.splitting;
        MatrixXcd ct = (active->ion == 1) ? sPlus2 : sPlus1;
        ct *= 0.5 * rabi * std::polar(1.0, deltaSpec * t + active->phase);
        h += ct + ct.adjoint().eval();
      }
    }
    return h;
  };

  MatrixXcd wd(dim, dim);
  long steps = 0;
  auto rk4_span = [&](double a, double b, double hTarget) {
    if (b <= a) return;
    const int n = std::max(1, int(std::ceil((b - a) / hTarget)));
    const double h = (b - a) / n;
    for (int s = 0; s < n; ++s) {
      const double t = a + s * h;
      const MatrixXcd h0 = hAt(t);
      const MatrixXcd hm = hAt(t + 0.5 * h);
      const MatrixXcd h1 = hAt(t + h);
      const MatrixXcd k1 = rk4_rhs(cx, h0, rho, wd);
      const MatrixXcd k2 = rk4_rhs(cx, hm, rho + 0.5 * h * k1, wd);
      const MatrixXcd k3 = rk4_rhs(cx, hm, rho + 0.5 * h * k2, wd);
      const MatrixXcd k4 = rk4_rhs(cx, h1, rho + h * k3, wd);
      rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      ++steps;
    }
  };

  const double deltaMax = std::max({std::abs(cx.splitting), cx.nu2p});
  const double pulseStep = kTwoPi / (cfg.pulseStepDivisor * deltaMax);
  const double gapStep = std::min(kTwoPi / (cfg.pulseStepDivisor * cx.nu2p), cfg.gapStepCap);

  double t = 0.0;
  for (const auto& w : cx.windows) {
    if (w.t0 > t) {
      active = nullptr;
      rk4_span(t, w.t0, gapStep);
    }
    active = &w;
    rk4_span(w.t0, w.t1, pulseStep);
    t = w.t1;
  }
  active = nullptr;
  if (t < cx.horizon) rk4_span(t, cx.horizon, gapStep);

  EvolveResult out;
  out.rho = std::move(rho);
  out.finalTime = cx.horizon;
  out.diag.stepCount = steps;
  out.diag.windowCount = long(cx.windows.size());
  return out;
}

} // namespace simdetail

// Integrates d rho/dt = -i [H(t), rho] + D(rho) over the full schedule and
// returns rho in the rotating frame of the model Hamiltonian. The default
// method composes exact segment propagators with a Strang-split dissipator;
// rk4 is the literal fixed-step integrator on the rotating-frame equation.
inline EvolveResult evolve(const SimConfig& cfg) {
  using namespace simdetail;
  if (thermal_tail(cfg.initThermal, cfg.fockB) > cfg.initTailTol ||
      thermal_tail(cfg.initThermal, cfg.fockC) > cfg.initTailTol)
    throw TruncationError("evolve: initial thermal tail exceeds the kept Fock levels");
  const Context cx = build_context(cfg);
  EvolveResult res = (cfg.method == SimConfig::Method::Rk4) ? evolve_rk4(cfg, cx)
                                                            : evolve_exact(cfg, cx);
  if (cfg.method == SimConfig::Method::PiecewiseExact) {
    // semi-lab frame -> rotating frame: conjugate by exp(+i H0 T), diagonal in
    // the number basis.
    VectorXcd ph(cx.dim);
    for (int q = 0; q < 4; ++q)
      for (int ibn = 0; ibn < cx.nb; ++ibn)
        for (int icn = 0; icn < cx.nc; ++icn)
          ph(cx.flat(q, ibn, icn)) =
              std::polar(1.0, (cx.nu1p * ibn + cx.nu2p * icn) * res.finalTime);
    res.rho = ph.asDiagonal() * res.rho * ph.conjugate().asDiagonal();
  }
  res.diag.methodTag = cfg.method_tag();

  // hygiene metrics and truncation audit
  const MatrixXcd& rho = res.rho;
  res.diag.traceDrift = std::abs(rho.trace().real() - 1.0) + std::abs(rho.trace().imag());
  res.diag.hermDrift = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (rho + rho.adjoint()));
  res.diag.minEigenvalue = es.eigenvalues().minCoeff();
  double popB = 0.0, popC = 0.0;
  for (int q = 0; q < 4; ++q)
    for (int ibn = 0; ibn < cx.nb; ++ibn)
      for (int icn = 0; icn < cx.nc; ++icn) {
        const double p = rho(cx.flat(q, ibn, icn), cx.flat(q, ibn, icn)).real();
        if (ibn == cx.nb - 1) popB += p;
        if (icn == cx.nc - 1) popC += p;
      }
  res.diag.topPopB = popB;
  res.diag.topPopC = popC;
  if (popB > cfg.topLevelTol || popC > cfg.topLevelTol)
    throw TruncationError("evolve: top Fock level population " +
                          std::to_string(std::max(popB, popC)) +
                          " exceeds the truncation-overflow threshold");
  return res;
}

// 1 - <psi_t| Tr_motion(rho) |psi_t> with |psi_t> = exp(i phi sz sz) |psi_0>.
// The ideal 20-pulse Pauli product of an even-n AXY sequence is a global
// phase and drops out of the overlap.
inline double state_infidelity(const MatrixXcd& rho, const GateDesign& design,
                               const Eigen::Vector4cd& initQubit, int nb, int nc) {
  const Eigen::Matrix4cd rq = trace_out_motion(rho, nb, nc);
  const double tr = rq.trace().real();
  if (std::abs(tr - 1.0) > 1e-6)
    throw std::invalid_argument("state_infidelity: reduced state is not normalized");
  const Eigen::Vector4cd target = ideal_target(initQubit, design.signedPhase);
  const double f = std::real(target.dot(rq * target)); // dot conjugates the lhs
  return 1.0 - f;
}

// Achieved two-qubit phase from the zz coherences of the evolved full
// superposition state.
inline double phase_estimate(const MatrixXcd& rho, int nb, int nc) {
  const Eigen::Matrix4cd rq = trace_out_motion(rho, nb, nc);
  const cplx acc = rq(0, 1) + rq(0, 2) + std::conj(rq(1, 3)) + std::conj(rq(2, 3));
  return 0.5 * std::arg(acc);
}

// Analytic one-pulse propagator on the two-qubit space: driven ion rotates by
// pi about its phase axis; the spectator picks up a dephasing factor and a
// residual rotation about a t0-dependent tilted axis.
inline Eigen::Matrix4cd crosstalk_propagator(double omega, double delta, double phase,
                                             double t0) {
  if (omega <= 0 || delta <= 0)
    throw std::invalid_argument("crosstalk_propagator: omega and delta must be > 0");
  using Mat2 = Eigen::Matrix2cd;
  const double tpi = (kTwoPi / 2.0) / omega;
  const double gamma = 0.5 * std::sqrt(omega * omega + delta * delta);
  const cplx im(0.0, 1.0);
  const Mat2 i2 = Mat2::Identity();

  Mat2 u1 = std::cos(0.5 * omega * tpi) * i2;
  u1 -= im * std::sin(0.5 * omega * tpi) * Mat2(sigma_phi(phase));
  Mat2 deph = Mat2::Zero();
  deph(0, 0) = std::polar(1.0, -0.5 * delta * tpi);
  deph(1, 1) = std::polar(1.0, 0.5 * delta * tpi);
  Mat2 axis = (omega / (2.0 * gamma)) * Mat2(sigma_phi(phase + delta * t0)) +
              (delta / (2.0 * gamma)) * Mat2(pauli_z());
  Mat2 u2 = std::cos(gamma * tpi) * i2 - im * std::sin(gamma * tpi) * axis;

  Eigen::Matrix4cd out;
  out = kron(u1, deph * u2);
  return out;
}

// Magnus propagator exponentiated on the truncated two-mode space, for
// comparison against time-ordered integration.
inline MatrixXcd magnus_unitary(const MagnusResult& m, int nb, int nc) {
  const int dim = 4 * nb * nc;
  MatrixXcd u = MatrixXcd::Zero(dim, dim);
  const MatrixXcd b = destroy_op(nb);
  const MatrixXcd c = destroy_op(nc);
  const int z1[4] = {-1, -1, 1, 1};
  const int z2[4] = {-1, 1, -1, 1};
  for (int q = 0; q < 4; ++q) {
    // exponent: -i [ (z1 A1 + z2 A2) b + H.c. ] with A_j = disp[j][0], same for c
    const cplx ab = double(z1[q]) * m.disp[0][0] + double(z2[q]) * m.disp[1][0];
    const cplx ac = double(z1[q]) * m.disp[0][1] + double(z2[q]) * m.disp[1][1];
    MatrixXcd hb = ab * b;
    hb += hb.adjoint().eval();
    MatrixXcd hc = ac * c;
    hc += hc.adjoint().eval();
    MatrixXcd ub = hermitian_propagator(hb, 1.0);
    MatrixXcd uc = hermitian_propagator(hc, 1.0);
    const cplx phase = std::polar(1.0, m.phase * z1[q] * z2[q]);
    u.block(q * nb * nc, q * nb * nc, nb * nc, nb * nc) = phase * kron(ub, uc);
  }
  return u;
}

} // namespace axygate
