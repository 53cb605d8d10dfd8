#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "axygate/analytic.hpp"
#include "axygate/physics.hpp"
#include "axygate/sequence.hpp"
#include "axygate/simplex.hpp"

namespace axygate {

struct DesignError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// |nu2 G_j2| and phi~ on a uniform mesh over the ordered simplex
// 0 < tauA < tauB < 1/2. Cells violating the ordering are kept but invalid.
struct ScanResult {
  int gridN = 0;
  int r = 0;
  int nBlocks = 0;
  std::vector<double> axis; // shared tauA/tauB grid values
  struct Cell {
    double absG12 = 0.0;
    double absG22 = 0.0;
    double phiTilde = 0.0;
    bool valid = false;
  };
  std::vector<Cell> cells; // row-major: [ia * gridN + ib]

  const Cell& at(int ia, int ib) const { return cells[std::size_t(ia) * gridN + ib]; }
};

namespace detail {

struct DimlessEval {
  double absG2 = 0.0;   // |nu2 G_2(n tau)| with f1 = f2
  double phiTilde = 0.0;
};

inline DimlessEval eval_dimensionless(int r, int nBlocks, double ta, double tb) {
  const double tau = kTwoPi * r;
  const auto f = make_axy_modulation(r, nBlocks, ta, tb, tau);
  const double T = nBlocks * tau;
  DimlessEval out;
  out.absG2 = std::abs(kSqrt3 * g_integral(f, kSqrt3, 0.0, T));
  out.phiTilde = phase_tilde(f, f, 1.0, T).phi;
  return out;
}

} // namespace detail

inline ScanResult scan_plane(int r, int nBlocks, int gridN) {
  if (gridN < 2) throw std::invalid_argument("scan_plane: gridN must be >= 2");
  if (nBlocks < 2 || nBlocks % 2) throw std::invalid_argument("scan_plane: nBlocks must be even");
  ScanResult res;
  res.gridN = gridN;
  res.r = r;
  res.nBlocks = nBlocks;
  res.axis.resize(gridN);
  for (int i = 0; i < gridN; ++i) res.axis[i] = 0.5 * (i + 1) / (gridN + 1);
  res.cells.resize(std::size_t(gridN) * gridN);
  for (int ia = 0; ia < gridN; ++ia) {
    for (int ib = 0; ib < gridN; ++ib) {
      auto& c = res.cells[std::size_t(ia) * gridN + ib];
      const double ta = res.axis[ia], tb = res.axis[ib];
      if (!(ta < tb)) continue; // invalid ordering, leave flagged
      const auto ev = detail::eval_dimensionless(r, nBlocks, ta, tb);
      c.absG12 = ev.absG2; // f1 = f2 in scans, so both residuals coincide
      c.absG22 = ev.absG2;
      c.phiTilde = ev.phiTilde;
      c.valid = true;
    }
  }
  return res;
}

// Connected low-residual regions (4-neighbour) below threshold*max residual.
// Returns the minimum-residual cell of each region, largest regions first.
struct ScanRegion {
  double tauA = 0.0;
  double tauB = 0.0;
  double absG2 = 0.0;
  double phiTilde = 0.0;
  int size = 0;
};

inline std::vector<ScanRegion> low_residual_regions(const ScanResult& s, double relThreshold) {
  const int n = s.gridN;
  double mx = 0.0;
  for (const auto& c : s.cells)
    if (c.valid) mx = std::max(mx, c.absG22);
  const double thr = relThreshold * mx;
  std::vector<int> label(s.cells.size(), -1);
  std::vector<ScanRegion> regions;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < s.cells.size(); ++i) {
    if (label[i] >= 0 || !s.cells[i].valid || s.cells[i].absG22 >= thr) continue;
    ScanRegion reg;
    reg.absG2 = std::numeric_limits<double>::infinity();
    const int id = int(regions.size());
    stack.push_back(i);
    label[i] = id;
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      const int ia = int(k) / n, ib = int(k) % n;
      const auto& c = s.cells[k];
      ++reg.size;
      if (c.absG22 < reg.absG2) {
        reg.absG2 = c.absG22;
        reg.tauA = s.axis[ia];
        reg.tauB = s.axis[ib];
        reg.phiTilde = c.phiTilde;
      }
      const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int q = 0; q < 4; ++q) {
        const int ja = ia + di[q], jb = ib + dj[q];
        if (ja < 0 || jb < 0 || ja >= n || jb >= n) continue;
        const std::size_t kk = std::size_t(ja) * n + jb;
        if (label[kk] >= 0 || !s.cells[kk].valid || s.cells[kk].absG22 >= thr) continue;
        label[kk] = id;
        stack.push_back(kk);
      }
    }
    regions.push_back(reg);
  }
  std::sort(regions.begin(), regions.end(),
            [](const ScanRegion& a, const ScanRegion& b) { return a.size > b.size; });
  return regions;
}

struct RefineResult {
  double tauA = 0.0;
  double tauB = 0.0;
  double phiTilde = 0.0;
  double objective = 0.0; // |G12~|^2 + |G22~|^2 at the returned point
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

inline double ordered_simplex_penalty(double ta, double tb) {
  const double margin = 1e-4;
  if (ta < margin || tb > 0.5 - margin || tb - ta < margin) return 1e9;
  return 0.0;
}

} // namespace detail

// Local decoupling search from a seed: minimizes |G12~|^2 + |G22~|^2 with
// f1 = f2. Restarts with a shrunken step if the first descent stalls.
inline RefineResult refine_solution(double seedA, double seedB, int r, int nBlocks,
                                    double tol = 1e-10, int budget = 500) {
  if (!(0.0 < seedA && seedA < seedB && seedB < 0.5))
    throw std::invalid_argument("refine_solution: seed outside the ordered simplex");
  auto objective = [&](const std::vector<double>& x) {
    const double pen = detail::ordered_simplex_penalty(x[0], x[1]);
    if (pen > 0) return pen;
    const auto ev = detail::eval_dimensionless(r, nBlocks, x[0], x[1]);
    return 2.0 * ev.absG2 * ev.absG2;
  };
  std::vector<double> x = {seedA, seedB};
  int used = 0;
  SimplexResult best;
  best.value = std::numeric_limits<double>::infinity();
  double step = 0.02;
  while (used < budget) {
    auto sr = nelder_mead(objective, x, step, tol, budget - used);
    used += sr.evaluations;
    if (sr.value < best.value) best = sr;
    if (best.value <= tol) break;
    x = best.x;
    step *= 0.25;
    if (step < 1e-9) break;
  }
  RefineResult out;
  out.tauA = best.x[0];
  out.tauB = best.x[1];
  const auto ev = detail::eval_dimensionless(r, nBlocks, out.tauA, out.tauB);
  out.phiTilde = ev.phiTilde;
  out.objective = 2.0 * ev.absG2 * ev.absG2;
  out.evaluations = used;
  out.converged = out.objective < tol;
  return out;
}

// A complete physical gate design.
struct GateDesign {
  AxyParams seq;
  TrapConfig trap;
  CouplingSet couplings;
  double rabi1 = 0.0;        // rad/s
  double rabi2 = 0.0;        // rad/s
  int magicIndex = 1;        // k in Omega = delta / sqrt(4k^2 - 1)
  double targetPhase = 0.0;  // rad, requested magnitude
  double signedPhase = 0.0;  // rad, phase as realized (sign from phi~)
  double achievedPhiTilde = 0.0;
  double absGTilde[2][2] = {{0, 0}, {0, 0}};
  double gateTime = 0.0;     // s, nominal nBlocks * tau
  double minPulseGap = 0.0;  // s, smallest gap between consecutive pulses
};

namespace detail {

inline double min_pulse_gap(const AxyParams& p, double nu1) {
  auto [s1, s2] = build_schedule(p, nu1);
  std::vector<PulseEvent> all = s1.events;
  all.insert(all.end(), s2.events.begin(), s2.events.end());
  std::sort(all.begin(), all.end(),
            [](const PulseEvent& a, const PulseEvent& b) { return a.centerTime < b.centerTime; });
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < all.size(); ++i)
    gap = std::min(gap, all[i].start() - all[i - 1].end());
  return gap;
}

// Solve {G2~ = 0, phi~(staggered) = target} near a decoupled point. The
// residual lives on a one-parameter zero curve, so both goals are jointly
// attainable; weights put the G residual and the phase error on a common
// scale.
inline std::optional<RefineResult> phase_lock(double ta0, double tb0, int r, int nBlocks,
                                              double staggerFrac, double phiTarget,
                                              double gTol) {
  auto objective = [&](const std::vector<double>& x) {
    const double pen = ordered_simplex_penalty(x[0], x[1]);
    if (pen > 0) return pen;
    const auto ev = eval_dimensionless(r, nBlocks, x[0], x[1]);
    const double phi = phase_tilde_axy(r, nBlocks, x[0], x[1], staggerFrac).phi;
    const double gterm = 2.0 * ev.absG2 * ev.absG2 / (gTol * gTol);
    const double dphi = (phi - phiTarget) / (1e-6 * std::max(1.0, std::abs(phiTarget)));
    return gterm + dphi * dphi;
  };
  std::vector<double> x = {ta0, tb0};
  double step = 0.01;
  for (int attempt = 0; attempt < 6; ++attempt) {
    auto sr = nelder_mead(objective, x, step, 1e-4, 1500);
    x = sr.x;
    step *= 0.3;
    if (sr.value < 1.0) {
      const auto ev = eval_dimensionless(r, nBlocks, x[0], x[1]);
      RefineResult out;
      out.tauA = x[0];
      out.tauB = x[1];
      out.phiTilde = phase_tilde_axy(r, nBlocks, x[0], x[1], staggerFrac).phi;
      out.objective = 2.0 * ev.absG2 * ev.absG2;
      out.converged = true;
      return out;
    }
  }
  return std::nullopt;
}

} // namespace detail

struct DesignOptions {
  int gridN = 121;
  int nBlocks = 4;
  double regionThreshold = 0.05;
  double refineTol = 1e-10;
  double residualTolG2 = 1e-8;   // dimensionless |G~_j2| bound for the report
  double staggerFactor = 1.05;   // stagger = factor * max pi-time
  double zeta = 0.0;
};

// End-to-end design: scan the plane, refine each low-residual region, pick
// the solution whose phase can reach the target, then lock the staggered
// phase onto the target exactly. Rabi frequencies come from the magic
// condition at the trap's qubit splitting.
inline GateDesign design_gate(const PhysicalConstants& consts, const TrapConfig& trap,
                              double targetPhase, int r, int k,
                              const DesignOptions& opt = DesignOptions{}) {
  if (targetPhase == 0.0)
    throw DesignError("design_gate: target phase must be nonzero (phase-gate condition)");
  trap.validate();
  const CouplingSet cs = derive_couplings(consts, trap);
  if (cs.delta1 <= 0.0)
    throw DesignError("design_gate: zero coupling (gradient must be > 0)");
  const double nu1 = trap.nu1();
  const double delta = cs.qubitSplitting;
  const double omega = magic_rabi(delta, k);
  const double tpi = (kTwoPi / 2.0) / omega;
  const double stagger = opt.staggerFactor * tpi;
  const double tau = kTwoPi * r / nu1;
  const double pref = (cs.delta1 / nu1) * (cs.delta1 / nu1);
  const double phiTildeTargetMag = std::abs(targetPhase) / pref;

  const ScanResult scan = scan_plane(r, opt.nBlocks, opt.gridN);
  const auto regions = low_residual_regions(scan, opt.regionThreshold);
  if (regions.empty()) throw DesignError("design_gate: no decoupling region found in scan");

  std::vector<RefineResult> sols;
  for (const auto& reg : regions) {
    auto rr = refine_solution(reg.tauA, reg.tauB, r, opt.nBlocks, opt.refineTol);
    if (rr.converged) sols.push_back(rr);
  }
  if (sols.empty()) throw DesignError("design_gate: refinement failed in every region");

  double maxAbsPhi = 0.0;
  for (const auto& s : sols) maxAbsPhi = std::max(maxAbsPhi, std::abs(s.phiTilde));

  // Walk along each zero curve from the refined points towards the target
  // phase magnitude; collect candidates for both signs.
  const double staggerFrac = stagger / tau;
  std::vector<RefineResult> locked;
  for (const auto& s : sols) {
    for (double sign : {1.0, -1.0}) {
      const double target = sign * phiTildeTargetMag;
      // Only chase targets on the same side and not absurdly far away.
      if (s.phiTilde * target < 0 && std::abs(s.phiTilde) > 1e-6) continue;
      auto pl = detail::phase_lock(s.tauA, s.tauB, r, opt.nBlocks, staggerFrac, target,
                                   opt.residualTolG2);
      if (pl) locked.push_back(*pl);
    }
  }
  if (locked.empty()) {
    throw DesignError(
        "design_gate: PhaseUnreachable: no decoupling solution reaches |phi| = " +
        std::to_string(std::abs(targetPhase)) + " rad at r = " + std::to_string(r) +
        " (max attainable |phi| approx " + std::to_string(maxAbsPhi * pref) + " rad)");
  }

  // Choose by widest minimum inter-pulse gap; tie-break on smaller tauB.
  GateDesign best;
  double bestGap = -std::numeric_limits<double>::infinity();
  double bestTb = 1.0;
  for (const auto& cand : locked) {
    AxyParams p;
    p.r = r;
    p.nBlocks = opt.nBlocks;
    p.tauATilde = cand.tauA;
    p.tauBTilde = cand.tauB;
    p.zeta = opt.zeta;
    p.stagger = stagger;
    p.piTime1 = tpi;
    p.piTime2 = tpi;
    double gap;
    try {
      p.validate();
      gap = detail::min_pulse_gap(p, nu1);
    } catch (const std::invalid_argument&) {
      continue; // pulses collide at this solution; not usable
    }
    if (gap <= 0) continue;
    const bool better = gap > bestGap + 1e-12 ||
                        (std::abs(gap - bestGap) <= 1e-12 && cand.tauB < bestTb);
    if (!better) continue;
    bestGap = gap;
    bestTb = cand.tauB;
    best.seq = p;
    best.achievedPhiTilde = cand.phiTilde;
  }
  if (bestGap < 0)
    throw DesignError("design_gate: NoSolutionRegion: all phase-locked solutions collide with finite pulses");

  best.trap = trap;
  best.couplings = cs;
  best.rabi1 = omega;
  best.rabi2 = omega;
  best.magicIndex = k;
  best.targetPhase = std::abs(targetPhase);
  best.signedPhase = (best.achievedPhiTilde >= 0 ? 1.0 : -1.0) * std::abs(targetPhase);
  best.gateTime = opt.nBlocks * tau;
  best.minPulseGap = bestGap;

  const auto f1 = make_axy_modulation(r, opt.nBlocks, best.seq.tauATilde, best.seq.tauBTilde, tau);
  const auto f2 = make_axy_modulation(r, opt.nBlocks, best.seq.tauATilde, best.seq.tauBTilde, tau,
                                      stagger);
  const double nu2 = kSqrt3 * nu1;
  best.absGTilde[0][0] = std::abs(nu1 * g_integral(f1, nu1, 0.0, best.gateTime));
  best.absGTilde[0][1] = std::abs(nu2 * g_integral(f1, nu2, 0.0, best.gateTime));
  best.absGTilde[1][0] = std::abs(nu1 * g_integral(f2, nu1, 0.0, best.gateTime));
  best.absGTilde[1][1] = std::abs(nu2 * g_integral(f2, nu2, 0.0, best.gateTime));
  return best;
}

inline void write_scan_csv(std::ostream& os, const ScanResult& s,
                           const std::string& manifestDigest) {
  os << "# manifest: " << manifestDigest << "\n";
  os << "# r=" << s.r << " n_blocks=" << s.nBlocks << " grid=" << s.gridN << "\n";
  os << "tauA,tauB,absG12,absG22,phiTilde,valid\n";
  char buf[256];
  for (int ia = 0; ia < s.gridN; ++ia) {
    for (int ib = 0; ib < s.gridN; ++ib) {
      const auto& c = s.at(ia, ib);
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", s.axis[ia],
                    s.axis[ib], c.absG12, c.absG22, c.phiTilde, c.valid ? 1 : 0);
      os << buf;
    }
  }
}

inline nlohmann::json design_to_json(const GateDesign& d) {
  nlohmann::json j;
  j["sequence"] = {{"r", d.seq.r},
                   {"n_blocks", d.seq.nBlocks},
                   {"tau_a_tilde", d.seq.tauATilde},
                   {"tau_b_tilde", d.seq.tauBTilde},
                   {"zeta_rad", d.seq.zeta},
                   {"stagger_s", d.seq.stagger},
                   {"pi_time_1_s", d.seq.piTime1},
                   {"pi_time_2_s", d.seq.piTime2}};
  j["trap"] = {{"nu_axial_hz", hz_from_angular(d.trap.nuAxial)},
               {"grad_b_t_per_m", d.trap.gradB},
               {"temperature_k", d.trap.temperature},
               {"electrode_distance_m", d.trap.electrodeDistance}};
  j["couplings"] = {{"delta1_hz", hz_from_angular(d.couplings.delta1)},
                    {"delta2_hz", hz_from_angular(d.couplings.delta2)},
                    {"qubit_splitting_hz", hz_from_angular(d.couplings.qubitSplitting)},
                    {"ion_separation_m", d.couplings.ionSeparation}};
  j["rabi_1_hz"] = hz_from_angular(d.rabi1);
  j["rabi_2_hz"] = hz_from_angular(d.rabi2);
  j["magic_k"] = d.magicIndex;
  j["target_phase_rad"] = d.targetPhase;
  j["signed_phase_rad"] = d.signedPhase;
  j["achieved_phi_tilde"] = d.achievedPhiTilde;
  j["abs_g_tilde"] = {{"g11", d.absGTilde[0][0]},
                      {"g12", d.absGTilde[0][1]},
                      {"g21", d.absGTilde[1][0]},
                      {"g22", d.absGTilde[1][1]}};
  j["gate_time_s"] = d.gateTime;
  j["min_pulse_gap_s"] = d.minPulseGap;
  return j;
}

inline GateDesign design_from_json(const nlohmann::json& j) {
  GateDesign d;
  const auto& sq = j.at("sequence");
  d.seq.r = sq.at("r").get<int>();
  d.seq.nBlocks = sq.at("n_blocks").get<int>();
  d.seq.tauATilde = sq.at("tau_a_tilde").get<double>();
  d.seq.tauBTilde = sq.at("tau_b_tilde").get<double>();
  d.seq.zeta = sq.at("zeta_rad").get<double>();
  d.seq.stagger = sq.at("stagger_s").get<double>();
  d.seq.piTime1 = sq.at("pi_time_1_s").get<double>();
  d.seq.piTime2 = sq.at("pi_time_2_s").get<double>();
  const auto& tr = j.at("trap");
  d.trap.nuAxial = angular_from_hz(tr.at("nu_axial_hz").get<double>());
  d.trap.gradB = tr.at("grad_b_t_per_m").get<double>();
  d.trap.temperature = tr.at("temperature_k").get<double>();
  d.trap.electrodeDistance = tr.at("electrode_distance_m").get<double>();
  const auto& cp = j.at("couplings");
  d.couplings.delta1 = angular_from_hz(cp.at("delta1_hz").get<double>());
  d.couplings.delta2 = angular_from_hz(cp.at("delta2_hz").get<double>());
  d.couplings.qubitSplitting = angular_from_hz(cp.at("qubit_splitting_hz").get<double>());
  d.couplings.ionSeparation = cp.at("ion_separation_m").get<double>();
  d.rabi1 = angular_from_hz(j.at("rabi_1_hz").get<double>());
  d.rabi2 = angular_from_hz(j.at("rabi_2_hz").get<double>());
  d.magicIndex = j.at("magic_k").get<int>();
  d.targetPhase = j.at("target_phase_rad").get<double>();
  d.signedPhase = j.at("signed_phase_rad").get<double>();
  d.achievedPhiTilde = j.at("achieved_phi_tilde").get<double>();
  d.gateTime = j.at("gate_time_s").get<double>();
  d.minPulseGap = j.at("min_pulse_gap_s").get<double>();
  return d;
}

} // namespace axygate
