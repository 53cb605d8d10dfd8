#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "axygate/units.hpp"

namespace axygate {

// AXY-n parameterization. tauATilde/tauBTilde are pulse-center positions in
// units of the block length tau; the stagger shifts every ion-2 pulse.
struct AxyParams {
  int r = 3;                 // nu1 * tau = 2 pi r
  int nBlocks = 4;           // even
  double tauATilde = 0.1;    // in (0, 1/2)
  double tauBTilde = 0.3;    // in (tauATilde, 1/2)
  double zeta = 0.0;         // global axis-phase offset, rad
  double stagger = 0.0;      // s, ion-2 delay; must exceed both pi-times
  double piTime1 = 0.0;      // s
  double piTime2 = 0.0;      // s

  void validate() const {
    if (r < 1) throw std::invalid_argument("AxyParams: r must be >= 1");
    if (nBlocks < 2 || nBlocks % 2 != 0)
      throw std::invalid_argument("AxyParams: nBlocks must be even and >= 2");
    if (!(0.0 < tauATilde && tauATilde < tauBTilde && tauBTilde < 0.5))
      throw std::invalid_argument("AxyParams: need 0 < tauA < tauB < 1/2 (strict)");
    if (piTime1 < 0 || piTime2 < 0)
      throw std::invalid_argument("AxyParams: pi times must be >= 0");
    if (piTime1 > 0 && stagger <= std::max(piTime1, piTime2))
      throw std::invalid_argument("AxyParams: stagger must exceed the pi-pulse time");
  }
};

struct PulseEvent {
  int ion = 1;             // 1 or 2
  double centerTime = 0.0; // s
  double duration = 0.0;   // s, top-hat length t_pi
  double axisPhase = 0.0;  // rad
  double rabi = 0.0;       // rad/s; rabi * duration = pi

  double start() const { return centerTime - 0.5 * duration; }
  double end() const { return centerTime + 0.5 * duration; }
};

struct PulseSchedule {
  std::vector<PulseEvent> events; // ordered by centerTime
  double blockDuration = 0.0;     // tau
  double nominalTime = 0.0;       // nBlocks * tau
  double totalTime = 0.0;         // last pulse edge (>= nominalTime or not)
};

// X-block axes {pi/6, pi/2, 0, pi/2, pi/6} + zeta; Y block shifted by pi/2.
struct AxyPhases {
  std::array<double, 5> x;
  std::array<double, 5> y;
};

inline AxyPhases axy_phase_lists(double zeta) {
  const double pi = kTwoPi / 2.0;
  AxyPhases p;
  p.x = {pi / 6 + zeta, pi / 2 + zeta, zeta, pi / 2 + zeta, pi / 6 + zeta};
  for (int i = 0; i < 5; ++i) p.y[i] = p.x[i] + pi / 2;
  return p;
}

namespace detail {
inline std::array<double, 5> block_fractions(const AxyParams& p) {
  return {p.tauATilde, p.tauBTilde, 0.5, 1.0 - p.tauBTilde, 1.0 - p.tauATilde};
}
} // namespace detail

// Builds the staggered pair of schedules: ion 1 at the ideal AXY positions,
// ion 2 uniformly delayed by the stagger. Throws if any two pulses of
// different ions overlap in time.
inline std::pair<PulseSchedule, PulseSchedule> build_schedule(const AxyParams& p, double nu1) {
  p.validate();
  if (nu1 <= 0) throw std::invalid_argument("build_schedule: nu1 must be > 0");
  const double tau = kTwoPi * p.r / nu1;
  const AxyPhases phases = axy_phase_lists(p.zeta);
  const auto fr = detail::block_fractions(p);

  auto make = [&](int ion, double shift, double tpi) {
    PulseSchedule s;
    s.blockDuration = tau;
    s.nominalTime = p.nBlocks * tau;
    const double rabi = tpi > 0 ? kTwoPi / 2.0 / tpi : 0.0;
    for (int b = 0; b < p.nBlocks; ++b) {
      const auto& ph = (b % 2 == 0) ? phases.x : phases.y;
      for (int k = 0; k < 5; ++k) {
        PulseEvent e;
        e.ion = ion;
        e.centerTime = (b + fr[k]) * tau + shift;
        e.duration = tpi;
        e.axisPhase = ph[k];
        e.rabi = rabi;
        s.events.push_back(e);
      }
    }
    s.totalTime = s.events.back().end();
    return s;
  };

  PulseSchedule s1 = make(1, 0.0, p.piTime1);
  PulseSchedule s2 = make(2, p.stagger, p.piTime2);

  if (p.piTime1 > 0 || p.piTime2 > 0) {
    std::vector<PulseEvent> all = s1.events;
    all.insert(all.end(), s2.events.begin(), s2.events.end());
    std::sort(all.begin(), all.end(),
              [](const PulseEvent& a, const PulseEvent& b) { return a.start() < b.start(); });
    for (std::size_t i = 1; i < all.size(); ++i) {
      if (all[i].start() < all[i - 1].end())
        throw std::invalid_argument(
            "build_schedule: pulse overlap between ion " + std::to_string(all[i - 1].ion) +
            " at t=" + std::to_string(all[i - 1].centerTime) + " and ion " +
            std::to_string(all[i].ion) + " at t=" + std::to_string(all[i].centerTime));
    }
  }
  return {std::move(s1), std::move(s2)};
}

// Piecewise sign function: +1 initially, flipping at each switch time.
class ModulationFunction {
 public:
  ModulationFunction() = default;
  ModulationFunction(std::vector<double> switches, double horizon)
      : switches_(std::move(switches)), horizon_(horizon) {
    for (std::size_t i = 1; i < switches_.size(); ++i)
      if (switches_[i] <= switches_[i - 1])
        throw std::invalid_argument("ModulationFunction: switches must be strictly increasing");
  }

  int sign_at(double t) const {
    const auto it = std::upper_bound(switches_.begin(), switches_.end(), t);
    return (std::distance(switches_.begin(), it) % 2 == 0) ? 1 : -1;
  }

  const std::vector<double>& switches() const { return switches_; }
  double horizon() const { return horizon_; }

 private:
  std::vector<double> switches_;
  double horizon_ = 0.0;
};

// Ideal instantaneous-pulse limit: the sign flips at each pulse center.
inline ModulationFunction modulation(const PulseSchedule& s, int ion) {
  std::vector<double> sw;
  sw.reserve(s.events.size());
  for (const auto& e : s.events)
    if (e.ion == ion) sw.push_back(e.centerTime);
  std::sort(sw.begin(), sw.end());
  return ModulationFunction(std::move(sw), std::max(s.nominalTime, s.totalTime));
}

// Direct construction of the ideal AXY modulation for scans: block length tau,
// optional uniform shift (stagger) of all switch times.
inline ModulationFunction make_axy_modulation(int r, int nBlocks, double tauA, double tauB,
                                              double tau, double shift = 0.0) {
  (void)r;
  if (!(0.0 < tauA && tauA < tauB && tauB < 0.5))
    throw std::invalid_argument("make_axy_modulation: need 0 < tauA < tauB < 1/2");
  std::vector<double> sw;
  sw.reserve(5 * nBlocks);
  const std::array<double, 5> fr = {tauA, tauB, 0.5, 1.0 - tauB, 1.0 - tauA};
  for (int b = 0; b < nBlocks; ++b)
    for (double f : fr) sw.push_back((b + f) * tau + shift);
  return ModulationFunction(std::move(sw), nBlocks * tau + std::max(0.0, shift));
}

inline nlohmann::json schedule_to_json(const PulseSchedule& s) {
  nlohmann::json j;
  j["block_duration_s"] = s.blockDuration;
  j["nominal_time_s"] = s.nominalTime;
  j["total_time_s"] = s.totalTime;
  nlohmann::json evs = nlohmann::json::array();
  for (const auto& e : s.events) {
    evs.push_back({{"ion", e.ion},
                   {"center_s", e.centerTime},
                   {"duration_s", e.duration},
                   {"phase_rad", e.axisPhase},
                   {"rabi_rad_per_s", e.rabi}});
  }
  j["pulses"] = evs;
  return j;
}

inline PulseSchedule schedule_from_json(const nlohmann::json& j) {
  PulseSchedule s;
  s.blockDuration = j.at("block_duration_s").get<double>();
  s.nominalTime = j.at("nominal_time_s").get<double>();
  s.totalTime = j.at("total_time_s").get<double>();
  for (const auto& e : j.at("pulses")) {
    PulseEvent ev;
    ev.ion = e.at("ion").get<int>();
    ev.centerTime = e.at("center_s").get<double>();
    ev.duration = e.at("duration_s").get<double>();
    ev.axisPhase = e.at("phase_rad").get<double>();
    ev.rabi = e.at("rabi_rad_per_s").get<double>();
    s.events.push_back(ev);
  }
  return s;
}

} // namespace axygate
