#include <catch2/catch_amalgamated.hpp>

#include "axygate/noise.hpp"

using namespace axygate;
using Catch::Approx;

TEST_CASE("OU parameters and trajectory statistics", "[noise]") {
  const auto p = OUParams::from_t2(50e-6, 3e-3);
  SECTION("stationary variance is c tau / 2") {
    CHECK(p.stationaryVariance() == Approx(p.diffusion * p.correlationTime / 2.0));
    CHECK(p.stationaryVariance() == Approx(1.0 / (p.correlationTime * p.targetT2)).epsilon(1e-12));
  }
  SECTION("sample variance within 5 percent over 1e5 steps") {
    const double dt = 2e-6;
    const auto x = ou_trajectory(p, dt, 1e5 * dt, 99);
    double m = 0, v = 0;
    for (double xi : x) m += xi;
    m /= x.size();
    for (double xi : x) v += (xi - m) * (xi - m);
    v /= x.size();
    CHECK(v == Approx(p.stationaryVariance()).epsilon(0.05));
  }
  SECTION("autocorrelation at lag tau_c close to 1/e") {
    const double dt = 2e-6;
    const auto x = ou_trajectory(p, dt, 3e5 * dt, 7);
    const int lag = int(p.correlationTime / dt);
    double c0 = 0, cl = 0;
    const int n = int(x.size()) - lag;
    for (int i = 0; i < n; ++i) {
      c0 += x[i] * x[i];
      cl += x[i] * x[i + lag];
    }
    CHECK(cl / c0 == Approx(std::exp(-1.0)).epsilon(0.10));
  }
  SECTION("dt coarser than tau_c / 10 is rejected") {
    CHECK_THROWS_AS(ou_trajectory(p, 10e-6, 1e-3, 1), std::invalid_argument);
  }
  SECTION("deterministic per seed, distinct across streams") {
    const auto a = ou_trajectory(p, 1e-6, 1e-4, 42);
    const auto b = ou_trajectory(p, 1e-6, 1e-4, 42);
    const auto c = ou_trajectory(p, 1e-6, 1e-4, GaussianRng::derive_stream(42, 1));
    CHECK(a == b);
    CHECK(a != c);
  }
}

TEST_CASE("free-evolution coherence decays with the calibrated T2", "[noise][slowish]") {
  const auto p = OUParams::from_t2(50e-6, 3e-3);
  const auto fit = ou_coherence_fit(p, 2e-6, 6e-3, 100, 12345);
  CHECK(fit.fittedT2 == Approx(3e-3).epsilon(0.10));
}

namespace {
PulseSchedule single_ion_axy4(double totalTime, double tpi) {
  AxyParams p;
  p.r = 1;
  p.nBlocks = 4;
  p.tauATilde = 0.12;
  p.tauBTilde = 0.31;
  p.piTime1 = tpi;
  p.piTime2 = tpi;
  p.stagger = 1.05 * tpi;
  const double nu1 = p.nBlocks * kTwoPi * p.r / totalTime; // tau = totalTime / n
  auto [s1, s2] = build_schedule(p, nu1);
  return s1;
}
} // namespace

TEST_CASE("four-level run basics", "[noise]") {
  const double rabi = angular_from_hz(20e6);
  const double tpi = (kTwoPi / 2.0) / rabi;
  const auto sched = single_ion_axy4(80e-6, tpi);

  SECTION("no noise, no leakage, rwa drive: exact pi-pulse algebra") {
    auto cfg = FourLevelConfig::yb171(rabi, sched);
    cfg.leakage = 0.0;
    cfg.trajectories = 1;
    cfg.rwaDrive = true;
    auto ou = OUParams::from_t2(50e-6, 3e-3);
    ou.diffusion = 0.0; // freezes X at 0 variance
    const auto res = four_level_run(cfg, ou);
    CHECK(res.meanInfidelityQubit < 1e-10);
    CHECK(res.meanInfidelityFull < 1e-10);
  }
  SECTION("validation") {
    auto cfg = FourLevelConfig::yb171(rabi, sched);
    cfg.leakage = 1.0;
    CHECK_THROWS_AS(four_level_run(cfg, OUParams::from_t2(50e-6, 3e-3)),
                    std::invalid_argument);
  }
}

TEST_CASE("radial run", "[noise]") {
  // modest design stand-in: refined decoupling point at r = 3
  const auto c = PhysicalConstants::yb171();
  TrapConfig trap;
  trap.nuAxial = angular_from_hz(150e3);
  trap.gradB = 150.0;
  GateDesign d;
  d.trap = trap;
  d.couplings = derive_couplings(c, trap);
  d.seq.r = 3;
  d.seq.nBlocks = 4;
  const auto rr = refine_solution(0.0686, 0.2990, 3, 4);
  d.seq.tauATilde = rr.tauA;
  d.seq.tauBTilde = rr.tauB;
  d.seq.piTime1 = d.seq.piTime2 = 75.4e-9;
  d.seq.stagger = 1.05 * 75.4e-9;

  SECTION("beta = 0 gives zero infidelity") {
    RadialConfig rc;
    rc.beta = 0.0;
    CHECK(radial_run(rc, d, standard_state(4)) == Approx(0.0).margin(1e-12));
  }
  SECTION("branch weights cover 1 - tol and the sweep is monotone") {
    double prev = -1.0;
    for (double beta : {0.0, 0.1, 0.2, 0.3, 0.4}) {
      RadialConfig rc;
      rc.beta = beta;
      const double infid = radial_run(rc, d, standard_state(4));
      CHECK(infid >= prev - 1e-12);
      prev = infid;
    }
    CHECK(prev < 1e-4); // beta = 0.4 stays at the 1e-5 scale
  }
}
