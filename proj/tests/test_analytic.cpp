#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "axygate/analytic.hpp"
#include "golden.hpp"
#include "oracles.hpp"

using namespace axygate;
using Catch::Approx;

TEST_CASE("g_integral basics", "[analytic]") {
  const ModulationFunction one({}, 100.0);
  SECTION("full period of a pure phase vanishes") {
    for (int r = 1; r <= 3; ++r)
      CHECK(std::abs(g_integral(one, 1.0, 0.0, kTwoPi * r)) < 1e-13 * kTwoPi * r);
  }
  SECTION("constant f, generic t: (i/nu)(e^{-i nu t} - 1)") {
    const double nu = 2.3, t = 1.7;
    const cplx expect = cplx(0.0, 1.0 / nu) * (std::polar(1.0, -nu * t) - cplx(1.0, 0.0));
    CHECK(std::abs(g_integral(one, nu, 0.0, t) - expect) < 1e-14);
  }
  SECTION("nu = 0 limit integrates the sign") {
    ModulationFunction f({1.0}, 3.0);
    CHECK(g_integral(f, 0.0, 0.0, 3.0).real() == Approx(1.0 - 2.0));
    CHECK(g_integral(f, 0.0, 0.0, 3.0).imag() == 0.0);
  }
  SECTION("additive over abutting intervals") {
    const auto f = make_axy_modulation(2, 4, 0.123, 0.317, kTwoPi * 2);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> d(0.0, f.horizon());
    for (int i = 0; i < 50; ++i) {
      double a = d(rng), b = d(rng), c = d(rng);
      double lo = std::min({a, b, c}), hi = std::max({a, b, c});
      double mid = a + b + c - lo - hi;
      const cplx whole = g_integral(f, kSqrt3, lo, hi);
      const cplx parts = g_integral(f, kSqrt3, lo, mid) + g_integral(f, kSqrt3, mid, hi);
      CHECK(std::abs(whole - parts) < 1e-12);
    }
  }
  SECTION("AXY-4 decoupling zero at nu1 when nu1 tau = 2 pi r") {
    const auto f = make_axy_modulation(1, 4, 0.11, 0.32, kTwoPi);
    CHECK(std::abs(g_integral(f, 1.0, 0.0, 4 * kTwoPi)) < 1e-12 * kTwoPi);
  }
  SECTION("matches quadrature oracle on random switch lists") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> sw;
      double t = 0.0;
      for (int i = 0; i < 12; ++i) {
        t += 0.05 + d(rng);
        sw.push_back(t);
      }
      const double horizon = t + 1.0;
      ModulationFunction f(sw, horizon);
      const double nu = 0.3 + 5.0 * d(rng);
      const cplx a = g_integral(f, nu, 0.0, horizon);
      const cplx b = oracles::g_quadrature(f, nu, 0.0, horizon);
      CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST_CASE("zero theorem across n, r, random taus", "[analytic]") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int n : {2, 4, 8}) {
    for (int r : {1, 2, 3}) {
      const double tau = kTwoPi * r;
      for (int trial = 0; trial < 25; ++trial) {
        const double ta = 0.01 + 0.44 * d(rng);
        const double tb = ta + 0.01 + (0.49 - ta - 0.01) * d(rng);
        const auto f = make_axy_modulation(r, n, ta, tb, tau);
        CHECK(std::abs(1.0 * g_integral(f, 1.0, 0.0, n * tau)) < 1e-10);
      }
    }
  }
}

TEST_CASE("phase_tilde", "[analytic]") {
  SECTION("no pulses: phi_m(t) = 2 (nu_m t - sin nu_m t); 4 pi at one period") {
    const ModulationFunction one({}, 10 * kTwoPi);
    for (double t : {kTwoPi, 2.7, 9.1}) {
      const auto pt = phase_tilde(one, one, 1.0, t);
      CHECK(pt.phi1 == Approx(2.0 * (t - std::sin(t))).epsilon(1e-12));
      const double nu2 = kSqrt3;
      CHECK(pt.phi2 == Approx(2.0 * (nu2 * t - std::sin(nu2 * t)) * 1.0).epsilon(1e-12));
    }
    CHECK(phase_tilde(one, one, 1.0, kTwoPi).phi1 == Approx(2.0 * kTwoPi).epsilon(1e-12));
  }
  SECTION("golden reference sequence r=2 n=4 (0.123, 0.317)") {
    const auto pt = phase_tilde_axy(2, 4, 0.123, 0.317);
    CHECK(pt.phi1 == Approx(golden::kRefPhi1).epsilon(1e-10));
    CHECK(pt.phi2 == Approx(golden::kRefPhi2).epsilon(1e-10));
    CHECK(pt.phi == Approx(golden::kRefPhi).epsilon(1e-10));
    const double tau = kTwoPi * 2;
    const auto f = make_axy_modulation(2, 4, 0.123, 0.317, tau);
    const cplx g12 = kSqrt3 * g_integral(f, kSqrt3, 0.0, 4 * tau);
    CHECK(g12.real() == Approx(golden::kRefG12Real).epsilon(1e-10));
    CHECK(g12.imag() == Approx(golden::kRefG12Imag).epsilon(1e-10));
  }
  SECTION("golden staggered variant") {
    const auto pt = phase_tilde_axy(2, 4, 0.123, 0.317, 0.05);
    CHECK(pt.phi == Approx(golden::kRefStagPhi).epsilon(1e-10));
    const double tau = kTwoPi * 2;
    const auto f2 = make_axy_modulation(2, 4, 0.123, 0.317, tau, 0.05 * tau);
    const cplx g22 = kSqrt3 * g_integral(f2, kSqrt3, 0.0, 4 * tau);
    CHECK(g22.real() == Approx(golden::kRefStagG22Real).epsilon(1e-10));
    CHECK(g22.imag() == Approx(golden::kRefStagG22Imag).epsilon(1e-10));
  }
  SECTION("invariant under nu1 -> c nu1 at fixed r") {
    const auto ref = phase_tilde_axy(2, 4, 0.123, 0.317);
    for (double c : {0.5, 2.0, 7.0}) {
      const double nu1 = c;
      const double tau = kTwoPi * 2 / nu1;
      const auto f = make_axy_modulation(2, 4, 0.123, 0.317, tau);
      const auto pt = phase_tilde(f, f, nu1, 4 * tau);
      CHECK(pt.phi == Approx(ref.phi).epsilon(1e-9));
      CHECK(pt.phi1 == Approx(ref.phi1).epsilon(1e-9));
    }
  }
  SECTION("matches the double-quadrature oracle") {
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
      const double ta = 0.05 + 0.3 * d(rng);
      const double tb = ta + 0.03 + (0.46 - ta) * d(rng);
      const double tau = kTwoPi;
      const auto f = make_axy_modulation(1, 2, ta, tb, tau);
      const auto pt = phase_tilde(f, f, 1.0, 2 * tau);
      const double o1 = oracles::phase_quadrature(f, f, 1.0, 2 * tau);
      const double o2 = 3.0 * oracles::phase_quadrature(f, f, kSqrt3, 2 * tau);
      CHECK(pt.phi1 == Approx(o1).epsilon(1e-8));
      CHECK(pt.phi2 == Approx(o2).epsilon(1e-8));
    }
  }
  SECTION("mismatched horizons rejected") {
    const ModulationFunction shortF({}, 1.0);
    const ModulationFunction longF({}, 10.0);
    CHECK_THROWS_AS(phase_tilde(shortF, longF, 1.0, 5.0), std::invalid_argument);
  }
}

TEST_CASE("physical_phase", "[analytic]") {
  CouplingSet cs;
  cs.delta1 = 65494.0;
  SECTION("zero in, zero out") { CHECK(physical_phase(0.0, cs, 9.42e5) == 0.0); }
  SECTION("prefactor at the 150 T/m point") {
    PhysicalConstants c = PhysicalConstants::yb171();
    TrapConfig t;
    t.nuAxial = angular_from_hz(150e3);
    t.gradB = 150.0;
    const auto drv = derive_couplings(c, t);
    const double pref = physical_phase(1.0, drv, t.nu1());
    CHECK(pref == Approx(golden::kPrefactorCase1).epsilon(1e-7));
  }
  SECTION("doubling the gradient quadruples the phase") {
    PhysicalConstants c = PhysicalConstants::yb171();
    TrapConfig t;
    t.gradB = 150.0;
    const auto a = physical_phase(10.0, derive_couplings(c, t), t.nu1());
    t.gradB = 300.0;
    const auto b = physical_phase(10.0, derive_couplings(c, t), t.nu1());
    CHECK(b / a == Approx(4.0).epsilon(1e-12));
  }
}

TEST_CASE("magnus_propagator displacements and phase", "[analytic]") {
  PhysicalConstants c = PhysicalConstants::yb171();
  TrapConfig t;
  t.nuAxial = angular_from_hz(150e3);
  t.gradB = 150.0;
  const auto cs = derive_couplings(c, t);
  const double nu1 = t.nu1(), nu2 = t.nu2();
  const double tau = kTwoPi * 3 / nu1;
  const auto f = make_axy_modulation(3, 4, 0.1, 0.3, tau);

  SECTION("t = 0 gives zero displacement and phase") {
    const auto m = magnus_propagator(f, f, cs, nu1, nu2, 0.0);
    CHECK(m.phase == 0.0);
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) CHECK(std::abs(m.disp[j][k]) == 0.0);
  }
  SECTION("completed sequence decouples mode 1; phase nonzero") {
    const auto m = magnus_propagator(f, f, cs, nu1, nu2, 4 * tau);
    CHECK(std::abs(m.disp[0][0]) < 1e-10 * cs.delta1 * tau);
    CHECK(std::abs(m.disp[1][0]) < 1e-10 * cs.delta1 * tau);
    CHECK(std::abs(m.phase) > 1e-3);
  }
  SECTION("mode-2 sign convention: ion 1 carries -Delta2 G, ion 2 +Delta2 G") {
    const auto m = magnus_propagator(f, f, cs, nu1, nu2, 1.7 * tau);
    const cplx g2 = g_integral(f, nu2, 0.0, 1.7 * tau);
    CHECK(std::abs(m.disp[0][1] - (-cs.delta2 * g2)) < 1e-9 * std::abs(cs.delta2 * g2));
    CHECK(std::abs(m.disp[1][1] - (cs.delta2 * g2)) < 1e-9 * std::abs(cs.delta2 * g2));
  }
}
