#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "axygate/lindblad.hpp"
#include "oracles.hpp"

using namespace axygate;
using Catch::Approx;

namespace {

GateDesign small_design(double gradB = 150.0, double nuHz = 150e3) {
  // hand-built design for cheap tests: decoupled point not required
  GateDesign d;
  d.trap.nuAxial = angular_from_hz(nuHz);
  d.trap.gradB = gradB;
  d.trap.temperature = 50.0;
  d.trap.electrodeDistance = 150e-6;
  d.couplings = derive_couplings(PhysicalConstants::yb171(), d.trap);
  d.magicIndex = 2;
  d.rabi1 = d.rabi2 =
      (gradB > 0) ? magic_rabi(d.couplings.qubitSplitting, 2) : angular_from_hz(6.6e6);
  d.seq.r = 1;
  d.seq.nBlocks = 2;
  d.seq.tauATilde = 0.11;
  d.seq.tauBTilde = 0.32;
  d.seq.piTime1 = d.seq.piTime2 = (kTwoPi / 2.0) / d.rabi1;
  d.seq.stagger = 1.05 * d.seq.piTime1;
  d.signedPhase = 0.1;
  d.targetPhase = 0.1;
  d.gateTime = d.seq.nBlocks * kTwoPi * d.seq.r / d.trap.nu1();
  return d;
}

SimConfig base_config(const GateDesign& d, int fock = 4) {
  SimConfig c;
  c.design = d;
  c.fockB = c.fockC = fock;
  c.initThermal = 0.0;
  c.initQubit = standard_state(2);
  c.dissipation = false;
  c.errors.includeCrosstalk = true;
  return c;
}

} // namespace

TEST_CASE("standard states are normalized and as printed", "[lindblad]") {
  for (int i = 1; i <= 5; ++i) CHECK(standard_state(i).norm() == Approx(1.0).epsilon(1e-14));
  const auto p4 = standard_state(4);
  CHECK(std::abs(p4(0) - cplx(1.0 / std::sqrt(3.0), 0)) < 1e-12);
  CHECK(std::abs(p4(3) - cplx(0, -1.0 / std::sqrt(3.0))) < 1e-12);
  CHECK_THROWS_AS(standard_state(0), std::invalid_argument);
}

TEST_CASE("thermal state and infidelity trivials", "[lindblad]") {
  const auto d = small_design();
  SECTION("rho = |psi_t><psi_t| (x) motional anything gives zero infidelity") {
    const auto target = ideal_target(standard_state(3), d.signedPhase);
    const MatrixXcd rho =
        kron(target * target.adjoint(), kron(thermal_state(0.4, 5), thermal_state(0.1, 6)));
    CHECK(state_infidelity(rho, d, standard_state(3), 5, 6) == Approx(0.0).margin(1e-12));
  }
  SECTION("maximally mixed qubits give 0.75") {
    const MatrixXcd rho = kron(0.25 * Eigen::Matrix4cd::Identity(),
                               kron(thermal_state(0.0, 4), thermal_state(0.0, 4)));
    CHECK(state_infidelity(rho, d, standard_state(1), 4, 4) == Approx(0.75).epsilon(1e-12));
  }
  SECTION("non-normalized reduced state rejected") {
    const MatrixXcd rho = 2.0 * kron(0.25 * Eigen::Matrix4cd::Identity(),
                                     kron(thermal_state(0.0, 4), thermal_state(0.0, 4)));
    CHECK_THROWS_AS(state_infidelity(rho, d, standard_state(1), 4, 4), std::invalid_argument);
  }
  SECTION("phase_estimate recovers the target phase") {
    for (double phi : {0.3, -0.7, kTwoPi / 8}) {
      const auto t = ideal_target(standard_state(2), phi);
      const MatrixXcd rho =
          kron(t * t.adjoint(), kron(thermal_state(0.0, 4), thermal_state(0.0, 4)));
      CHECK(phase_estimate(rho, 4, 4) == Approx(phi).margin(1e-12));
    }
  }
}

TEST_CASE("hamiltonian_at structure", "[lindblad]") {
  auto d = small_design();
  auto cfg = base_config(d);
  cfg.errors.qubitShift = angular_from_hz(20e3);

  SECTION("Hermitian at random times") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> dt(0.0, d.gateTime);
    for (int i = 0; i < 20; ++i) {
      const MatrixXcd h = hamiltonian_at(dt(rng), cfg);
      CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
  SECTION("gap times carry no qubit-flip terms") {
    // first gap: before the first pulse
    const double t = 1e-9;
    const MatrixXcd h = hamiltonian_at(t, cfg);
    // qubit-offdiagonal blocks must vanish: check <gg|H|ge> style entries
    const int m = cfg.fockB * cfg.fockC;
    double off = 0.0;
    for (int q = 0; q < 4; ++q)
      for (int p = 0; p < 4; ++p)
        if (q != p) off = std::max(off, h.block(q * m, p * m, m, m).cwiseAbs().maxCoeff());
    CHECK(off == 0.0);
  }
  SECTION("inside an ion-1 pulse the ion-2 crosstalk term is present") {
    auto [s1, s2] = build_schedule(d.seq, d.trap.nu1());
    const double t = s1.events[0].centerTime;
    const MatrixXcd h = hamiltonian_at(t, cfg);
    const int m = cfg.fockB * cfg.fockC;
    // |gg><ge| block (q=0 -> p=1 flips ion 2) nonzero iff crosstalk on
    CHECK(h.block(0 * m, 1 * m, m, m).cwiseAbs().maxCoeff() > 1e3);
    auto cfg2 = cfg;
    cfg2.errors.includeCrosstalk = false;
    const MatrixXcd h2 = hamiltonian_at(t, cfg2);
    CHECK(h2.block(0 * m, 1 * m, m, m).cwiseAbs().maxCoeff() == 0.0);
    // and the e^{i delta t} phase is the predicted one
    const cplx el = h.block(0 * m, 1 * m, m, m)(0, 0);
    const cplx expect =
        0.5 * d.rabi1 * std::polar(1.0, d.couplings.qubitSplitting * t + s1.events[0].axisPhase);
    CHECK(std::abs(el - std::conj(expect)) < 1e-3 * std::abs(expect));
  }
}

TEST_CASE("crosstalk_propagator", "[lindblad]") {
  const double delta = angular_from_hz(45e6);
  SECTION("matches time-ordered integration") {
    const double omega = angular_from_hz(5.3e6);
    const double phase = 0.7, t0 = 3.3e-8;
    const double tpi = (kTwoPi / 2.0) / omega;
    const auto ua = crosstalk_propagator(omega, delta, phase, t0);
    const MatrixXcd i2 = MatrixXcd::Identity(2, 2);
    auto H = [&](double t) {
      MatrixXcd h = 0.5 * omega * kron(sigma_phi(phase), i2);
      MatrixXcd ct = kron(i2, sigma_plus());
      ct *= 0.5 * omega * std::polar(1.0, delta * t + phase);
      h += ct + ct.adjoint().eval();
      return h;
    };
    const MatrixXcd un = oracles::rk4_propagator(H, t0, t0 + tpi, 40000, 4);
    CHECK(operator_fidelity(ua, un) >= 1.0 - 1e-10);
  }
  SECTION("magic condition reduces to the dephasing-only factorization") {
    for (int k : {1, 2, 3}) {
      const double omega = magic_rabi(delta, k);
      const double tpi = (kTwoPi / 2.0) / omega;
      const auto full = crosstalk_propagator(omega, delta, 0.9, 1.7e-8);
      Eigen::Matrix2cd u1 = std::cos(0.5 * omega * tpi) * Eigen::Matrix2cd::Identity();
      u1 -= cplx(0, 1) * std::sin(0.5 * omega * tpi) * Eigen::Matrix2cd(sigma_phi(0.9));
      Eigen::Matrix2cd deph = Eigen::Matrix2cd::Zero();
      deph(0, 0) = std::polar(1.0, -0.5 * delta * tpi);
      deph(1, 1) = std::polar(1.0, 0.5 * delta * tpi);
      const Eigen::Matrix4cd fact = kron(u1, deph);
      CHECK(operator_fidelity(full, fact) >= 1.0 - 1e-12);
    }
  }
}

TEST_CASE("dephasing cancellation over staggered XYXY", "[lindblad]") {
  // 20-pulse staggered product with magic-Rabi pulses: crosstalk appears only
  // as spectator dephasing factors, which the sequence cancels exactly.
  auto d = small_design();
  d.seq.nBlocks = 4;
  auto [s1, s2] = build_schedule(d.seq, d.trap.nu1());
  std::vector<PulseEvent> all = s1.events;
  all.insert(all.end(), s2.events.begin(), s2.events.end());
  std::sort(all.begin(), all.end(),
            [](const PulseEvent& a, const PulseEvent& b) { return a.centerTime < b.centerTime; });

  const MatrixXcd i2 = MatrixXcd::Identity(2, 2);
  const cplx im(0, 1);
  Eigen::Matrix4cd withDeph = Eigen::Matrix4cd::Identity();
  Eigen::Matrix4cd bare = Eigen::Matrix4cd::Identity();
  for (const auto& e : all) {
    const double tpi = e.duration;
    const Eigen::Matrix2cd rot = -im * Eigen::Matrix2cd(sigma_phi(e.axisPhase));
    Eigen::Matrix2cd deph = Eigen::Matrix2cd::Zero();
    const double delta = (e.ion == 1) ? d.couplings.qubitSplitting : -d.couplings.qubitSplitting;
    deph(0, 0) = std::polar(1.0, -0.5 * delta * tpi);
    deph(1, 1) = std::polar(1.0, 0.5 * delta * tpi);
    if (e.ion == 1) {
      withDeph = Eigen::Matrix4cd(kron(rot, deph)) * withDeph;
      bare = Eigen::Matrix4cd(kron(rot, i2)) * bare;
    } else {
      withDeph = Eigen::Matrix4cd(kron(deph, rot)) * withDeph;
      bare = Eigen::Matrix4cd(kron(i2, rot)) * bare;
    }
  }
  CHECK(operator_fidelity(withDeph, bare) >= 1.0 - 1e-9);
}

TEST_CASE("evolve trivial and consistency cases", "[lindblad]") {
  SECTION("zero gradient, no pulses, no dissipation leaves rho unchanged") {
    auto d = small_design(0.0);
    d.rabi1 = d.rabi2 = 0.0;
    d.seq.piTime1 = d.seq.piTime2 = 0.0;
    d.seq.stagger = 0.0;
    d.couplings.delta1 = d.couplings.delta2 = 0.0;
    auto cfg = base_config(d);
    cfg.initThermal = 0.3;
    cfg.initTailTol = 1e-2;
    cfg.topLevelTol = 0.05;
    const auto res = evolve(cfg);
    const MatrixXcd rho0 = kron(cfg.initQubit * cfg.initQubit.adjoint(),
                                kron(thermal_state(0.3, 4), thermal_state(0.3, 4)));
    CHECK((res.rho - rho0).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("piecewise-exact matches rk4 on a short dissipative schedule") {
    auto d = small_design();
    auto cfg = base_config(d);
    cfg.initThermal = 0.2;
    cfg.initTailTol = 1e-2;
    cfg.topLevelTol = 0.05;
    cfg.dissipation = true;
    // exaggerated rates so dissipation is visible on 2 blocks
    cfg.heating.gammaB = 2e-2;
    cfg.heating.nBarB = 1e4;
    cfg.heating.gammaC = 1e-2;
    cfg.heating.nBarC = 5e3;
    cfg.errors.rabiRelError = 0.01;
    cfg.errors.trapRelShift = 0.001;
    cfg.errors.qubitShift = angular_from_hz(20e3);
    cfg.method = SimConfig::Method::PiecewiseExact;
    cfg.gapChunk = 50e-9;
    const auto a = evolve(cfg);
    cfg.method = SimConfig::Method::Rk4;
    cfg.gapStepCap = 5e-9;
    cfg.pulseStepDivisor = 60.0;
    const auto b = evolve(cfg);
    CHECK((a.rho - b.rho).cwiseAbs().maxCoeff() < 5e-7);
    CHECK(a.diag.methodTag == "strang-exact");
    CHECK(b.diag.methodTag == "rk4-fixed");
  }

  SECTION("hygiene: trace, hermiticity, positivity on a dissipative run") {
    auto d = small_design();
    auto cfg = base_config(d);
    cfg.initThermal = 0.2;
    cfg.initTailTol = 1e-2;
    cfg.topLevelTol = 0.05;
    cfg.dissipation = true;
    cfg.heating = heating_rates(PhysicalConstants::yb171(), d.trap);
    const auto res = evolve(cfg);
    CHECK(res.diag.traceDrift < 1e-8);
    CHECK(res.diag.hermDrift < 1e-10);
    CHECK(res.diag.minEigenvalue > -1e-8);
  }

  SECTION("truncation overflow triggers on a tiny Fock space") {
    auto d = small_design();
    auto cfg = base_config(d);
    cfg.fockB = cfg.fockC = 4;
    cfg.initThermal = 2.0; // heavy tail on 4 levels
    cfg.initTailTol = 0.5;
    cfg.topLevelTol = 1e-5;
    CHECK_THROWS_AS(evolve(cfg), TruncationError);
  }
}

TEST_CASE("ideal-pulse limit reproduces the Magnus propagator", "[lindblad]") {
  // refined decoupling point, tiny pulses, crosstalk and errors off
  const auto c = PhysicalConstants::yb171();
  TrapConfig trap;
  trap.nuAxial = angular_from_hz(150e3);
  trap.gradB = 150.0;
  const auto rr = refine_solution(0.2843, 0.3039, 1, 4);
  REQUIRE(rr.converged);

  GateDesign d;
  d.trap = trap;
  d.couplings = derive_couplings(c, trap);
  // keep the displacement loop well inside the 6-level truncation
  d.couplings.delta1 *= 0.3;
  d.couplings.delta2 *= 0.3;
  d.seq.r = 1;
  d.seq.nBlocks = 4;
  d.seq.tauATilde = rr.tauA;
  d.seq.tauBTilde = rr.tauB;
  d.seq.piTime1 = d.seq.piTime2 = 0.125e-9;
  d.seq.stagger = 0.14e-9;
  d.rabi1 = d.rabi2 = (kTwoPi / 2.0) / 0.125e-9;
  d.gateTime = 4 * kTwoPi / trap.nu1();

  auto cfg = base_config(d, 6);
  cfg.errors.includeCrosstalk = false;
  cfg.initQubit = standard_state(2);
  cfg.initThermal = 0.0;

  const double tau = kTwoPi / trap.nu1();
  const auto f1 = make_axy_modulation(1, 4, d.seq.tauATilde, d.seq.tauBTilde, tau);
  const auto f2 = make_axy_modulation(1, 4, d.seq.tauATilde, d.seq.tauBTilde, tau, d.seq.stagger);
  const auto mg = magnus_propagator(f1, f2, d.couplings, trap.nu1(), trap.nu2(), d.gateTime);
  d.signedPhase = mg.phase;

  const auto res = evolve(cfg);
  const MatrixXcd u = magnus_unitary(mg, cfg.fockB, cfg.fockC);
  const MatrixXcd rho0 = kron(cfg.initQubit * cfg.initQubit.adjoint(),
                              kron(thermal_state(0.0, 6), thermal_state(0.0, 6)));
  const MatrixXcd rhoIdeal = u * rho0 * u.adjoint();
  // the trace over motion removes the residual boson frame phases
  const Eigen::Matrix4cd qa = trace_out_motion(res.rho, 6, 6);
  const Eigen::Matrix4cd qb = trace_out_motion(rhoIdeal, 6, 6);
  CHECK((qa - qb).cwiseAbs().maxCoeff() < 1e-7);

  const double infid = state_infidelity(res.rho, d, cfg.initQubit, 6, 6);
  CHECK(infid < 1e-8);
  CHECK(phase_estimate(res.rho, 6, 6) == Approx(mg.phase).margin(1e-7));
}
