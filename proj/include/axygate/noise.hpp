#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "axygate/analytic.hpp"
#include "axygate/designer.hpp"
#include "axygate/lindblad.hpp"
#include "axygate/operators.hpp"
#include "axygate/sequence.hpp"

namespace axygate {

// Deterministic RNG: splitmix64 stream with Box-Muller normals. Per-unit
// streams derive from the master seed as splitmix64(master ^ (index+1)), the
// splitting rule used everywhere batches run concurrently.
class GaussianRng {
 public:
  explicit GaussianRng(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t derive_stream(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
    return (z >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (haveSpare_) {
      haveSpare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    haveSpare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool haveSpare_ = false;
};

// Ornstein-Uhlenbeck dephasing noise. The diffusion constant is calibrated so
// that free-evolution coherence decays with the requested T2 for t >> tau_c:
// 1/T2 = sigma^2 tau_c with sigma^2 = c tau_c / 2, hence c = 2/(tau_c^2 T2).
struct OUParams {
  double correlationTime = 50e-6; // s
  double diffusion = 0.0;         // (rad/s)^2 per s
  double targetT2 = 3e-3;         // s

  static OUParams from_t2(double tauC, double t2) {
    if (tauC <= 0 || t2 <= 0) throw std::invalid_argument("OUParams: times must be positive");
    OUParams p;
    p.correlationTime = tauC;
    p.targetT2 = t2;
    p.diffusion = 2.0 / (tauC * tauC * t2);
    return p;
  }

  double stationaryVariance() const { return diffusion * correlationTime / 2.0; }
};

// Distribution-exact OU recursion sampled on a uniform grid, X0 stationary:
// X_{n+1} = a X_n + sigma sqrt(1-a^2) xi, a = exp(-dt/tau_c).
inline std::vector<double> ou_trajectory(const OUParams& p, double dt, double horizon,
                                         std::uint64_t seed) {
  if (dt <= 0 || horizon <= 0) throw std::invalid_argument("ou_trajectory: bad grid");
  if (dt > p.correlationTime / 10.0)
    throw std::invalid_argument("ou_trajectory: dt must resolve the correlation time");
  GaussianRng rng(seed);
  const double sigma = std::sqrt(p.stationaryVariance());
  const double a = std::exp(-dt / p.correlationTime);
  const double s = sigma * std::sqrt(1.0 - a * a);
  const std::size_t n = std::size_t(std::ceil(horizon / dt));
  std::vector<double> x(n + 1);
  x[0] = sigma * rng.normal();
  for (std::size_t k = 0; k < n; ++k) x[k + 1] = a * x[k] + s * rng.normal();
  return x;
}

// Free-evolution coherence versus evolution time, measured on a ladder of
// lags with non-overlapping windows (the dephasing is stationary, so every
// window is a fresh coherence experiment). The fit matches -ln C against the
// exact OU dephasing shape g(L) = L - tau_c (1 - e^{-L/tau_c}), whose
// long-time slope is 1/T2; inverse-variance weights make the short lags,
// where most independent increments live, carry the information.
struct CoherenceFit {
  std::vector<double> lags;
  std::vector<double> coherence;
  double fittedT2 = 0.0;
};

inline CoherenceFit ou_coherence_fit(const OUParams& p, double dt, double horizon,
                                     int trajectories, std::uint64_t seed) {
  const std::size_t n = std::size_t(std::ceil(horizon / dt));
  std::vector<std::vector<double>> phase(trajectories);
  for (int t = 0; t < trajectories; ++t) {
    const auto x = ou_trajectory(p, dt, horizon, GaussianRng::derive_stream(seed, t));
    phase[t].resize(n + 1);
    phase[t][0] = 0.0;
    for (std::size_t k = 1; k <= n; ++k)
      phase[t][k] = phase[t][k - 1] + 0.5 * dt * (x[k - 1] + x[k]);
  }

  CoherenceFit out;
  const double fr[5] = {1.0 / 60, 1.0 / 30, 1.0 / 15, 2.0 / 15, 1.0 / 4};
  double num = 0.0, den = 0.0;
  for (double f : fr) {
    const std::size_t lag = std::max<std::size_t>(2, std::size_t(f * n));
    std::complex<double> acc(0.0, 0.0);
    std::size_t count = 0;
    for (int t = 0; t < trajectories; ++t)
      for (std::size_t s = 0; s + lag <= n; s += lag) {
        acc += std::polar(1.0, -(phase[t][s + lag] - phase[t][s]));
        ++count;
      }
    const double c = std::abs(acc) / double(count);
    const double L = lag * dt;
    const double g = L - p.correlationTime * (1.0 - std::exp(-L / p.correlationTime));
    const double chi = -std::log(std::max(c, 1e-12));
    const double w = double(count) / std::max(chi * chi, 1e-18);
    out.lags.push_back(L);
    out.coherence.push_back(c);
    num += w * g * chi;
    den += w * g * g;
  }
  out.fittedT2 = (num > 0) ? den / num : 0.0;
  return out;
}

// Appendix-style 4-level single-ion model: qubit levels {0,1}, spectator
// levels {2,3}; OU field shifts 1 and 3 oppositely; the drive leaks onto the
// spectator transitions with amplitude fraction epsilon.
struct FourLevelConfig {
  double energies[4] = {0.0, 0.0, 0.0, 0.0}; // rad/s, lab frame
  double driveFrequency = 0.0;               // rad/s
  double leakage = 0.0;                      // epsilon
  double rabi = angular_from_hz(20e6);       // rad/s
  PulseSchedule schedule;                    // single-ion pulse list
  int trajectories = 100;
  std::uint64_t seed = 1;
  bool rwaDrive = false;          // drop the counter-rotating drive term
  double carrierStepDivisor = 160.0; // rk4 steps per 2*omega period in pulses
  double ouDt = 100e-9;           // OU sampling grid between pulses

  void validate() const {
    if (leakage < 0.0 || leakage >= 1.0)
      throw std::invalid_argument("FourLevelConfig: leakage must lie in [0, 1)");
    if (trajectories < 1)
      throw std::invalid_argument("FourLevelConfig: need at least one trajectory");
    if (rabi <= 0 || driveFrequency <= 0)
      throw std::invalid_argument("FourLevelConfig: frequencies must be positive");
  }

  // 171Yb+ hyperfine manifold in a 100 G field: F=0 ground level, F=1 at
  // 2pi x 12.6428 GHz with m = +/-1 shifted by +/- gamma B.
  static FourLevelConfig yb171(double rabi, const PulseSchedule& sched, double bFieldGauss = 100.0) {
    FourLevelConfig c;
    const double hf = angular_from_hz(12.6428e9);
    const double zeeman = angular_from_hz(1.4e6 * bFieldGauss);
    c.energies[0] = 0.0;
    c.energies[1] = hf + zeeman;
    c.energies[2] = hf;
    c.energies[3] = hf - zeeman;
    c.driveFrequency = c.energies[1];
    c.rabi = rabi;
    c.schedule = sched;
    return c;
  }
};

struct FourLevelResult {
  double meanInfidelityQubit = 0.0; // primary: 2x2 qubit-block overlap
  double meanInfidelityFull = 0.0;  // secondary: full 4-level comparison
  double meanLeakage = 0.0;         // population lost from the qubit block
};

namespace noisedetail {

// One trajectory of the 4-level propagator in the frame rotating at the drive
// frequency on all excited levels. Free segments are diagonal and integrate
// exactly; pulse windows run fixed-step RK4 resolving the 2*omega term, with
// the OU field frozen across the (tens of ns) window.
inline Eigen::Matrix4cd four_level_propagator(const FourLevelConfig& cfg, const OUParams& ou,
                                              std::uint64_t seed) {
  using Mat4 = Eigen::Matrix4cd;
  const double w = cfg.driveFrequency;
  const double det1 = cfg.energies[1] - w; // 0 on resonance
  const double det2 = cfg.energies[2] - w;
  const double det3 = cfg.energies[3] - w;
  const double eps = cfg.leakage;

  GaussianRng rng(seed);
  const double sigma = std::sqrt(ou.stationaryVariance());
  double x = sigma * rng.normal();
  const double aStep = std::exp(-cfg.ouDt / ou.correlationTime);
  const double sStep = sigma * std::sqrt(1.0 - aStep * aStep);

  Mat4 u = Mat4::Identity();
  const std::complex<double> im(0.0, 1.0);

  auto freeSegment = [&](double t0, double t1) {
    // diagonal phases; X(t) advanced on the OU grid with trapezoid phase
    double t = t0;
    double phiX = 0.0;
    double dur = t1 - t0;
    while (t < t1 - 1e-18) {
      const double h = std::min(cfg.ouDt, t1 - t);
      const double xNext = (h == cfg.ouDt)
                               ? aStep * x + sStep * rng.normal()
                               : std::exp(-h / ou.correlationTime) * x +
                                     sigma * std::sqrt(1.0 - std::exp(-2.0 * h / ou.correlationTime)) *
                                         rng.normal();
      phiX += 0.5 * h * (x + xNext);
      x = xNext;
      t += h;
    }
    Mat4 d = Mat4::Zero();
    d(0, 0) = 1.0;
    d(1, 1) = std::polar(1.0, -(det1 * dur + phiX));
    d(2, 2) = std::polar(1.0, -det2 * dur);
    d(3, 3) = std::polar(1.0, -(det3 * dur - phiX));
    u = d * u;
  };

  auto pulseSegment = [&](const PulseEvent& e) {
    const double t0 = e.start(), t1 = e.end();
    const double xFrozen = x;
    Mat4 base = Mat4::Zero();
    base(1, 1) = det1 + xFrozen;
    base(2, 2) = det2;
    base(3, 3) = det3 - xFrozen;
    Eigen::Vector3cd v;
    v << 1.0, eps, eps;
    auto H = [&](double t) {
      Mat4 h = base;
      std::complex<double> f = 0.5 * e.rabi * std::polar(1.0, e.axisPhase);
      if (!cfg.rwaDrive) f += 0.5 * e.rabi * std::polar(1.0, -(2.0 * w * t + e.axisPhase));
      for (int k = 0; k < 3; ++k) {
        h(0, k + 1) += f * v(k);
        h(k + 1, 0) += std::conj(f * v(k));
      }
      return h;
    };
    if (cfg.rwaDrive) { // constant H in this frame: one exact exponential
      const Mat4 hc = H(0.0);
      u = (MatrixXcd(hermitian_propagator(hc, t1 - t0)) * u).eval();
      return;
    }
    const double period = kTwoPi / (2.0 * w);
    const int steps = std::max(64, int(std::ceil((t1 - t0) / (period / cfg.carrierStepDivisor))));
    const double h = (t1 - t0) / steps;
    for (int s = 0; s < steps; ++s) {
      const double t = t0 + s * h;
      const Mat4 k1 = -im * (H(t) * u);
      const Mat4 k2 = -im * (H(t + 0.5 * h) * (u + 0.5 * h * k1));
      const Mat4 k3 = -im * (H(t + 0.5 * h) * (u + 0.5 * h * k2));
      const Mat4 k4 = -im * (H(t + h) * (u + h * k3));
      u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  };

  double t = 0.0;
  for (const auto& e : cfg.schedule.events) {
    if (e.start() > t) freeSegment(t, e.start());
    pulseSegment(e);
    t = e.end();
  }
  const double tEnd = std::max(cfg.schedule.nominalTime, cfg.schedule.totalTime);
  if (t < tEnd) freeSegment(t, tEnd);
  return u;
}

} // namespace noisedetail

// Mean infidelity of the 20-pulse sequence propagator against the ideal
// reference, averaged over OU noise trajectories.
inline FourLevelResult four_level_run(const FourLevelConfig& cfg, const OUParams& ou) {
  cfg.validate();
  if (cfg.schedule.events.empty())
    throw std::invalid_argument("four_level_run: schedule must contain pulses");
  using Mat4 = Eigen::Matrix4cd;
  using Mat2 = Eigen::Matrix2cd;

  // ideal reference: exact pi-pulse algebra on the qubit block (global sign),
  // free spectator phases elsewhere
  const double tEnd = std::max(cfg.schedule.nominalTime, cfg.schedule.totalTime);
  Mat4 uref = Mat4::Zero();
  Mat2 qubitRef = Mat2::Identity();
  {
    const std::complex<double> im(0.0, 1.0);
    for (const auto& e : cfg.schedule.events)
      qubitRef = (-im * Mat2(sigma_phi(e.axisPhase))) * qubitRef;
  }
  uref.block(0, 0, 2, 2) = qubitRef;
  uref(2, 2) = std::polar(1.0, -(cfg.energies[2] - cfg.driveFrequency) * tEnd);
  uref(3, 3) = std::polar(1.0, -(cfg.energies[3] - cfg.driveFrequency) * tEnd);

  double accQ = 0.0, accF = 0.0, accL = 0.0;
  for (int k = 0; k < cfg.trajectories; ++k) {
    const Mat4 u =
        noisedetail::four_level_propagator(cfg, ou, GaussianRng::derive_stream(cfg.seed, k));
    // primary: the quoted overlap formula restricted to the qubit block
    const Mat2 blk = u.block(0, 0, 2, 2);
    accQ += 1.0 - operator_fidelity(blk, qubitRef);
    // secondary: the same formula on the full 4-level propagator against the
    // noise-free reference; leaked population reported separately
    accF += 1.0 - operator_fidelity(u, uref);
    accL += 1.0 - 0.5 * (blk.adjoint() * blk).trace().real();
  }
  FourLevelResult out;
  out.meanInfidelityQubit = accQ / cfg.trajectories;
  out.meanInfidelityFull = accF / cfg.trajectories;
  out.meanLeakage = accL / cfg.trajectories;
  return out;
}

// Radial-mode perturbation study. The ideal-pulse gate is evolved per spin
// sector as a product of segment propagators (piecewise-constant couplings),
// with the radial mode started in a Boltzmann-weighted Fock branch. Because
// the unperturbed and perturbed runs share the axial dynamics exactly, the
// branch fidelity reduces to the radial-factor overlaps.
struct RadialConfig {
  double beta = 0.0;                        // Delta_r / Delta_1
  double nuRadial = angular_from_hz(2.5e6); // rad/s
  double thermalN = 2.0;                    // radial mean phonons
  double branchTol = 1e-6;                  // kept cumulative weight 1 - tol
  int radialHeadroom = 8;                   // dynamic levels above top branch

  void validate() const {
    if (beta < 0) throw std::invalid_argument("RadialConfig: beta must be >= 0");
    if (nuRadial <= 0) throw std::invalid_argument("RadialConfig: nuRadial must be > 0");
    if (thermalN < 0) throw std::invalid_argument("RadialConfig: thermalN must be >= 0");
  }
};

inline double radial_run(const RadialConfig& rc, const GateDesign& d,
                         const Eigen::Vector4cd& initQubit) {
  rc.validate();
  const double nu1 = d.trap.nu1();
  const double tau = kTwoPi * d.seq.r / nu1;
  const double T = d.seq.nBlocks * tau;
  const auto f1 = make_axy_modulation(d.seq.r, d.seq.nBlocks, d.seq.tauATilde, d.seq.tauBTilde, tau);
  const auto f2 = make_axy_modulation(d.seq.r, d.seq.nBlocks, d.seq.tauATilde, d.seq.tauBTilde, tau,
                                      d.seq.stagger);

  // branch count covering 1 - branchTol of the thermal weight
  int branches = 1;
  if (rc.thermalN > 0) {
    const double q = rc.thermalN / (1.0 + rc.thermalN);
    branches = std::max(1, int(std::ceil(std::log(rc.branchTol) / std::log(q))));
  }
  const int nr = branches + rc.radialHeadroom;

  // merged segment grid
  std::vector<double> pts;
  pts.push_back(0.0);
  for (double s : f1.switches())
    if (s < T) pts.push_back(s);
  for (double s : f2.switches())
    if (s < T) pts.push_back(s);
  pts.push_back(T);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  const int z1[4] = {-1, -1, 1, 1};
  const int z2[4] = {-1, 1, -1, 1};
  const double dr = rc.beta * d.couplings.delta1;

  // segment propagators on the radial factor for g in {0, +-2 dr} and on the
  // axial factors; cached per (g, duration)
  const MatrixXcd dOp = destroy_op(nr);
  const MatrixXcd xd = dOp + dOp.adjoint();
  const MatrixXcd nd = number_op(nr);
  std::map<int, Eigen::SelfAdjointEigenSolver<MatrixXcd>> eigD;
  for (int g : {-2, 0, 2}) eigD[g].compute(rc.nuRadial * nd + (g * dr) * xd);

  auto stepVec = [](const Eigen::SelfAdjointEigenSolver<MatrixXcd>& es, double h,
                    VectorXcd& v) {
    VectorXcd w = es.eigenvectors().adjoint() * v;
    for (Eigen::Index k = 0; k < w.size(); ++k)
      w(k) *= std::polar(1.0, -es.eigenvalues()(k) * h);
    v = es.eigenvectors() * w;
  };

  // Only the radial factors need propagating: the perturbation leaves the
  // axial couplings untouched, so the (identical) axial factors drop out of
  // every branch overlap exactly.
  struct SectorState {
    VectorXcd dPert, dFree;
  };

  double fidAcc = 0.0, weightAcc = 0.0;
  const double q = rc.thermalN > 0 ? rc.thermalN / (1.0 + rc.thermalN) : 0.0;
  for (int nbr = 0; nbr < branches; ++nbr) {
    const double weight = (rc.thermalN > 0) ? (1.0 - q) * std::pow(q, nbr) : (nbr == 0 ? 1.0 : 0.0);
    SectorState st[4];
    for (int s = 0; s < 4; ++s) {
      st[s].dPert = VectorXcd::Zero(nr);
      st[s].dPert(nbr) = 1.0;
      st[s].dFree = st[s].dPert;
    }
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      const double a = pts[k], b = pts[k + 1];
      const double h = b - a;
      const double mid = 0.5 * (a + b);
      const int s1 = f1.sign_at(mid), s2 = f2.sign_at(mid);
      for (int s = 0; s < 4; ++s) {
        const int gAx = z1[s] * s1 + z2[s] * s2;   // in {-2, 0, 2}
        stepVec(eigD.at(gAx), h, st[s].dPert);
        stepVec(eigD.at(0), h, st[s].dFree);
      }
    }
    std::complex<double> ov(0.0, 0.0);
    for (int s = 0; s < 4; ++s) {
      const double w = std::norm(initQubit(s));
      ov += w * (st[s].dFree.dot(st[s].dPert));
    }
    // top-of-space leakage check on the radial factor
    for (int s = 0; s < 4; ++s)
      if (std::norm(st[s].dPert(nr - 1)) > 1e-6)
        throw TruncationError("radial_run: radial truncation overflow");
    fidAcc += weight * std::norm(ov);
    weightAcc += weight;
  }
  return 1.0 - fidAcc / weightAcc;
}

} // namespace axygate
