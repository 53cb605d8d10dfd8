// Batch front-end: scan / design / simulate / heating / noise / validate
// subcommands over a sectioned config file. All config frequencies are plain
// Hz; everything internal is angular.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "axygate/config.hpp"
#include "axygate/designer.hpp"
#include "axygate/lindblad.hpp"
#include "axygate/manifest.hpp"
#include "axygate/noise.hpp"
#include "axygate/parallel.hpp"
#include "axygate/physics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace axygate;

namespace {

struct CliOptions {
  std::string configPath;
  std::string outDir = ".";
  std::uint64_t seed = 1;
  int threads = 1;
  std::vector<int> rList;
  int grid = 0;
};

PhysicalConstants constants_from(const ConfigDoc& cfg) {
  const std::string conv = cfg.get_string("constants", "gamma_e_convention", "paper");
  if (conv == "paper") return PhysicalConstants::yb171();
  if (conv == "codata") return PhysicalConstants::yb171_codata();
  throw std::runtime_error("unknown gamma_e_convention: " + conv);
}

TrapConfig trap_from(const ConfigDoc& cfg) {
  TrapConfig t;
  t.nuAxial = angular_from_hz(cfg.get_double("trap", "nu_axial_hz"));
  t.gradB = cfg.get_double("trap", "grad_b_t_per_m");
  t.temperature = cfg.get_double("trap", "temperature_k");
  t.electrodeDistance = cfg.get_double("trap", "electrode_distance_m");
  t.ionSeparationOverride = cfg.get_double("trap", "ion_separation_m", 0.0);
  t.validate();
  return t;
}

HeatingReference heating_ref_from(const ConfigDoc& cfg) {
  HeatingReference ref;
  if (!cfg.has_section("heating_reference")) return ref;
  ref.nDotComRef = cfg.get_double("heating_reference", "ndot_com_ref", ref.nDotComRef);
  ref.nuComRef = angular_from_hz(
      cfg.get_double("heating_reference", "nu_com_ref_hz", hz_from_angular(ref.nuComRef)));
  ref.nDotBreRef = cfg.get_double("heating_reference", "ndot_bre_ref", ref.nDotBreRef);
  ref.nuBreRef = angular_from_hz(
      cfg.get_double("heating_reference", "nu_bre_ref_hz", hz_from_angular(ref.nuBreRef)));
  ref.distRef = cfg.get_double("heating_reference", "dist_ref_m", ref.distRef);
  ref.tempRef = cfg.get_double("heating_reference", "temp_ref_k", ref.tempRef);
  ref.tempExponent = cfg.get_double("heating_reference", "temp_exponent", ref.tempExponent);
  return ref;
}

DesignOptions design_options_from(const ConfigDoc& cfg) {
  DesignOptions opt;
  opt.gridN = int(cfg.get_int("design", "grid_n", opt.gridN));
  opt.nBlocks = int(cfg.get_int("design", "n_blocks", opt.nBlocks));
  opt.regionThreshold = cfg.get_double("design", "region_threshold", opt.regionThreshold);
  opt.refineTol = cfg.get_double("design", "refine_tol", opt.refineTol);
  opt.staggerFactor = cfg.get_double("design", "stagger_factor", opt.staggerFactor);
  opt.zeta = cfg.get_double("design", "zeta_rad", opt.zeta);
  return opt;
}

GateDesign design_from(const ConfigDoc& cfg, const CliOptions& cli) {
  if (cfg.has("simulate", "design_json")) {
    const auto path = cfg.get_string("simulate", "design_json");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open design json: " + path);
    json j;
    in >> j;
    return design_from_json(j);
  }
  const auto consts = constants_from(cfg);
  const auto trap = trap_from(cfg);
  const double target = cfg.get_double("design", "target_phase_rad");
  const int r = int(cfg.get_int("design", "r", 3));
  const int k = int(cfg.get_int("design", "magic_k", 2));
  auto opt = design_options_from(cfg);
  if (cli.grid > 1) opt.gridN = cli.grid;
  return design_gate(consts, trap, target, r, k, opt);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void finish_manifest(RunManifest& man, const fs::path& outDir) {
  man.finishedAt = RunManifest::now_iso8601();
  write_text(outDir / (man.subcommand + "_manifest.json"), man.to_json().dump(2) + "\n");
}

int cmd_scan(const ConfigDoc& cfg, const CliOptions& cli, RunManifest& man) {
  std::vector<int> rs = cli.rList;
  if (rs.empty())
    for (double r : cfg.get_list("scan", "r_list", {1, 2, 3})) rs.push_back(int(r));
  const int grid = cli.grid > 1 ? cli.grid : int(cfg.get_int("scan", "grid_n", 201));
  const int nBlocks = int(cfg.get_int("scan", "n_blocks", 4));
  std::vector<ScanResult> results(rs.size());
  parallel_for(int(rs.size()), cli.threads,
               [&](int i) { results[i] = scan_plane(rs[i], nBlocks, grid); });
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const fs::path out = fs::path(cli.outDir) / ("scan_r" + std::to_string(rs[i]) + ".csv");
    std::ostringstream ss;
    write_scan_csv(ss, results[i], man.digest());
    write_text(out, ss.str());
    man.outputs.push_back(out.string());
    std::cout << "scan r=" << rs[i] << " -> " << out.string() << "\n";
  }
  return 0;
}

int cmd_design(const ConfigDoc& cfg, const CliOptions& cli, RunManifest& man) {
  const auto d = design_from(cfg, cli);
  json j = design_to_json(d);
  j["manifest"] = man.digest();
  const fs::path out = fs::path(cli.outDir) / "design.json";
  write_text(out, j.dump(2) + "\n");
  man.outputs.push_back(out.string());
  std::cout << "design: tauA=" << d.seq.tauATilde << " tauB=" << d.seq.tauBTilde
            << " phi=" << d.signedPhase << " rad, gate " << d.gateTime * 1e6 << " us -> "
            << out.string() << "\n";
  return 0;
}

int cmd_heating(const ConfigDoc& cfg, const CliOptions& cli, RunManifest& man) {
  const auto consts = constants_from(cfg);
  const auto trap = trap_from(cfg);
  const auto h = heating_rates(consts, trap, heating_ref_from(cfg));
  json j;
  // both conventions, labeled: plain quanta/s and the same figure quoted with
  // a 2pi prefix
  j["ndot_com_quanta_per_s"] = h.nDotCom;
  j["ndot_bre_quanta_per_s"] = h.nDotBre;
  j["ndot_com_as_2pi_hz"] = h.nDotCom / kTwoPi;
  j["ndot_bre_as_2pi_hz"] = h.nDotBre / kTwoPi;
  j["gamma_b_per_s"] = h.gammaB;
  j["gamma_c_per_s"] = h.gammaC;
  j["nbar_b"] = h.nBarB;
  j["nbar_c"] = h.nBarC;
  j["manifest"] = man.digest();
  const fs::path out = fs::path(cli.outDir) / "heating.json";
  write_text(out, j.dump(2) + "\n");
  man.outputs.push_back(out.string());
  std::cout << "heating: com " << h.nDotCom << " quanta/s, bre " << h.nDotBre
            << " quanta/s -> " << out.string() << "\n";
  return 0;
}

int cmd_simulate(const ConfigDoc& cfg, const CliOptions& cli, RunManifest& man) {
  const auto consts = constants_from(cfg);
  const auto d = design_from(cfg, cli);
  SimConfig base;
  base.design = d;
  base.fockB = int(cfg.get_int("simulate", "fock_b", 8));
  base.fockC = int(cfg.get_int("simulate", "fock_c", 8));
  base.initThermal = cfg.get_double("simulate", "init_thermal", 0.2);
  base.dissipation = cfg.get_bool("simulate", "dissipation", true);
  base.heating = heating_rates(consts, d.trap, heating_ref_from(cfg));
  base.errors.rabiRelError = cfg.get_double("simulate", "rabi_rel_error", 0.0);
  base.errors.trapRelShift = cfg.get_double("simulate", "trap_rel_shift", 0.0);
  base.errors.qubitShift = angular_from_hz(cfg.get_double("simulate", "qubit_shift_hz", 0.0));
  base.errors.staggerFactor = cfg.get_double("simulate", "stagger_error_factor", 1.0);
  base.errors.includeCrosstalk = cfg.get_bool("simulate", "crosstalk", true);
  base.errors.shiftCouplings = cfg.get_bool("simulate", "shift_couplings", false);
  base.method = cfg.get_string("simulate", "method", "exact") == "rk4"
                    ? SimConfig::Method::Rk4
                    : SimConfig::Method::PiecewiseExact;
  base.gapChunk = cfg.get_double("simulate", "gap_chunk_s", base.gapChunk);
  base.pulseStepDivisor = cfg.get_double("simulate", "pulse_step_divisor", base.pulseStepDivisor);
  base.gapStepCap = cfg.get_double("simulate", "gap_step_cap_s", base.gapStepCap);
  base.topLevelTol = cfg.get_double("simulate", "top_level_tol", base.topLevelTol);
  base.initTailTol = cfg.get_double("simulate", "init_tail_tol", base.initTailTol);
  const bool timeseries = cfg.get_bool("simulate", "timeseries", false);

  std::vector<int> states;
  for (double s : cfg.get_list("simulate", "states", {1, 2, 3, 4, 5})) states.push_back(int(s));

  std::vector<SimReport> reports(states.size());
  std::vector<std::string> tsFiles(states.size());
  parallel_for(int(states.size()), cli.threads, [&](int i) {
    SimConfig sc = base;
    sc.initQubit = standard_state(states[i]);
    std::ostringstream ts;
    if (timeseries) {
      ts << "# manifest: " << man.digest() << "\n";
      ts << "time_s,trace,p_gg,p_ge,p_eg,p_ee,nbar_b,nbar_c\n";
      sc.observer = [&ts, &sc](double t, const MatrixXcd& rho) {
        const auto rq = trace_out_motion(rho, sc.fockB, sc.fockC);
        double nb = 0.0, ncc = 0.0;
        for (int q = 0; q < 4; ++q)
          for (int ib = 0; ib < sc.fockB; ++ib)
            for (int ic = 0; ic < sc.fockC; ++ic) {
              const double p = rho((q * sc.fockB + ib) * sc.fockC + ic,
                                   (q * sc.fockB + ib) * sc.fockC + ic).real();
              nb += ib * p;
              ncc += ic * p;
            }
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%.9g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", t,
                      rho.trace().real(), rq(0, 0).real(), rq(1, 1).real(), rq(2, 2).real(),
                      rq(3, 3).real(), nb, ncc);
        ts << buf;
      };
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = evolve(sc);
    SimReport rep;
    rep.state = "psi" + std::to_string(states[i]);
    rep.infidelity = state_infidelity(res.rho, d, sc.initQubit, sc.fockB, sc.fockC);
    rep.phaseEstimate = phase_estimate(res.rho, sc.fockB, sc.fockC);
    rep.traceDrift = res.diag.traceDrift;
    rep.hermDrift = res.diag.hermDrift;
    rep.minEigenvalue = res.diag.minEigenvalue;
    rep.topPopB = res.diag.topPopB;
    rep.topPopC = res.diag.topPopC;
    rep.methodTag = res.diag.methodTag;
    rep.wallSeconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    reports[i] = rep;
    tsFiles[i] = ts.str();
  });

  json j;
  j["gate"] = {{"signed_phase_rad", d.signedPhase},
               {"gate_time_s", d.gateTime},
               {"r", d.seq.r},
               {"n_blocks", d.seq.nBlocks}};
  json rows = json::array();
  for (const auto& r : reports) {
    rows.push_back({{"state", r.state},
                    {"infidelity", r.infidelity},
                    {"phase_estimate_rad", r.phaseEstimate},
                    {"trace_drift", r.traceDrift},
                    {"herm_drift", r.hermDrift},
                    {"min_eigenvalue", r.minEigenvalue},
                    {"top_pop_b", r.topPopB},
                    {"top_pop_c", r.topPopC},
                    {"method", r.methodTag},
                    {"wall_seconds", r.wallSeconds}});
  }
  j["reports"] = rows;
  j["manifest"] = man.digest();
  const fs::path out = fs::path(cli.outDir) / "simreport.json";
  write_text(out, j.dump(2) + "\n");
  man.outputs.push_back(out.string());
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!tsFiles[i].empty()) {
      const fs::path tsOut =
          fs::path(cli.outDir) / ("timeseries_psi" + std::to_string(states[i]) + ".csv");
      write_text(tsOut, tsFiles[i]);
      man.outputs.push_back(tsOut.string());
    }
    std::cout << reports[i].state << ": infidelity " << reports[i].infidelity << "\n";
  }
  std::cout << "-> " << out.string() << "\n";
  return 0;
}

int cmd_noise(const ConfigDoc& cfg, const CliOptions& cli, RunManifest& man,
              const std::string& mode) {
  if (mode == "ou") {
    const double tauC = cfg.get_double("noise_ou", "correlation_time_s", 50e-6);
    const double t2 = cfg.get_double("noise_ou", "target_t2_s", 3e-3);
    const double dt = cfg.get_double("noise_ou", "dt_s", 2e-6);
    const double horizon = cfg.get_double("noise_ou", "horizon_s", 6e-3);
    const int traj = int(cfg.get_int("noise_ou", "trajectories", 100));
    const auto p = OUParams::from_t2(tauC, t2);
    const auto fit = ou_coherence_fit(p, dt, horizon, traj, cli.seed);
    json j;
    j["correlation_time_s"] = tauC;
    j["target_t2_s"] = t2;
    j["diffusion_rad2_per_s3"] = p.diffusion;
    j["stationary_variance_rad2_per_s2"] = p.stationaryVariance();
    j["trajectories"] = traj;
    j["fitted_t2_s"] = fit.fittedT2;
    json lagRows = json::array();
    for (std::size_t i = 0; i < fit.lags.size(); ++i)
      lagRows.push_back({{"lag_s", fit.lags[i]}, {"coherence", fit.coherence[i]}});
    j["coherence"] = lagRows;
    j["manifest"] = man.digest();
    const fs::path out = fs::path(cli.outDir) / "noise_ou.json";
    write_text(out, j.dump(2) + "\n");
    man.outputs.push_back(out.string());
    std::cout << "ou: fitted T2 = " << fit.fittedT2 * 1e3 << " ms -> " << out.string() << "\n";
    return 0;
  }
  if (mode == "leakage") {
    const double rabi = angular_from_hz(cfg.get_double("noise_leakage", "rabi_hz", 20e6));
    const double total = cfg.get_double("noise_leakage", "total_time_s", 80e-6);
    const int traj = int(cfg.get_int("noise_leakage", "trajectories", 100));
    const double bGauss = cfg.get_double("noise_leakage", "b_field_gauss", 100.0);
    const double tauA = cfg.get_double("noise_leakage", "tau_a_tilde", 0.12);
    const double tauB = cfg.get_double("noise_leakage", "tau_b_tilde", 0.31);
    const auto eps = cfg.get_list("noise_leakage", "epsilon_list", {0, 0.05, 0.1, 0.15, 0.2});
    const auto p = OUParams::from_t2(cfg.get_double("noise_ou", "correlation_time_s", 50e-6),
                                     cfg.get_double("noise_ou", "target_t2_s", 3e-3));
    AxyParams ap;
    ap.r = 1;
    ap.nBlocks = 4;
    ap.tauATilde = tauA;
    ap.tauBTilde = tauB;
    ap.piTime1 = ap.piTime2 = (kTwoPi / 2.0) / rabi;
    ap.stagger = 1.05 * ap.piTime1;
    auto [s1, s2] = build_schedule(ap, ap.nBlocks * kTwoPi * ap.r / total);

    std::vector<FourLevelResult> res(eps.size());
    parallel_for(int(eps.size()), cli.threads, [&](int i) {
      auto flc = FourLevelConfig::yb171(rabi, s1, bGauss);
      flc.leakage = eps[i];
      flc.trajectories = traj;
      flc.seed = cli.seed;
      res[i] = four_level_run(flc, p);
    });
    std::ostringstream csv;
    csv << "# manifest: " << man.digest() << "\n";
    csv << "epsilon,mean_infidelity_qubit,mean_infidelity_full,mean_leakage\n";
    char buf[160];
    for (std::size_t i = 0; i < eps.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", eps[i],
                    res[i].meanInfidelityQubit, res[i].meanInfidelityFull, res[i].meanLeakage);
      csv << buf;
      std::cout << "eps=" << eps[i] << ": infidelity " << res[i].meanInfidelityQubit << "\n";
    }
    const fs::path out = fs::path(cli.outDir) / "noise_leakage.csv";
    write_text(out, csv.str());
    man.outputs.push_back(out.string());
    std::cout << "-> " << out.string() << "\n";
    return 0;
  }
  if (mode == "radial") {
    const auto d = design_from(cfg, cli);
    const auto betas = cfg.get_list("noise_radial", "beta_list", {0, 0.1, 0.2, 0.3, 0.4});
    const int state = int(cfg.get_int("noise_radial", "state", 4));
    RadialConfig rc;
    rc.nuRadial = angular_from_hz(cfg.get_double("noise_radial", "nu_radial_hz", 2.5e6));
    rc.thermalN = cfg.get_double("noise_radial", "thermal_n", 2.0);
    rc.branchTol = cfg.get_double("noise_radial", "branch_tol", rc.branchTol);
    std::vector<double> infid(betas.size());
    parallel_for(int(betas.size()), cli.threads, [&](int i) {
      RadialConfig r2 = rc;
      r2.beta = betas[i];
      infid[i] = radial_run(r2, d, standard_state(state));
    });
    std::ostringstream csv;
    csv << "# manifest: " << man.digest() << "\n";
    csv << "beta,infidelity\n";
    char buf[96];
    for (std::size_t i = 0; i < betas.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", betas[i], infid[i]);
      csv << buf;
      std::cout << "beta=" << betas[i] << ": infidelity " << infid[i] << "\n";
    }
    const fs::path out = fs::path(cli.outDir) / "noise_radial.csv";
    write_text(out, csv.str());
    man.outputs.push_back(out.string());
    std::cout << "-> " << out.string() << "\n";
    return 0;
  }
  throw std::runtime_error("unknown noise mode: " + mode + " (expected ou|leakage|radial)");
}

int cmd_validate(const ConfigDoc& cfg, const CliOptions& cli) {
  (void)cfg;
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  };

  {
    bool ok = true;
    GaussianRng rng(cli.seed);
    for (int n : {2, 4, 8})
      for (int r : {1, 2, 3})
        for (int i = 0; i < 20; ++i) {
          const double ta = 0.01 + 0.44 * rng.uniform();
          const double tb = ta + 0.01 + (0.48 - ta) * rng.uniform();
          const auto f = make_axy_modulation(r, n, ta, tb, kTwoPi * r);
          ok = ok && std::abs(g_integral(f, 1.0, 0.0, n * kTwoPi * r)) < 1e-10;
        }
    check("decoupling zero-theorem", ok);
  }
  {
    const auto a = phase_tilde_axy(2, 4, 0.123, 0.317);
    const double tau = kTwoPi * 2 / 3.0;
    const auto f = make_axy_modulation(2, 4, 0.123, 0.317, tau);
    const auto b = phase_tilde(f, f, 3.0, 4 * tau);
    check("phase rescaling invariance", std::abs(a.phi - b.phi) < 1e-9 * std::abs(a.phi));
  }
  {
    bool ok = true;
    GaussianRng rng(cli.seed + 1);
    for (int k = 1; k <= 20; ++k) {
      const double delta = 1e6 + 1e9 * rng.uniform();
      const double om = magic_rabi(delta, k);
      const double gamma = 0.5 * std::sqrt(om * om + delta * delta);
      ok = ok && std::abs(gamma * ((kTwoPi / 2.0) / om) - k * kTwoPi / 2.0) <
                     1e-12 * k * kTwoPi;
    }
    check("magic-rabi identity", ok);
  }
  {
    const auto c = PhysicalConstants::yb171();
    TrapConfig t;
    const auto h0 = heating_rates(c, t);
    TrapConfig t2 = t;
    t2.electrodeDistance *= 2.0;
    TrapConfig t3 = t;
    t3.temperature *= 2.0;
    check("heating monotonicity", heating_rates(c, t2).nDotCom < h0.nDotCom &&
                                      heating_rates(c, t3).nDotCom > h0.nDotCom);
  }
  std::cout << (failures == 0 ? "validate: all checks passed\n"
                              : "validate: FAILURES present\n");
  return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"axygate: staggered AXY-n two-qubit phase gate design and verification"};
  app.require_subcommand(1);
  app.fallthrough();

  CliOptions opt;
  app.add_option("--config", opt.configPath, "configuration file");
  app.add_option("--out-dir", opt.outDir, "output directory");
  app.add_option("--seed", opt.seed, "master seed for stochastic subcommands");
  app.add_option("--threads", opt.threads, "worker thread cap for batches");
  app.add_option("--r-list", opt.rList, "override scan r values");
  app.add_option("--grid", opt.grid, "override scan/design grid size");

  auto* sScan = app.add_subcommand("scan", "decoupling-residual scans over (tauA, tauB)");
  auto* sDesign = app.add_subcommand("design", "produce a complete gate design");
  auto* sSim = app.add_subcommand("simulate", "full open-system gate simulation");
  auto* sHeat = app.add_subcommand("heating", "heating-rate extrapolation report");
  auto* sNoise = app.add_subcommand("noise", "noise studies: ou | leakage | radial");
  std::string noiseMode;
  sNoise->add_option("mode", noiseMode, "ou | leakage | radial")->required();
  auto* sValidate = app.add_subcommand("validate", "run the built-in invariant suite");

  CLI11_PARSE(app, argc, argv);

  try {
    ConfigDoc cfg;
    if (!opt.configPath.empty()) {
      cfg = ConfigDoc::parse_file(opt.configPath);
    } else if (!sValidate->parsed()) {
      std::cerr << "error: --config is required for this subcommand\n";
      return 2;
    }
    fs::create_directories(opt.outDir);

    RunManifest man;
    man.subcommand = app.get_subcommands().front()->get_name();
    if (sNoise->parsed()) man.subcommand += "_" + noiseMode;
    man.configDigest = fnv1a_hex(cfg.serialize());
    man.seed = opt.seed;
    man.threads = opt.threads;
    man.startedAt = RunManifest::now_iso8601();

    int rc = 0;
    if (sScan->parsed()) rc = cmd_scan(cfg, opt, man);
    else if (sDesign->parsed()) rc = cmd_design(cfg, opt, man);
    else if (sSim->parsed()) rc = cmd_simulate(cfg, opt, man);
    else if (sHeat->parsed()) rc = cmd_heating(cfg, opt, man);
    else if (sNoise->parsed()) rc = cmd_noise(cfg, opt, man, noiseMode);
    else if (sValidate->parsed()) return cmd_validate(cfg, opt);
    finish_manifest(man, opt.outDir);
    return rc;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    const std::string what = e.what();
    if (what.find("cannot open") != std::string::npos ||
        what.find("cannot write") != std::string::npos ||
        what.find("write failed") != std::string::npos) {
      std::cerr << "io error: " << what << "\n";
      return 3;
    }
    std::cerr << "error: " << what << "\n";
    return 1;
  }
}
