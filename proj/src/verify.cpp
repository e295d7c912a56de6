#include "cvxint/verify.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>

#include "cvxint/convint.hpp"
#include "cvxint/divinv.hpp"
#include "cvxint/flux.hpp"
#include "cvxint/hull.hpp"
#include "cvxint/parabolic.hpp"
#include "cvxint/stitcher.hpp"
#include "cvxint/weakform.hpp"

namespace cvxint {

using nlohmann::json;

bool VerifyReport::passed() const {
  for (const auto& r : rows)
    if (!r.passed) return false;
  return !rows.empty();
}

std::string VerifyReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(11) << "module" << std::setw(34) << "check" << std::setw(6) << "ok"
     << std::setw(9) << "sec" << "detail\n";
  for (const auto& r : rows)
    os << std::setw(11) << r.module << std::setw(34) << r.name << std::setw(6)
       << (r.passed ? "PASS" : "FAIL") << std::setw(9) << std::fixed << std::setprecision(2)
       << r.seconds << r.detail << '\n';
  os << (passed() ? "all checks passed" : "some checks FAILED") << " (level " << level << ")\n";
  return os.str();
}

json VerifyReport::to_json() const {
  json rs = json::array();
  for (const auto& r : rows)
    rs.push_back({{"module", r.module},
                  {"name", r.name},
                  {"passed", r.passed},
                  {"detail", r.detail},
                  {"seconds", r.seconds}});
  return {{"level", level}, {"seed", seed}, {"passed", passed()}, {"rows", rs}};
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

GridSpec unit_grid(int n, int nx, int nt, double T) {
  GridSpec g;
  g.box = BoxDomain::unit(n);
  g.nx = nx;
  g.nt = nt;
  g.T = T;
  return g;
}

}  // namespace

VerifyReport verify_suite(const std::string& level, std::uint64_t seed) {
  if (level != "quick" && level != "full")
    throw PreconditionError("verify_suite: level must be quick or full");
  const bool full = level == "full";
  VerifyReport rep;
  rep.level = level;
  rep.seed = seed;
  auto run = [&](const std::string& mod, const std::string& name,
                 const std::function<bool(std::string&)>& fn) {
    VerifyRow row;
    row.module = mod;
    row.name = name;
    auto t0 = std::chrono::steady_clock::now();
    try {
      row.passed = fn(row.detail);
    } catch (const std::exception& e) {
      row.passed = false;
      row.detail = std::string("threw: ") + e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.rows.push_back(row);
  };

  run("flux", "profile M=2 lambda=0.5", [](std::string& d) {
    auto prof = build_profile(2.0, 0.5, 1);
    auto chk = validate_profile(prof);
    d = "delta " + fmt(prof.delta) + " m- " + fmt(prof.m_minus) + " theta " + fmt(prof.theta);
    return chk.ok && std::fabs(prof.delta - 2.5 / 7.25) < 1e-12;
  });
  run("flux", "profile M=0.9 identity range", [](std::string& d) {
    auto prof = build_profile(0.9, 0.5, 2);
    auto chk = validate_profile(prof);
    d = "max identity gap " + fmt(chk.max_identity_gap);
    return chk.ok && chk.max_identity_gap < 1e-12;
  });

  run("hull", "worked decomposition", [](std::string& d) {
    ReducedPoint z{vec({1, 0}), vec({0.3, 0})};
    auto f = rank_one_decompose(z);
    double r = frame_residual(f, z);
    d = "t+ " + fmt(f.t_plus) + " t- " + fmt(f.t_minus) + " residual " + fmt(r);
    return std::fabs(f.t_plus - 2) < 1e-10 && std::fabs(f.t_minus + 2.0 / 3) < 1e-10 &&
           (f.q - vec({1, 0})).norm() < 1e-10 && f.gamma.norm() < 1e-10 && r < 1e-12;
  });
  run("hull", "oracle agreement", [&](std::string& d) {
    const long N = full ? 1000 : 100;
    long in_found = 0, out_found = 0;
    auto ins = sample_hull_points(N, true, 0.01, 2, seed);
    auto outs = sample_hull_points(N, false, 0.01, 2, seed + 1);
    for (long i = 0; i < N; ++i) {
      in_found += brute_force_hull_oracle(ins[i], 64, seed * 1000 + i);
      out_found += brute_force_hull_oracle(outs[i], 64, seed * 1000 + N + i);
    }
    d = "inside " + std::to_string(in_found) + "/" + std::to_string(N) + ", outside " +
        std::to_string(out_found) + "/" + std::to_string(N);
    return in_found == N && out_found == 0;
  });
  run("hull", "S_delta envelope", [&](std::string& d) {
    auto r = s_delta_bounds_check(0.3, full ? 1000000 : 20000, 2, seed);
    d = std::to_string(r.accepted) + " accepted, sup|p| " + fmt(r.sup_p) + ", violations " +
        std::to_string(r.violations);
    return r.ok() && (!full || r.sup_p >= 2.95);
  });

  run("divinv", "div R u = u on smooth inputs", [&](std::string& d) {
    bool ok = true;
    double worst = 0;
    for (int n : {1, 2})
      for (int nx : full ? std::vector<int>{65, 129} : std::vector<int>{65})
        for (int w = 0; w < 3; ++w) {
          auto g = unit_grid(n, nx, 1, 1);
          auto u = smooth_test_input(g, w);
          double e = divergence_defect(right_inverse_static(u), u) / (5 * g.hmin());
          worst = std::max(worst, e);
          ok = ok && e <= 1;
        }
    d = "max error / 5h " + fmt(worst);
    return ok;
  });
  run("divinv", "measured constant bound", [&](std::string& d) {
    const int trials = full ? 100 : 20;
    auto C = measure_inverse_constant(BoxDomain::unit(2), trials, seed).constant;
    d = "C " + fmt(C);
    return std::isfinite(C) && C > 0 && C <= BumpProfile::C0;
  });

  run("parabolic", "Poisson eigenfunction", [](std::string& d) {
    auto g = unit_grid(1, 129, 1, 1);
    ScalarField f(g);
    for (std::size_t s = 0; s < g.spatial_size(); ++s) f.values[s] = std::cos(M_PI * g.x(0, s));
    auto r = solve_neumann_poisson(f);
    double e = 0;
    for (std::size_t s = 0; s < g.spatial_size(); ++s)
      e = std::max(e, std::fabs(r.h.values[s] + std::cos(M_PI * g.x(0, s)) / (M_PI * M_PI)));
    d = "max error " + fmt(e);
    return e <= 1e-6;
  });
  run("parabolic", "mass and max principle", [&](std::string& d) {
    bool ok = true;
    double drift = 0, ratio = 0;
    for (int n : {1, 2}) {
      const int nx = n == 1 ? (full ? 257 : 129) : (full ? 65 : 33);
      auto g = unit_grid(n, nx, n == 1 ? nx : 17, 0.05);
      auto prof = build_profile(2.0, 0.5, n);
      auto u0 = sample_initial_datum({{"name", "cosine"}, {"amplitude", 2 / M_PI}}, slice_grid(g));
      std::vector<StepDiagnostics> diag;
      auto u = solve_regularized(u0, prof, g, &diag);
      for (const auto& s : diag) drift = std::max(drift, std::fabs(s.mass - diag.front().mass));
      auto mp = check_gradient_max_principle(u);
      ratio = std::max(ratio, mp.ratio);
      ok = ok && mp.passed;
    }
    d = "mass drift " + fmt(drift) + ", gradient ratio " + fmt(ratio);
    return ok && drift <= 1e-12;
  });

  run("convint", "oscillation certificates", [&](std::string& d) {
    ReducedPoint z{vec({1, 0}), vec({0.3, 0})};
    BoxDomain G = BoxDomain::unit(2);
    G.time_interval = Interval{0, 1};
    auto P = build_oscillation({rank_one_decompose(z), 1, 1, G, 0.1}, full ? 64 : 24);
    d = "nonlevel " + fmt(P.osc.nonlevel_measure) + ", sup omega " + fmt(P.osc.sup_omega);
    return P.osc.passed();
  });
  run("convint", "patch certificates", [&](std::string& d) {
    ReducedPoint z{vec({1, 0}), vec({0.3, 0})};
    BoxDomain G = BoxDomain::unit(2);
    G.time_interval = Interval{0, 1};
    auto P = build_patch(z, 0.1, G, 1e-2, 0.1, G, full ? 64 : 24, seed);
    d = "div psi " + fmt(P.cert.div_psi) + ", residual " + fmt(P.cert.residual_integral) + "/" +
        fmt(P.cert.residual_budget);
    return P.cert.passed() && P.cert.div_psi <= 1e-8;
  });

  run("stitcher", "density step contract", [&](std::string& d) {
    const int nx = full ? 256 : 96;
    auto g = unit_grid(1, nx, nx, 0.25);
    auto prof = build_profile(2.0, 0.5, 1);
    auto u0 = sample_initial_datum({{"name", "cosine"}, {"amplitude", 2 / M_PI}}, slice_grid(g));
    auto datum = std::make_shared<BoundaryDatum>(build_boundary_datum(u0, prof, g));
    StitchOptions opt;
    opt.seed = seed;
    opt.inverse_constant = 1.0;
    StepReport r;
    auto P0 = initial_pair(datum, prof);
    auto P1 = density_step(P0, 0.5, 0.5, opt, &r);
    d = "residual " + fmt(r.residual_in) + " -> " + fmt(r.residual_out) + ", " +
        std::to_string(r.accepted) + " cubes";
    return r.contract_ok && r.audit_ok && r.residual_out < r.residual_in &&
           r.admissible.trace_deviation == 0;
  });
  run("stitcher", "exact pair weak form", [&](std::string& d) {
    auto E = synthetic_exact_pair(full ? 129 : 65, full ? 129 : 65);
    auto w = weak_form_residual(E, test_catalog(1));
    d = "residual " + fmt(residual(E)) + ", weak " + fmt(w.max_residual);
    return residual(E) == 0 && w.max_residual <= 1e-4;
  });
  return rep;
}

}  // namespace cvxint
