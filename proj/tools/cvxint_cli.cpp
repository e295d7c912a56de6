#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <json.hpp>

#include "cvxint/experiment.hpp"
#include "cvxint/flux.hpp"
#include "cvxint/hull.hpp"
#include "cvxint/parallel.hpp"
#include "cvxint/verify.hpp"

using namespace cvxint;
using nlohmann::json;

namespace {

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

int hull_probe(const std::vector<double>& p, const std::vector<double>& beta, double delta) {
  if (p.empty() || p.size() != beta.size() || p.size() > static_cast<std::size_t>(kMaxDim))
    throw PreconditionError("hull-probe: --p and --beta need the same length (1 to 4)");
  if (!(delta > 0 && delta < 0.5)) throw PreconditionError("hull-probe: --delta must lie in (0, 1/2)");
  ReducedPoint z{to_vec(p), to_vec(beta)};
  json out = {{"p", p},
              {"beta", beta},
              {"delta", delta},
              {"l_expression", l_expression(z)},
              {"s_delta_expression", s_delta_expression(z, delta)},
              {"in_L_K0", in_L_K0(z)},
              {"in_S_delta", in_S_delta(z, delta)},
              {"in_K_delta", in_K_delta(z, delta, 1e-8)}};
  if (in_L_K0(z)) {
    try {
      auto f = rank_one_decompose(z);
      out["frame"] = {{"q", vec_json(f.q)},
                      {"gamma", vec_json(f.gamma)},
                      {"t_minus", f.t_minus},
                      {"t_plus", f.t_plus},
                      {"b", f.b}};
      out["residual"] = frame_residual(f, z);
      if (in_S_delta(z, delta)) out["segment_in_S_delta"] = segment_in_S_delta(f, z, delta, 200);
    } catch (const std::exception& e) {
      out["frame_error"] = e.what();
    }
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convex-integration laboratory for the Perona-Malik equation"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "single seed replacing the config's seeds");
  run->add_option("--out-dir", out_dir, "output directory replacing the config's");

  std::string level = "quick", json_out;
  std::uint64_t vseed = 1;
  auto* ver = app.add_subcommand("verify", "run the module property suites");
  ver->add_option("--level", level, "quick or full")->check(CLI::IsMember({"quick", "full"}));
  ver->add_option("--seed", vseed, "seed for sampled checks");
  ver->add_option("--json", json_out, "also write the report as JSON");

  std::vector<double> p, beta;
  double delta = 0;
  auto* probe = app.add_subcommand("hull-probe", "membership, rank-one frame and residual of (p, beta)");
  probe->add_option("--p", p, "gradient p, comma separated")->required()->delimiter(',');
  probe->add_option("--beta", beta, "beta, comma separated")->required()->delimiter(',');
  probe->add_option("--delta", delta, "delta in (0, 1/2)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      RunConfig cfg = load_config(config_path);
      if (run->count("--seed")) cfg.seeds = {seed};
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      cfg.validate();
      std::cerr << "threads " << worker_count() << ", output " << cfg.out_dir << '\n';
      RunResult r = run_experiment(cfg);
      json summary = {{"exit_code", r.exit_code}, {"out_dir", cfg.out_dir}};
      if (r.manifest.contains("runs"))
        for (const auto& run_j : r.manifest["runs"])
          summary["final_residual"][std::to_string(run_j["seed"].get<std::uint64_t>())] =
              run_j["final_residual"];
      if (r.manifest.contains("non_uniqueness")) summary["non_uniqueness"] = r.manifest["non_uniqueness"];
      if (r.exit_code) summary["failed_certificate"] = r.failed_certificate;
      std::cout << summary.dump(2) << '\n';
      return r.exit_code;
    }
    if (*ver) {
      VerifyReport r = verify_suite(level, vseed);
      std::cout << r.table();
      if (!json_out.empty()) {
        FILE* f = std::fopen(json_out.c_str(), "w");
        if (!f) throw std::runtime_error("cannot write " + json_out);
        std::fputs(r.to_json().dump(2).c_str(), f);
        std::fclose(f);
      }
      return r.passed() ? 0 : 1;
    }
    if (*probe) return hull_probe(p, beta, delta);
  } catch (const PreconditionError& e) {
    std::cerr << json{{"error", "validation"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "runtime"}, {"message", e.what()}}.dump() << '\n';
    return 3;
  }
  return 0;
}
