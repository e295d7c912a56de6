#include "cvxint/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cvxint/divinv.hpp"
#include "cvxint/field_io.hpp"
#include "cvxint/weakform.hpp"

namespace cvxint {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError("config: " + what);
}

void reject_unknown(const json& j, const std::set<std::string>& keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    require(keys.count(it.key()) > 0, "unknown key '" + it.key() + "' in " + where);
}

StitchOptions stitch_from_json(const json& j) {
  reject_unknown(j,
                 {"kappa", "classify_tau", "space_sides", "time_sides", "min_period_cells", "taus",
                  "time_ramp", "transverse_ramp", "min_gain", "inverse_constant", "seed"},
                 "stitch");
  StitchOptions o;
  o.kappa = j.value("kappa", o.kappa);
  o.classify_tau = j.value("classify_tau", o.classify_tau);
  o.space_sides = j.value("space_sides", o.space_sides);
  o.time_sides = j.value("time_sides", o.time_sides);
  o.min_period_cells = j.value("min_period_cells", o.min_period_cells);
  o.taus = j.value("taus", o.taus);
  o.time_ramp = j.value("time_ramp", o.time_ramp);
  o.transverse_ramp = j.value("transverse_ramp", o.transverse_ramp);
  o.min_gain = j.value("min_gain", o.min_gain);
  o.inverse_constant = j.value("inverse_constant", o.inverse_constant);
  o.seed = j.value("seed", o.seed);
  return o;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << s;
}

// Max reflected-gradient norm of a single slice.
double slice_max_gradient(const ScalarField& u0) {
  double m = 0;
  for (std::size_t s = 0; s < u0.grid.spatial_size(); ++s)
    m = std::max(m, u0.grad(0, s, Stencil::reflect).norm());
  return m;
}

std::string steps_csv(const std::vector<StepReport>& reps, const std::vector<double>& weak) {
  std::ostringstream os;
  os.precision(10);
  os << "step,eps,eta,eps_work,residual_in,residual_out,sup_change,accepted,literal,"
        "membership_fraction,max_grad,audit_ok,contract_ok,weak_residual\n";
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const auto& r = reps[i];
    os << r.step << ',' << r.eps << ',' << r.eta << ',' << r.eps_work << ',' << r.residual_in
       << ',' << r.residual_out << ',' << r.sup_change << ',' << r.accepted << ',' << r.literal
       << ',' << r.admissible.membership_fraction << ',' << r.admissible.max_grad << ','
       << r.audit_ok << ',' << r.contract_ok << ',' << (i + 1 < weak.size() ? weak[i + 1] : NAN)
       << '\n';
  }
  return os.str();
}

void dump(const fs::path& dir, int j, const AdmissiblePair& P) {
  const std::string pre = "iter_" + std::to_string(j) + "_";
  write_field((dir / (pre + "u.bin")).string(), P.u, j);
  write_field((dir / (pre + "v.bin")).string(), P.v, j);
  write_field((dir / (pre + "du.bin")).string(), P.du, j);
  write_field((dir / (pre + "vt.bin")).string(), P.vt, j);
}

}  // namespace

BoxDomain RunConfig::domain() const {
  return box.empty() ? BoxDomain::unit(dim) : BoxDomain{box, {}};
}

GridSpec RunConfig::grid() const {
  GridSpec g;
  g.box = domain();
  g.nx = nx;
  g.nt = nt;
  g.T = T;
  return g;
}

void RunConfig::validate() const {
  require(!name.empty(), "name must be non-empty");
  require(dim == 1 || dim == 2, "dim must be 1 or 2");
  require(nx >= 9, "grid.nx must be at least 9");
  require(nt >= 3, "grid.nt must be at least 3");
  require(T > 0 && std::isfinite(T), "grid.T must be positive");
  require(M > 0 && std::isfinite(M), "M must be positive");
  require(lambda_slack > 0 && std::isfinite(lambda_slack), "lambda_slack must be positive");
  if (delta) {
    require(*delta > 0 && *delta < 0.5, "delta must lie in (0, 1/2)");
    require(std::fabs(*delta - selected_delta(M, lambda_slack)) <= 1e-9,
            "delta disagrees with the value selected from M and lambda_slack");
  }
  if (!box.empty()) {
    require(static_cast<int>(box.size()) == dim, "box needs one interval per dimension");
    for (const auto& iv : box) {
      require(iv.a < iv.b, "box intervals must have a < b");
      require(iv.a == box[0].a && iv.b == box[0].b, "box intervals must coincide (cube boxes)");
    }
  }
  require(!schedule.empty(), "schedule must be non-empty");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    require(schedule[i].eps > 0 && schedule[i].eta > 0, "schedule entries must be positive");
    if (i) require(schedule[i].eps <= schedule[i - 1].eps, "schedule eps must be nonincreasing");
  }
  require(!seeds.empty(), "seeds must be non-empty");
  require(!out_dir.empty(), "out_dir must be non-empty");
  require(inverse_trials >= 1, "inverse_trials must be at least 1");
  require(initial.is_object() && (initial.contains("name") || initial.contains("file")),
          "initial needs a catalog 'name' or a 'file'");
  if (initial.contains("name")) {
    static const std::set<std::string> names{"cosine", "cosine_product", "gaussian", "zero"};
    require(names.count(initial["name"].get<std::string>()) > 0,
            "initial.name must be cosine, cosine_product, gaussian or zero");
  }
  const auto& s = stitch;
  require(s.kappa > 0 && s.kappa <= 1, "stitch.kappa must lie in (0, 1]");
  require(s.classify_tau > 0, "stitch.classify_tau must be positive");
  require(!s.space_sides.empty() && !s.time_sides.empty(), "stitch sides must be non-empty");
  for (int v : s.space_sides) require(v >= 2, "stitch.space_sides entries must be >= 2");
  for (int v : s.time_sides) require(v >= 2, "stitch.time_sides entries must be >= 2");
  require(s.min_period_cells >= 2, "stitch.min_period_cells must be >= 2");
  require(!s.taus.empty(), "stitch.taus must be non-empty");
  for (double t : s.taus) require(t > 0 && t < 0.25, "stitch.taus entries must lie in (0, 1/4)");
  require(s.time_ramp > 0 && s.time_ramp < 0.5, "stitch.time_ramp must lie in (0, 1/2)");
  require(s.transverse_ramp > 0 && s.transverse_ramp < 0.5,
          "stitch.transverse_ramp must lie in (0, 1/2)");
  require(s.min_gain >= 0 && s.min_gain < 1, "stitch.min_gain must lie in [0, 1)");
  require(s.inverse_constant >= 0, "stitch.inverse_constant must be >= 0");
}

json RunConfig::to_json() const {
  json sched = json::array();
  for (const auto& e : schedule) sched.push_back({e.eps, e.eta});
  json b = json::array();
  for (const auto& iv : domain().intervals) b.push_back({iv.a, iv.b});
  json j = {{"name", name},
            {"dim", dim},
            {"initial", initial},
            {"M", M},
            {"lambda_slack", lambda_slack},
            {"delta", delta ? json(*delta) : json(selected_delta(M, lambda_slack))},
            {"box", b},
            {"grid", {{"nx", nx}, {"nt", nt}, {"T", T}}},
            {"schedule", sched},
            {"seeds", seeds},
            {"out_dir", out_dir},
            {"inverse_trials", inverse_trials},
            {"dump_fields", dump_fields},
            {"stitch", stitch.to_json()}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  require(j.is_object(), "top level must be an object");
  reject_unknown(j,
                 {"name", "dim", "initial", "M", "lambda_slack", "delta", "box", "grid", "schedule",
                  "seeds", "out_dir", "inverse_trials", "dump_fields", "stitch"},
                 "config");
  RunConfig c;
  try {
    c.name = j.value("name", c.name);
    c.dim = j.value("dim", c.dim);
    if (j.contains("initial")) c.initial = j["initial"];
    c.M = j.value("M", c.M);
    c.lambda_slack = j.value("lambda_slack", c.lambda_slack);
    if (j.contains("delta")) c.delta = j["delta"].get<double>();
    if (j.contains("box"))
      for (const auto& iv : j["box"]) c.box.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      reject_unknown(g, {"nx", "nt", "T"}, "grid");
      c.nx = g.value("nx", c.nx);
      c.nt = g.value("nt", c.nt);
      c.T = g.value("T", c.T);
    }
    if (j.contains("schedule")) {
      c.schedule.clear();
      for (const auto& e : j["schedule"]) {
        if (e.is_array())
          c.schedule.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
        else
          c.schedule.push_back({e.at("eps").get<double>(), e.at("eta").get<double>()});
      }
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.out_dir = j.value("out_dir", c.out_dir);
    c.inverse_trials = j.value("inverse_trials", c.inverse_trials);
    c.dump_fields = j.value("dump_fields", c.dump_fields);
    if (j.contains("stitch")) c.stitch = stitch_from_json(j["stitch"]);
  } catch (const json::exception& e) {
    throw PreconditionError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw PreconditionError("config: cannot open " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw PreconditionError("config: " + path + ": " + e.what());
  }
  RunConfig c = RunConfig::from_json(j);
  if (c.initial.contains("file")) {
    fs::path f = c.initial["file"].get<std::string>();
    if (f.is_relative()) c.initial["file"] = (fs::path(path).parent_path() / f).string();
  }
  return c;
}

RunResult run_experiment(const RunConfig& cfg) {
  cfg.validate();
  RunResult res;
  const auto t_start = std::chrono::steady_clock::now();
  const fs::path out = cfg.out_dir;
  fs::create_directories(out);
  json& man = res.manifest;
  man["config"] = cfg.to_json();
  json certs = json::array();
  json timing;
  auto cert = [&](const std::string& name, bool ok, json detail) {
    certs.push_back({{"name", name}, {"passed", ok}, {"detail", std::move(detail)}});
    if (!ok && res.failed_certificate.empty()) res.failed_certificate = name;
  };
  auto finish = [&]() -> RunResult {
    man["certificates"] = certs;
    man["timing"] = timing;
    res.exit_code = res.failed_certificate.empty() ? 0 : 1;
    man["exit_code"] = res.exit_code;
    write_text(out / "manifest.json", man.dump(2));
    if (res.exit_code) {
      json fail = {{"certificate", res.failed_certificate}};
      for (const auto& c : certs)
        if (c["name"] == res.failed_certificate) fail["detail"] = c["detail"];
      write_text(out / "failure.json", fail.dump(2));
    } else if (fs::exists(out / "failure.json")) {
      fs::remove(out / "failure.json");
    }
    return res;
  };

  const GridSpec grid = cfg.grid();
  FluxProfile prof;
  try {
    prof = build_profile(cfg.M, cfg.lambda_slack, cfg.dim);
  } catch (const std::exception& e) {
    cert("profile", false, e.what());
    return finish();
  }
  man["profile"] = prof.to_json();

  ScalarField u0 = cfg.initial.contains("file")
                       ? read_initial_slice(cfg.initial["file"].get<std::string>(), grid)
                       : sample_initial_datum(cfg.initial, slice_grid(grid));
  const double g0 = slice_max_gradient(u0);
  const double h = grid.hmin();
  man["initial_max_gradient"] = g0;
  cert("initial_gradient", g0 <= cfg.M + 10 * h,
       {{"max_gradient", g0}, {"M", cfg.M}, {"tolerance", 10 * h}});
  if (!res.failed_certificate.empty()) return finish();

  auto t0 = std::chrono::steady_clock::now();
  std::shared_ptr<BoundaryDatum> datum;
  try {
    datum = std::make_shared<BoundaryDatum>(build_boundary_datum(u0, prof, grid));
  } catch (const std::exception& e) {
    cert("boundary_datum", false, e.what());
    return finish();
  }
  timing["datum_seconds"] = seconds_since(t0);
  auto mp = check_gradient_max_principle(datum->u_star);
  double mass_drift = 0;
  for (const auto& d : datum->diagnostics)
    mass_drift = std::max(mass_drift, std::fabs(d.mass - datum->diagnostics.front().mass));
  man["datum"] = {{"M", datum->M},
                  {"mu", datum->mu},
                  {"div_defect", datum->div_defect},
                  {"normal_trace", datum->normal_trace},
                  {"grad_ratio", datum->grad_ratio},
                  {"violating_fraction", datum->violating_fraction},
                  {"max_principle_ratio", mp.ratio},
                  {"mass_drift", mass_drift}};
  write_text(out / "datum_diagnostics.csv", diagnostics_csv(datum->diagnostics));
  cert("max_principle", mp.passed, {{"ratio", mp.ratio}, {"bound", 1 + 10 * mp.h}});
  cert("mass", mass_drift <= 1e-12 * std::max(1.0, u0.max_abs()), {{"drift", mass_drift}});
  cert("datum_membership", datum->violating_fraction <= 0.01,
       {{"violating_fraction", datum->violating_fraction}});

  StitchOptions opt = cfg.stitch;
  if (opt.inverse_constant <= 0) {
    t0 = std::chrono::steady_clock::now();
    opt.inverse_constant = measure_inverse_constant(BoxDomain::unit(cfg.dim), cfg.inverse_trials).constant;
    timing["inverse_constant_seconds"] = seconds_since(t0);
  }
  man["constants"] = {{"inverse_constant", opt.inverse_constant},
                      {"delta", prof.delta},
                      {"m_minus", prof.m_minus},
                      {"m_plus", prof.m_plus},
                      {"mu", datum->mu}};
  const double grad_bound = cfg.M >= 1 ? cfg.M + cfg.lambda_slack + 10 * h : prof.m_plus + 10 * h;
  const auto catalog = test_catalog(cfg.dim);

  json runs = json::array();
  std::vector<AdmissiblePair> finals;
  std::vector<bool> outcomes;
  for (std::uint64_t seed : cfg.seeds) {
    opt.seed = seed;
    const fs::path dir = out / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    t0 = std::chrono::steady_clock::now();
    std::vector<StepReport> reps;
    auto seq = iterate(datum, prof, cfg.schedule, opt, &reps);
    timing["seed_" + std::to_string(seed) + "_seconds"] = seconds_since(t0);
    const std::string tag = "seed " + std::to_string(seed);

    AdmissiblePair first = initial_pair(datum, prof);
    std::vector<double> weak;
    json wj = json::array();
    auto wf0 = weak_form_residual(first, catalog);
    weak.push_back(wf0.max_residual);
    wj.push_back(wf0.to_json());
    if (cfg.dump_fields) dump(dir, 0, first);
    bool all_ok = true;
    for (std::size_t j = 0; j < seq.size(); ++j) {
      auto wf = weak_form_residual(seq[j], catalog);
      weak.push_back(wf.max_residual);
      wj.push_back(wf.to_json());
      if (cfg.dump_fields) dump(dir, static_cast<int>(j + 1), seq[j]);
      const auto& r = reps[j];
      const std::string st = tag + " step " + std::to_string(j + 1);
      bool ok = r.contract_ok && r.audit_ok && wf.within_bound && r.admissible.max_grad <= grad_bound;
      all_ok = all_ok && ok;
      cert(st + " residual", r.residual_out <= r.eps, {{"residual", r.residual_out}, {"eps", r.eps}});
      cert(st + " sup change", r.sup_change < r.eta, {{"sup_change", r.sup_change}, {"eta", r.eta}});
      cert(st + " admissible", r.admissible.ok, r.admissible.to_json());
      cert(st + " audit", r.audit_ok, {{"I1", r.I1}, {"I2", r.I2}, {"I3", r.I3}, {"eps", r.eps}});
      cert(st + " gradient bound", r.admissible.max_grad <= grad_bound,
           {{"max_grad", r.admissible.max_grad}, {"bound", grad_bound}});
      cert(st + " weak form", wf.within_bound,
           {{"weak_residual", wf.max_residual}, {"bound", wf.bound}});
    }
    const bool complete = seq.size() == cfg.schedule.size();
    all_ok = all_ok && complete;
    cert(tag + " schedule complete", complete,
         {{"steps_done", seq.size()}, {"steps_planned", cfg.schedule.size()}});
    write_text(dir / "steps.csv", steps_csv(reps, weak));
    json patches = json::array();
    if (!seq.empty())
      for (const auto& rec : seq.back().patches) patches.push_back(rec.to_json());
    write_text(dir / "patches.json", patches.dump(1));
    json steps = json::array();
    for (const auto& r : reps) steps.push_back(r.to_json());
    runs.push_back({{"seed", seed},
                    {"steps", steps},
                    {"weak_form", wj},
                    {"final_residual", seq.empty() ? residual(first) : residual(seq.back())},
                    {"all_certificates", all_ok}});
    finals.push_back(seq.empty() ? first : seq.back());
    outcomes.push_back(all_ok);
  }
  man["runs"] = runs;

  if (finals.size() >= 2) {
    json pairs = json::array();
    const double eta = cfg.schedule.back().eta;
    for (std::size_t a = 0; a < finals.size(); ++a)
      for (std::size_t b = a + 1; b < finals.size(); ++b) {
        double d = 0;
        for (std::size_t i = 0; i < finals[a].u.values.size(); ++i)
          d = std::max(d, std::fabs(finals[a].u.values[i] - finals[b].u.values[i]));
        pairs.push_back({{"seeds", {cfg.seeds[a], cfg.seeds[b]}},
                         {"sup_difference", d},
                         {"ten_eta", 10 * eta},
                         {"meets_ten_eta", d >= 10 * eta},
                         {"same_outcomes", outcomes[a] == outcomes[b]}});
      }
    man["non_uniqueness"] = pairs;
  }
  timing["total_seconds"] = seconds_since(t_start);
  return finish();
}

}  // namespace cvxint
