#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "cvxint/experiment.hpp"
#include "cvxint/field_io.hpp"
#include "cvxint/verify.hpp"

using namespace cvxint;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("cvxint_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

RunConfig tiny_config(const fs::path& out) {
  RunConfig c;
  c.name = "tiny";
  c.nx = 48;
  c.nt = 48;
  c.seeds = {1, 2};
  c.inverse_trials = 4;
  c.out_dir = out.string();
  return c;
}

}  // namespace

TEST(Config, RoundTrip) {
  RunConfig c;
  c.nx = 65;
  c.seeds = {3, 4};
  c.schedule = {{0.4, 0.3}};
  auto back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
}

TEST(Config, RejectsBadInput) {
  auto j = RunConfig().to_json();
  j["colour"] = 1;
  EXPECT_THROW(RunConfig::from_json(j), PreconditionError);
  auto k = RunConfig().to_json();
  k["delta"] = 0.7;
  EXPECT_THROW(RunConfig::from_json(k).validate(), PreconditionError);
  auto l = RunConfig().to_json();
  l["delta"] = 0.3;  // in range but not the selected value for M = 2
  EXPECT_THROW(RunConfig::from_json(l).validate(), PreconditionError);
}

TEST(Config, ShippedConfigsValidate) {
  const char* dir = std::getenv("CVXINT_CONFIG_DIR");
  if (!dir) GTEST_SKIP() << "CVXINT_CONFIG_DIR not set";
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    auto c = load_config(e.path().string());
    EXPECT_NO_THROW(c.validate()) << e.path();
    ++n;
  }
  EXPECT_GE(n, 3);
}

TEST(FieldIO, RoundTrip) {
  auto dir = temp_dir("io");
  GridSpec g;
  g.box = BoxDomain::unit(2);
  g.nx = 9;
  g.nt = 3;
  g.T = 0.5;
  ScalarField s(g);
  for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = 0.1 * i - 3;
  write_field((dir / "s.bin").string(), s, 4);
  EXPECT_EQ(fs::file_size(dir / "s.bin"), 64 + 8 * s.values.size());
  auto f = read_field((dir / "s.bin").string());
  EXPECT_EQ(f.values, s.values);
  EXPECT_EQ(f.header.iteration, 4);
  EXPECT_EQ(f.header.nx, 9);
  EXPECT_EQ(f.grid().nt, 3);
  VectorField v(g, 2);
  write_field((dir / "v.bin").string(), v);
  EXPECT_EQ(read_field((dir / "v.bin").string()).header.ncomp, 2);
  std::ofstream((dir / "junk.bin").string()) << "not a field";
  EXPECT_ANY_THROW(read_field((dir / "junk.bin").string()));
}

TEST(Run, TinyConfigWritesOutputs) {
  auto dir = temp_dir("run");
  auto res = run_experiment(tiny_config(dir));
  EXPECT_EQ(res.exit_code, 0) << res.failed_certificate;
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_FALSE(fs::exists(dir / "failure.json"));
  for (const char* f : {"steps.csv", "patches.json", "iter_0_u.bin", "iter_1_vt.bin"})
    EXPECT_TRUE(fs::exists(dir / "seed_1" / f)) << f;
  auto man = read_json(dir / "manifest.json");
  EXPECT_EQ(man["exit_code"], 0);
  ASSERT_TRUE(man.contains("non_uniqueness"));
  EXPECT_TRUE(man["non_uniqueness"][0]["same_outcomes"].get<bool>());
}

TEST(Run, SteepDatumFailsWithCertificate) {
  auto dir = temp_dir("steep");
  auto c = tiny_config(dir);
  c.initial = {{"name", "cosine"}, {"amplitude", 1.5}};
  auto res = run_experiment(c);
  EXPECT_EQ(res.exit_code, 1);
  EXPECT_EQ(res.failed_certificate, "initial_gradient");
  auto fail = read_json(dir / "failure.json");
  EXPECT_EQ(fail["certificate"], "initial_gradient");
}

TEST(Verify, QuickPassesAndIsDeterministic) {
  auto a = verify_suite("quick", 7);
  EXPECT_TRUE(a.passed()) << a.table();
  auto b = verify_suite("quick", 7);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].passed, b.rows[i].passed);
    EXPECT_EQ(a.rows[i].detail, b.rows[i].detail);
  }
  EXPECT_THROW(verify_suite("medium", 1), PreconditionError);
}
