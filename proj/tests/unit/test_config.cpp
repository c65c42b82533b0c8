#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "pmred/app.hpp"
#include "pmred/config.hpp"

using namespace pmred;

namespace {

std::string invalid_field(std::string_view text) {
  try {
    parse_config(text).validate();
  } catch (const ConfigInvalid& e) {
    return e.field();
  }
  return "";
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("pmred_test_config_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Presets, RegimeValues) {
  const auto f1 = preset("fig1").params();
  EXPECT_NEAR(f1.length, 7.0 * std::numbers::pi, 1e-12);
  EXPECT_NEAR(f1.lambda, 1.7 * f1.lambda_c(), 1e-15);
  EXPECT_EQ(f1.n_noise, 10);
  for (double s : f1.sigma) EXPECT_EQ(s, 3.0);
  for (const char* name : {"fig2", "fig3"}) {
    const auto p = preset(name).params();
    EXPECT_NEAR(p.length, 3.5 * std::numbers::pi, 1e-12);
    EXPECT_NEAR(p.lambda, 1.7 * p.lambda_c(), 1e-15);
    for (double s : p.sigma) EXPECT_EQ(s, 1.5);
  }
  EXPECT_EQ(preset("fig3").numerics.t_end, 2000.0);
  EXPECT_THROW(preset("fig9"), ConfigInvalid);
}

TEST(Presets, FilesMatchEmbeddedText) {
  for (const auto& name : preset_names()) {
    const auto path = std::filesystem::path(PMRED_SOURCE_DIR) / "presets" / (name + ".toml");
    EXPECT_EQ(read_text(path), preset_text(name)) << name;
    EXPECT_NO_THROW(preset(name).validate());
  }
}

TEST(Toml, CanonicalRoundTrip) {
  for (const auto& name : preset_names()) {
    const auto cfg = preset(name);
    const auto text = to_toml(cfg);
    const auto again = parse_config(text);
    EXPECT_EQ(to_toml(again), text);
    EXPECT_EQ(config_hash(again), config_hash(cfg));
  }
  auto odd = preset("fig1");
  odd.model.lambda_ratio.reset();
  odd.model.lambda = 0.1 + 0.2;
  odd.model.sigma = {1.0, 0.1, 1e-300, 2.5, 3.0, 0.0, 1.0, 1.0, 1.0, 7.25};
  odd.model.u0 = {0.3, -1.0 / 3.0};
  const auto back = parse_config(to_toml(odd));
  EXPECT_EQ(*back.model.lambda, 0.1 + 0.2);
  EXPECT_EQ(back.model.sigma, odd.model.sigma);
  EXPECT_EQ(back.model.u0, odd.model.u0);
}

TEST(Toml, ParsesCommentsListsAndBooleans) {
  const auto t = parse_toml("# header\n[a]\nx = 1.5 # trailing\ny = [1, 2,3]\nz = true\ns = \"a#b\"\n");
  EXPECT_EQ(std::get<double>(t.at("a.x")), 1.5);
  EXPECT_EQ(std::get<std::vector<double>>(t.at("a.y")), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(std::get<bool>(t.at("a.z")), true);
  EXPECT_EQ(std::get<std::string>(t.at("a.s")), "a#b");
  EXPECT_THROW(parse_toml("[a]\nx = \n"), ConfigInvalid);
  EXPECT_THROW(parse_toml("[a]\nx = 1\nx = 2\n"), ConfigInvalid);
}

TEST(Validation, NamesTheOffendingField) {
  EXPECT_EQ(invalid_field("[model]\nlambda_ratio = 1.7\n[numerics]\nt_end = 10.005\n"), "numerics.t_end");
  EXPECT_EQ(invalid_field("[model]\nlambda_ratio = 1.7\nlambda = 0.1\n"), "model.lambda");
  EXPECT_EQ(invalid_field("[model]\n"), "model.lambda");
  EXPECT_EQ(invalid_field("[model]\nlambda_ratio = 1.7\nsigma = [1, 2]\n"), "model.sigma");
  EXPECT_EQ(invalid_field("[model]\nlambda_ratio = 1.7\nnu = 0\n"), "model.nu");
  EXPECT_EQ(invalid_field("[model]\nlambda_ratio = 1.7\n[experiment]\nvariant = \"fast\"\n"), "experiment.variant");
  EXPECT_EQ(invalid_field("[model]\nlambda_ratio = 1.7\nbogus = 1\n"), "model.bogus");
  EXPECT_EQ(invalid_field("[model]\nlambda_ratio = 1.7\n[numerics]\nt1 = 500\nt2 = 400\n"), "numerics.t2");
  EXPECT_EQ(invalid_field("[model]\nlambda_ratio = 1.7\n"), "");
}

TEST(ConfigHash, SeedMattersOutputDirDoesNot) {
  auto a = preset("fig1");
  auto b = a;
  b.experiment.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.noise.seed = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(App, CheckNrWritesManifestAndReplays) {
  const auto dir = scratch("nr");
  std::ostringstream log;
  RunOptions opts;
  opts.out = dir / "first";
  const auto cfg = preset("fig1");
  EXPECT_EQ(run("check-nr", cfg, opts, log), 0);
  EXPECT_NE(log.str().find("non-resonance: satisfied"), std::string::npos);
  const auto manifest = opts.out / "manifest.json";
  ASSERT_TRUE(std::filesystem::exists(manifest));
  const auto rec = read_manifest(manifest);
  EXPECT_EQ(rec.subcommand, "check-nr");
  EXPECT_EQ(config_hash(rec.config), config_hash(cfg));

  RunOptions again;
  again.out = dir / "replay";
  EXPECT_EQ(run(rec.subcommand, rec.config, again, log), 0);
  for (const char* f : {"nr_gaps.csv", "nr.json", "manifest.json"})
    EXPECT_EQ(read_text(opts.out / f), read_text(again.out / f)) << f;
  std::filesystem::remove_all(dir);
}

TEST(App, ViolatedNonResonanceExitsWithThree) {
  const auto dir = scratch("violated");
  auto cfg = preset("fig1");
  cfg.model.lambda_ratio = -20.0;
  std::ostringstream log;
  RunOptions opts;
  opts.out = dir;
  EXPECT_EQ(run("check-nr", cfg, opts, log), 3);
  std::filesystem::remove_all(dir);
}

TEST(App, UnknownSubcommandRejected) {
  std::ostringstream log;
  RunOptions opts;
  opts.out = scratch("unknown");
  EXPECT_THROW(run("frobnicate", preset("fig1"), opts, log), ConfigInvalid);
}

TEST(App, ParallelForVisitsEveryIndexOnce) {
  std::vector<int> hits(103, 0);
  parallel_for(hits.size(), 4, [&](std::size_t j) { hits[j] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
}
