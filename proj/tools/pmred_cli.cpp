// pmred: command-line front end for the PM reduction pipelines.
//
//   pmred <subcommand> [--preset fig1|fig2|fig3] [--config PATH] [--seed N] [--out DIR]
//                      [--variant nonmarkov|averaged] [--threads K] [--dump-noise LO:HI]
//   pmred replay MANIFEST [--out DIR] [--threads K]
//   pmred show-config [...same config flags...]
//
// Every flag can also come from the environment: PMRED_CONFIG, PMRED_SEED, PMRED_OUT,
// PMRED_PRESET, PMRED_VARIANT, PMRED_THREADS, PMRED_DUMP_NOISE. Flags win over variables.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pmred/app.hpp"
#include "pmred/config.hpp"
#include "pmred/version.hpp"

namespace {

struct Flags {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string variant;
  int threads = 1;
  std::string dump_noise;
};

void add_config_flags(CLI::App& app, Flags& f) {
  app.add_option("--config", f.config, "TOML config file, or a manifest.json to reuse its config")->envname("PMRED_CONFIG");
  app.add_option("--preset", f.preset, "start from a figure preset")
      ->check(CLI::IsMember({"fig1", "fig2", "fig3"}))
      ->envname("PMRED_PRESET");
  app.add_option("--seed", f.seed, "override noise.seed")->envname("PMRED_SEED");
  app.add_option("--variant", f.variant, "override experiment.variant")
      ->check(CLI::IsMember({"nonmarkov", "averaged"}))
      ->envname("PMRED_VARIANT");
}

void add_run_flags(CLI::App& app, Flags& f) {
  app.add_option("--out", f.out, "output directory (default: experiment.output_dir)")->envname("PMRED_OUT");
  app.add_option("--threads", f.threads, "worker threads for sweeps and paired runs")
      ->check(CLI::PositiveNumber)
      ->envname("PMRED_THREADS");
}

pmred::RunConfig resolve_config(const Flags& f) {
  pmred::RunConfig cfg = pmred::preset(f.preset.empty() ? "fig1" : f.preset);
  if (!f.config.empty()) {
    const std::filesystem::path p(f.config);
    if (p.extension() == ".json")
      cfg = pmred::read_manifest(p).config;
    else
      cfg = pmred::parse_config(pmred::read_text(p), f.preset.empty() ? pmred::RunConfig{} : cfg);
  }
  if (f.seed) cfg.noise.seed = *f.seed;
  if (!f.variant.empty()) cfg.experiment.variant = pmred::parse_variant(f.variant);
  return cfg;
}

std::optional<pmred::NoiseDump> parse_dump(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw pmred::ConfigInvalid("dump-noise", "expected LO:HI");
  try {
    return pmred::NoiseDump{std::stoll(s.substr(0, colon)), std::stoll(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw pmred::ConfigInvalid("dump-noise", "expected integer bounds LO:HI, got '" + s + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic parameterizing-manifold reduction of the Burgers equation"};
  app.set_version_flag("--version", pmred::kVersion);
  app.require_subcommand(1);

  Flags flags;
  std::string active;
  const std::map<std::string, std::string> about{
      {"check-nr", "check the non-resonance conditions and list every gap"},
      {"simulate-spde", "integrate the Galerkin-truncated SPDE"},
      {"simulate-reduced", "integrate the reduced system of the configured variant"},
      {"defect", "parameterization defect Q(T) of the pullback manifold"},
      {"defect-sweep", "time-averaged defect over a (lambda, sigma) grid"},
      {"pdf", "PDFs and bimodality of the SPDE low-mode amplitudes"},
      {"reconstruct", "reduced-model field versus SPDE field, and the f_5^10 fraction"},
      {"compare", "paired SPDE, non-Markovian and averaged runs with PDF distances"},
      {"pm-table", "pullback, analytic and averaged manifold values on a xi grid"},
  };
  for (const auto& name : pmred::subcommands()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    add_config_flags(*sub, flags);
    add_run_flags(*sub, flags);
    sub->add_option("--dump-noise", flags.dump_noise, "also write increments k in [LO, HI) to noise_window.csv")
        ->envname("PMRED_DUMP_NOISE");
    sub->callback([&active, name] { active = name; });
  }
  std::string manifest;
  auto* replay = app.add_subcommand("replay", "re-run the subcommand recorded in a manifest");
  replay->add_option("manifest", manifest, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);
  add_run_flags(*replay, flags);
  replay->callback([&active] { active = "replay"; });

  auto* show = app.add_subcommand("show-config", "print the resolved canonical config");
  add_config_flags(*show, flags);
  show->callback([&active] { active = "show-config"; });

  CLI11_PARSE(app, argc, argv);

  try {
    if (active == "show-config") {
      const auto cfg = resolve_config(flags);
      cfg.validate();
      std::cout << pmred::to_toml(cfg);
      return 0;
    }
    pmred::RunOptions opts;
    opts.threads = flags.threads;
    if (!flags.out.empty()) opts.out = flags.out;
    if (active == "replay") {
      auto rec = pmred::read_manifest(manifest);
      opts.dump_noise = rec.dump_noise;
      if (opts.out.empty()) opts.out = std::filesystem::path(manifest).parent_path() / "replay";
      return pmred::run(rec.subcommand, rec.config, opts, std::cout);
    }
    const auto cfg = resolve_config(flags);
    opts.dump_noise = parse_dump(flags.dump_noise);
    return pmred::run(active, cfg, opts, std::cout);
  } catch (const pmred::ConfigInvalid& e) {
    std::cerr << "pmred " << active << ": invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pmred " << active << ": " << e.what() << "\n";
    return 1;
  }
}
