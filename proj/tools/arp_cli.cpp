#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "arp/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config, "preset name or path to a JSON config")->required();
  sub->add_option("-s,--seed", c.seed, "replace the config's seeds with children of this seed");
  sub->add_option("-o,--out", c.out, "output directory (overrides the config)");
  sub->add_flag("-q,--quiet", c.quiet, "no progress messages");
}

int run(const Common& c, unsigned stages) {
  arp::ExperimentConfig cfg = arp::load_config(c.config);
  if (c.seed) arp::override_seed(cfg, *c.seed);
  if (!c.out.empty()) cfg.output = c.out;
  arp::PipelineOptions opt;
  opt.stages = stages;
  if (!c.quiet) opt.progress = [](const std::string& m) { std::cerr << "  " << m << "\n"; };
  const arp::Report report = arp::run_pipeline(cfg, opt);
  std::cout << report.to_csv();
  if (!c.quiet) std::cerr << "wrote " << cfg.output << "/report.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retroreflective patch attack simulator"};
  app.require_subcommand(1);

  struct Cmd {
    const char* name;
    const char* help;
    unsigned stages;
  };
  const Cmd cmds[] = {
      {"render", "render benign and fixed-patch scenes", arp::kStageRender},
      {"fit-roughness", "fit roughness to observed night colors", arp::kStageFit},
      {"optimize", "search patch placements", arp::kStageOptimize},
      {"evaluate", "search, then measure attack success", arp::kStageOptimize | arp::kStageEvaluate},
      {"defend", "search, measure, then apply polarization filters",
       arp::kStageOptimize | arp::kStageEvaluate | arp::kStageDefend},
      {"report", "every stage, including the geometric analyses", arp::kStageAll},
  };
  Common common;
  unsigned stages = 0;
  for (const auto& cmd : cmds) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    add_common(sub, common);
    sub->callback([&stages, s = cmd.stages] { stages = s; });
  }

  bool write_presets = false;
  std::string preset_dir = "configs";
  CLI::App* presets = app.add_subcommand("presets", "list the built-in presets or write them as JSON files");
  presets->add_flag("-w,--write", write_presets, "write <name>.json for every preset");
  presets->add_option("-d,--dir", preset_dir, "directory for --write");

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets->parsed()) {
      for (const auto& n : arp::preset_names()) {
        if (!write_presets) {
          std::cout << n << "\n";
          continue;
        }
        std::filesystem::create_directories(preset_dir);
        const auto path = std::filesystem::path(preset_dir) / (n + ".json");
        std::ofstream(path) << arp::preset_json(n).dump(2) << "\n";
        std::cout << path.string() << "\n";
      }
      return 0;
    }
    return run(common, stages);
  } catch (const arp::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const arp::StageError& e) {
    std::cerr << "error in stage " << e.stage() << ": " << e.what() << "\n";
    return 3;
  } catch (const arp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
