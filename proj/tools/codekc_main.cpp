#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "codekc/errors.hpp"
#include "codekc/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"codekc: pattern-based knowledge component discovery from student code"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path = "codekc.toml";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool force = false;
  bool svg = false;
  app.add_option("--config", config_path, "pipeline config file (TOML-style)");
  app.add_option("--seed", seed, "master seed; re-derives every stage seed")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_flag("--force", force, "re-run stages even when their outputs exist");

  std::vector<std::pair<std::string, CLI::App*>> stages;
  for (const std::string& name : codekc::pipeline::stage_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " stage");
    if (name == "curves") sub->add_flag("--svg", svg, "also write curves.svg");
    stages.push_back({name, sub});
  }
  CLI::App* all = app.add_subcommand("all", "run the full pipeline");

  CLI11_PARSE(app, argc, argv);

  try {
    codekc::PipelineConfig config = codekc::PipelineConfig::load(config_path);
    if (seed_set) config.apply_master_seed(seed);
    if (svg) config.curves_svg = true;

    if (all->parsed()) {
      codekc::pipeline::run_all(config, force);
      return 0;
    }
    for (const auto& [name, sub] : stages) {
      if (sub->parsed()) {
        codekc::pipeline::run_stage(name, config, force);
        return 0;
      }
    }
    std::cerr << "no subcommand given\n";
    return 1;
  } catch (const codekc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const codekc::StageError& e) {
    std::cerr << "stage error: " << e.what() << "\n";
    return 3;
  } catch (const codekc::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const codekc::SyntaxError& e) {
    std::cerr << "syntax error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
