// fedfim command-line entry point.
//
//   fedfim run <config.json> [--set key=value]... [--out dir]
//   fedfim compare <table.json> [--out dir]
//   fedfim validate <config.json> [--set key=value]...
//   fedfim keys

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedfim/config.hpp"
#include "fedfim/error.hpp"
#include "fedfim/harness.hpp"

namespace {

fedfim::ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides,
                              const std::string& out) {
  fedfim::ExperimentConfig cfg = fedfim::parse_config_file(path);
  for (const auto& o : overrides) fedfim::apply_override(cfg, o);
  if (!out.empty()) cfg.output_dir = out;
  fedfim::validate_config(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated FIM-L-BFGS and FedOVA experiment runner"};
  app.require_subcommand(1);

  std::string config_path, table_path, out_dir;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "Run an experiment config over its seeds");
  run->add_option("config", config_path, "JSON config file")->required();
  run->add_option("--set", overrides, "Override a config key (key=value), repeatable");
  run->add_option("--out", out_dir, "Output directory (overrides output.dir)");

  auto* cmp = app.add_subcommand("compare", "Run a comparison table spec");
  cmp->add_option("table", table_path, "JSON table spec")->required();
  cmp->add_option("--out", out_dir, "Output directory (overrides base output.dir)");

  auto* val = app.add_subcommand("validate", "Validate a config and print the effective config");
  val->add_option("config", config_path, "JSON config file")->required();
  val->add_option("--set", overrides, "Override a config key (key=value), repeatable");

  auto* keys = app.add_subcommand("keys", "List every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? fedfim::exit_code::kOk : fedfim::exit_code::kConfig;
  }

  try {
    if (run->parsed()) {
      fedfim::run(load(config_path, overrides, out_dir), std::cout);
    } else if (cmp->parsed()) {
      fedfim::TableSpec spec = fedfim::parse_table_spec_file(table_path);
      if (!out_dir.empty()) spec.base.output_dir = out_dir;
      fedfim::compare_and_write(spec, std::cout);
    } else if (val->parsed()) {
      std::cout << fedfim::effective_config_json(load(config_path, overrides, out_dir)) << '\n';
    } else if (keys->parsed()) {
      for (const auto& k : fedfim::config_keys()) {
        std::printf("%-26s %-8s %-14s %s\n", k.key.c_str(), k.type.c_str(), k.default_value.c_str(),
                    k.description.c_str());
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "fedfim: " << e.what() << '\n';
    return fedfim::exit_code_for(e);
  }
  return fedfim::exit_code::kOk;
}
