#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "scaffopt/config.hpp"
#include "scaffopt/driver.hpp"
#include "scaffopt/toml.hpp"

namespace {

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const scaffopt::toml::ParseError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& err) {
    std::cerr << "invalid argument: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-phase periodic microstructure optimization"};
  app.require_subcommand(1);

  std::string config_path;
  std::string field_path;
  int tile = 1;
  bool von_mises = false;
  std::string vm_config;
  std::string out_dir;
  bool no_resume = false;

  auto* optimize = app.add_subcommand("optimize", "Run the full continuation optimization");
  optimize->add_option("config", config_path, "experiment config file")->required();
  optimize->add_flag("--no-resume", no_resume, "ignore existing checkpoints");

  auto* evaluate = app.add_subcommand("evaluate", "Effective table for a stored field");
  evaluate->add_option("config", config_path, "experiment config file")->required();
  evaluate->add_option("field", field_path, "field file (VTK)")->required();

  auto* exporter = app.add_subcommand("export", "Re-export a stored field");
  exporter->add_option("field", field_path, "field file (VTK)")->required();
  exporter->add_option("--tile", tile, "periodic tiling factor")->check(CLI::PositiveNumber);
  exporter->add_flag("--von-mises", von_mises, "also export von Mises stress fields");
  exporter->add_option("--config", vm_config, "config providing materials and loads");
  exporter->add_option("--out", out_dir, "output directory (defaults to the field's)");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  gradcheck->add_option("config", config_path, "experiment config file")->required();

  CLI11_PARSE(app, argc, argv);

  if (optimize->parsed()) {
    return guarded([&] {
      scaffopt::ExperimentConfig cfg = scaffopt::parse_config_file(config_path);
      if (no_resume) {
        // a fresh seed directory is simpler than checkpoint surgery
        for (const auto& [label, entry] : scaffopt::expand_sweep(cfg)) {
          (void)label;
          namespace fs = std::filesystem;
          if (fs::exists(entry.output_dir)) {
            for (const auto& item : fs::directory_iterator(entry.output_dir)) {
              const std::string name = item.path().filename().string();
              if (name.rfind("checkpoint_", 0) == 0) fs::remove(item.path());
            }
          }
        }
      }
      scaffopt::run_optimize_all(cfg, &std::cout);
    });
  }
  if (evaluate->parsed()) {
    return guarded([&] {
      scaffopt::ExperimentConfig cfg = scaffopt::parse_config_file(config_path);
      scaffopt::run_evaluate(cfg, field_path, &std::cout);
    });
  }
  if (exporter->parsed()) {
    return guarded([&] {
      scaffopt::ExportOptions options;
      options.tile = tile;
      options.von_mises = von_mises;
      options.output_dir = out_dir;
      if (!vm_config.empty()) options.config = scaffopt::parse_config_file(vm_config);
      scaffopt::run_export(field_path, options, &std::cout);
    });
  }
  if (gradcheck->parsed()) {
    int rc = guarded([&] {
      scaffopt::ExperimentConfig cfg = scaffopt::parse_config_file(config_path);
      scaffopt::GradCheckReport report = scaffopt::run_gradcheck(cfg, &std::cout);
      if (!(report.max_rel_error <= 1e-4)) {
        throw std::runtime_error("gradient check failed the 1e-4 bound");
      }
    });
    return rc;
  }
  return 0;
}
