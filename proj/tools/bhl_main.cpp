#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bhl/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"bhl: balanced-environment random walks, non-divergence form solvers, "
               "and homogenization rate experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_override;
  auto* run = app.add_subcommand("run", "execute the experiment described by a config file");
  run->add_option("config", config_path, "config file path")->required();
  run->add_option("--out", output_override, "override the output directory");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a config file without computing");
  validate->add_option("config", validate_path, "config file path")->required();

  std::string report_dir;
  auto* report = app.add_subcommand("report", "re-render the summary of a finished run");
  report->add_option("run_dir", report_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    const bhl::RunOutcome outcome = bhl::run_config_file(config_path, output_override, &std::cout);
    if (outcome.exit_code == 1) std::cerr << "error: " << outcome.message << "\n";
    return outcome.exit_code;
  }
  if (validate->parsed()) {
    const bhl::ValidationReport rep = bhl::validate_config_file(validate_path);
    if (rep.ok) {
      std::cout << "ok\n";
      return 0;
    }
    for (const auto& e : rep.errors) std::cerr << "error: " << e << "\n";
    return 1;
  }
  return bhl::report_run_dir(report_dir, std::cout);
}
