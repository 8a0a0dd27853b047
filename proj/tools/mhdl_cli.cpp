// Command line front end. Exit codes: 0 ok, 1 config, 2 Taylor violation,
// 3 solver failure.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mhdl/mhdl.hpp"

namespace {

int with_config(const std::string& path, const std::function<int(const mhdl::RunConfig&)>& body) {
  mhdl::RunConfig cfg;
  try {
    cfg = mhdl::load_config(path);
  } catch (const mhdl::ConfigError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return mhdl::exit_config;
  }
  try {
    return body(cfg);
  } catch (const mhdl::TaylorViolation& e) {
    std::cerr << "aborted at t=" << mhdl::format_double(e.t()) << ": " << e.what() << "\n";
    return mhdl::exit_taylor;
  } catch (const mhdl::ConfigError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return mhdl::exit_config;
  } catch (const std::invalid_argument& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return mhdl::exit_config;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return mhdl::exit_solver;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lagrangian free-boundary MHD simulator and verification harness"};
  app.require_subcommand(1);

  std::string run_cfg;
  auto* run = app.add_subcommand("run", "integrate the configured problem, writing series and snapshots");
  run->add_option("config", run_cfg, "config file")->required();

  std::string study_kind, study_cfg;
  auto* study = app.add_subcommand("study", "parameter study; writes the report CSV");
  study->add_option("kind", study_kind, "dt-convergence | kappa-sweep | eps-sweep | contraction")
      ->required()
      ->check(CLI::IsMember({"dt-convergence", "kappa-sweep", "eps-sweep", "contraction"}));
  study->add_option("config", study_cfg, "config file")->required();

  std::string lemma_cfg;
  auto* lemma = app.add_subcommand("lemma-harness", "empirical ratios of the product and commutator lemmas");
  lemma->add_option("config", lemma_cfg, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mhdl::exit_config;
  }

  if (*run)
    return with_config(run_cfg, [](const mhdl::RunConfig& c) { return mhdl::run(c, std::cout).exit_code; });
  if (*study)
    return with_config(study_cfg, [&](const mhdl::RunConfig& c) {
      const auto rows = mhdl::study(study_kind, c, std::cout);
      mhdl::write_study(rows, study_kind, c.report);
      for (const auto& r : rows)
        std::cout << r.quantity << " " << mhdl::format_double(r.param) << " " << mhdl::format_double(r.value)
                  << " order " << mhdl::format_double(r.order) << "\n";
      return int(mhdl::exit_ok);
    });
  return with_config(lemma_cfg, [](const mhdl::RunConfig& c) {
    for (const auto& r : mhdl::lemma_report(c, c.report))
      std::cout << r.lemma_id << " " << mhdl::format_double(r.empirical_ratio) << "\n";
    return int(mhdl::exit_ok);
  });
}
