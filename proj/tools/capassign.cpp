// capassign: capacity-constrained treatment assignment from the command line.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "capassign/cli.hpp"
#include "capassign/error.hpp"
#include "capassign/kernels.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Capacity-constrained treatment assignment via optimal transport"};
  app.require_subcommand(1);

  capassign::cli::CommandOptions options;
  std::string config, out = ".", profile, backend = "auto";
  std::uint64_t seed = 0;
  std::size_t workers = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON config file");
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--profile", profile, "simulation preset")
        ->check(CLI::IsMember({"smoke", "desk", "paper"}));
    sub->add_option("--workers", workers, "worker threads for simulate (0 = all cores)");
    sub->add_option("--backend", backend, "kernel backend")
        ->check(CLI::IsMember({"auto", "scalar", "avx2"}))
        ->capture_default_str();
  };
  add_common(app.add_subcommand("fit", "Tobit maximum likelihood from a CSV dataset"));
  add_common(app.add_subcommand("assign", "plug-in / ex-post Bayes / oracle allocations"));
  add_common(app.add_subcommand("simulate", "local-asymptotic risk experiment"));
  add_common(app.add_subcommand("ot", "solve a transport problem from JSON"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : capassign::cli::kExitInput;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (!config.empty()) options.config = config;
  options.out = out;
  if (sub->count("--seed")) options.seed = seed;
  if (!profile.empty()) options.profile = profile;
  if (sub->count("--workers")) options.workers = workers;
  try {
    capassign::kernels::set_backend(capassign::kernels::parse_backend(backend));
  } catch (const capassign::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return capassign::cli::kExitInput;
  }
  return capassign::cli::run(sub->get_name(), options, std::cout, std::cerr);
}
