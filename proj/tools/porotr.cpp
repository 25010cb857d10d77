// Command-line entry point: porotr {forward|reconstruct|verify} --config <path>

#include <CLI11.hpp>

#include "porotr/runners.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Poroelastic time-reversal reconstruction"};
  app.require_subcommand(1);

  porotr::RunOptions opt;
  std::string out;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "seed for randomized suites (overrides seed)");
    sub->add_flag("--quiet", opt.quiet, "suppress progress output");
  };
  CLI::App* fwd = app.add_subcommand("forward", "simulate and record the boundary trace");
  CLI::App* rec = app.add_subcommand("reconstruct", "invert a trace by the Neumann series");
  CLI::App* ver = app.add_subcommand("verify", "run the property suites");
  for (CLI::App* s : {fwd, rec, ver}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : porotr::kConfigError;
  }
  for (CLI::App* s : {fwd, rec, ver}) {
    if (s->count("--out")) opt.out = out;
    if (s->count("--seed")) opt.seed = seed;
  }
  if (fwd->parsed()) return porotr::run_forward(opt);
  if (rec->parsed()) return porotr::run_reconstruct(opt);
  return porotr::run_verify(opt);
}
