#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "coagflux/config.hpp"
#include "coagflux/errors.hpp"
#include "coagflux/run.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  int workers = 0;
  long seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
  cmd->add_option("--workers", args.workers, "worker count for pair sums");
  cmd->add_option("--seed", args.seed, "rng seed recorded in the manifest");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"coagflux: self-similar constant-flux profiles of the "
               "coagulation equation"};
  app.require_subcommand(1);

  const char* commands[] = {"evolve",  "steady",  "cascade",
                            "picard",  "diagnose", "verify-characteristics"};
  CommonArgs args;
  for (const char* name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    add_common(sub, args);
  }

  CLI11_PARSE(app, argc, argv);

  const std::string chosen = app.get_subcommands().front()->get_name();
  try {
    coagflux::RunConfig cfg = coagflux::load_config(args.config_path);
    // The CLI subcommand wins over the command key in the file.
    for (auto cmd : {coagflux::Command::evolve, coagflux::Command::steady,
                     coagflux::Command::cascade, coagflux::Command::picard,
                     coagflux::Command::diagnose,
                     coagflux::Command::verify_characteristics}) {
      if (coagflux::command_name(cmd) == chosen) {
        if (cmd != cfg.command) {
          cfg.command = cmd;
          // re-validate under the actual command
          nlohmann::json doc = cfg.echo;
          doc["command"] = chosen;
          cfg = coagflux::parse_config(doc);
        }
        break;
      }
    }
    if (args.workers > 0) cfg.workers = args.workers;
    if (args.seed >= 0) cfg.seed = static_cast<unsigned long>(args.seed);
    const std::string out = args.out_dir.empty() ? cfg.out_dir : args.out_dir;
    const int code = coagflux::run(cfg, out);
    if (code != 0)
      std::fprintf(stderr, "coagflux %s: diagnostics band check failed\n",
                   chosen.c_str());
    return code;
  } catch (const coagflux::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const coagflux::DomainError& e) {
    std::fprintf(stderr, "domain error: %s\n", e.what());
    return 2;
  } catch (const coagflux::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
