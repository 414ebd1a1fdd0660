#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mccf/commands.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  std::int64_t threads = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON configuration file");
  cmd->add_option("--out", flags.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", flags.seed, "RNG seed (overrides config)");
  cmd->add_option("--threads", flags.threads, "worker threads (overrides config)");
}

mccf::RunContext make_context(const CommonFlags& flags) {
  mccf::RunContext ctx;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw mccf::IoError("cannot open config file: " + flags.config_path);
    try {
      in >> ctx.config;
    } catch (const nlohmann::json::exception& e) {
      throw mccf::ParseError(flags.config_path + ": invalid JSON: " + e.what());
    }
  } else {
    ctx.config = mccf::Json::object();
  }
  // Flags win over config file values.
  ctx.out = !flags.out_dir.empty() ? flags.out_dir
                                   : ctx.config.value("out", std::string("."));
  ctx.seed = flags.seed >= 0 ? static_cast<std::uint64_t>(flags.seed)
                             : ctx.config.value("seed", std::uint64_t{0});
  ctx.threads = flags.threads > 0 ? static_cast<std::size_t>(flags.threads)
                                  : ctx.config.value("threads", mccf::default_threads());
  std::filesystem::create_directories(ctx.out);
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven car-following toolkit: train, calibrate, evaluate, simulate"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    void (*run)(const mccf::RunContext&);
  };
  const Sub subs[] = {
      {"ingest", "parse, preprocess and split a trajectory CSV", mccf::cmd_ingest},
      {"train", "train the Markov-chain car-following model", mccf::cmd_train},
      {"calibrate", "calibrate baseline models by differential evolution", mccf::cmd_calibrate},
      {"evaluate", "one-step/open-loop metrics and probability comparison", mccf::cmd_evaluate},
      {"simulate", "closed-loop ring-road experiments", mccf::cmd_simulate},
      {"gen", "generate a synthetic trajectory corpus", mccf::cmd_gen},
  };

  CommonFlags flags[std::size(subs)];
  CLI::App* cmds[std::size(subs)];
  for (std::size_t i = 0; i < std::size(subs); ++i) {
    cmds[i] = app.add_subcommand(subs[i].name, subs[i].help);
    add_common(cmds[i], flags[i]);
  }

  CLI11_PARSE(app, argc, argv);

  for (std::size_t i = 0; i < std::size(subs); ++i) {
    if (!cmds[i]->parsed()) continue;
    try {
      const mccf::RunContext ctx = make_context(flags[i]);
      subs[i].run(ctx);
      return kExitOk;
    } catch (const mccf::IoError& e) {
      std::cerr << "I/O error: " << e.what() << '\n';
      return kExitIo;
    } catch (const mccf::NumericalError& e) {
      std::cerr << "numerical failure: " << e.what() << '\n';
      return kExitNumerical;
    } catch (const mccf::TrainingError& e) {
      std::cerr << "numerical failure: " << e.what() << '\n';
      return kExitNumerical;
    } catch (const std::exception& e) {
      std::cerr << "validation error: " << e.what() << '\n';
      return kExitValidation;
    }
  }
  return kExitValidation;
}
