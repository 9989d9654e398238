// Command-line front end of the laboratory.
//
//   nsmix_lab <command> [--config PATH] [--seed U64] [--out DIR] [--threads N] [--mode frozen|exact]
//
// Exit status: 0 success, 1 verdict failure, 2 configuration error, 3 numerical failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "nsmix/dispatch.hpp"

#ifndef NSMIX_SOURCE_DIR
#define NSMIX_SOURCE_DIR "."
#endif

namespace {

std::string usage() {
  std::string s = "usage: nsmix_lab <command> [--config PATH] [--seed U64] [--out DIR] [--threads N] "
                  "[--mode frozen|exact]\ncommands:";
  for (auto c : nsmix::kCommands) s += " " + std::string(c);
  return s + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Navier-Stokes mixing laboratory"};
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<unsigned> threads;
  std::optional<std::string> mode;
  bool single_thread = false;
  std::string fixtures = std::string(NSMIX_SOURCE_DIR) + "/fixtures";
  app.add_option("command", command, "experiment to run")->required();
  app.add_option("--config", config_path, "INI configuration file");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads (0: all cores)");
  app.add_option("--mode", mode, "shift mode")->check(CLI::IsMember({"frozen", "exact"}));
  app.add_flag("--single-thread", single_thread, "run every experiment on one thread");
  app.add_option("--fixtures", fixtures, "directory of transport fixtures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help() << usage();
    return nsmix::kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << usage();
    return nsmix::kExitConfig;
  }
  if (!nsmix::is_command(command)) {
    std::cerr << "unknown command '" << command << "'\n" << usage();
    return nsmix::kExitConfig;
  }

  try {
    nsmix::RunContext ctx;
    ctx.config = config_path.empty() ? nsmix::parse_config_text("") : nsmix::parse_config(config_path);
    if (seed) ctx.config.seed = *seed;
    if (threads) ctx.config.threads = *threads;
    if (single_thread) ctx.config.threads = 1;
    if (mode) ctx.config.mode = *mode;
    if (out_dir) ctx.config.out_dir = *out_dir;
    ctx.config.validate();
    ctx.out_dir = ctx.config.out_dir;
    ctx.fixtures_dir = fixtures;
    const auto rec = nsmix::run_command(command, ctx);
    std::cout << rec.summary().dump(2) << "\n";
    return rec.passed() ? nsmix::kExitOk : nsmix::kExitVerdict;
  } catch (const nsmix::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return nsmix::kExitConfig;
  } catch (const nsmix::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return nsmix::kExitConfig;
  } catch (const nsmix::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return nsmix::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return nsmix::kExitNumerical;
  }
}
