#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "lbds/commands.hpp"
#include "lbds/config.hpp"
#include "lbds/error.hpp"
#include "lbds/version.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

void report(int code, const nlohmann::json& diagnostic, const std::optional<std::filesystem::path>& dir) {
  nlohmann::json d = diagnostic;
  d["exit_code"] = code;
  if (dir) {
    std::error_code ec;
    std::filesystem::create_directories(*dir, ec);
    std::ofstream(*dir / "diagnostic.json") << d.dump(2) << '\n';
  }
  std::cerr << d.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reflected generalized BDSDEs driven by Teugels martingales"};
  app.set_version_flag("--version", lbds::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_override;
  std::optional<std::string> batch_cache;
  std::vector<int> criteria;

  const std::pair<const char*, const char*> commands[] = {
      {"basis", "Orthonormal polynomials, Teugels coefficients and gamma tables"},
      {"simulate", "Simulate a path batch, write the binary cache and increment tables"},
      {"reflect", "Solve the reflected SDE on the configured domain"},
      {"solve", "Solve the reflected BDSDE (Picard or Yosida)"},
      {"pde", "Monte Carlo SIPDE values against the finite-difference oracle"},
      {"verify", "Run the acceptance criteria"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "Experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", out_override, "Output directory (overrides outputs.directory)");
    const std::string n = name;
    if (n == "reflect" || n == "solve")
      sub->add_option("--batch", batch_cache, "Reuse a path cache written by simulate")->check(CLI::ExistingFile);
    if (n == "verify")
      sub->add_option("--criteria", criteria, "Criterion numbers to run (default: all)")
          ->check(CLI::Range(1, 12))
          ->delimiter(',');
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  std::optional<std::filesystem::path> out_dir;
  if (out_override) out_dir = *out_override;
  try {
    const auto cfg = lbds::load_config(config_path);
    if (!out_dir) out_dir = cfg.outputs.directory;
    lbds::CommandOptions opt;
    opt.out_dir = *out_dir;
    if (batch_cache) opt.batch_cache = *batch_cache;
    opt.criteria = criteria;
    const auto r = lbds::run_command(command, cfg, opt, std::cout);
    if (!r.ok) {
      report(kNumericalError, {{"command", command}, {"diagnostic", r.diagnostic}}, out_dir);
      return kNumericalError;
    }
    std::cout << r.summary.dump(2) << '\n';
    return kOk;
  } catch (const lbds::InvalidArgument& e) {
    report(kConfigError, {{"command", command}, {"error", "invalid argument"}, {"message", e.what()}}, out_dir);
    return kConfigError;
  } catch (const lbds::NumericalError& e) {
    report(kNumericalError, {{"command", command}, {"error", "numerical failure"}, {"message", e.what()}}, out_dir);
    return kNumericalError;
  } catch (const nlohmann::json::exception& e) {
    report(kConfigError, {{"command", command}, {"error", "invalid argument"}, {"message", e.what()}}, out_dir);
    return kConfigError;
  } catch (const std::exception& e) {
    report(kNumericalError, {{"command", command}, {"error", "runtime failure"}, {"message", e.what()}}, out_dir);
    return kNumericalError;
  }
}
