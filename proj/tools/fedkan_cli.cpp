// Command-line front end: generate synthetic beams, train one model, or
// compare Fed-KAN against Fed-MLP.
//
// Exit codes: 0 success, 1 internal error, 2 configuration, 3 I/O or input
// data, 4 numeric failure (non-finite loss).

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "fedkan/fedkan.hpp"

namespace {

enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kIo = 3, kNumeric = 4 };

void configure_logging() {
  // FEDKAN_LOG_LEVEL: trace, debug, info, warn, error, critical, off
  const char* level = std::getenv("FEDKAN_LOG_LEVEL");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
}

fedkan::RoundCallback round_logger(const std::string& label) {
  return [label](const fedkan::RoundReport& r) {
    spdlog::info("{} round {:>2}: avg_train_loss={:.6g} avg_test_loss={:.6g} participants={}",
                 label, r.round_index, r.avg_train_loss, r.avg_test_loss, r.participants.size());
  };
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Federated KAN / MLP traffic-share forecasting simulator"};
  app.require_subcommand(1);

  std::uint64_t gen_seed = 7;
  std::size_t gen_hours = 743;
  std::size_t gen_beams = 4;
  std::string gen_out = "beams";
  auto* generate = app.add_subcommand("generate", "Write seeded synthetic beam CSVs");
  generate->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  generate->add_option("--hours", gen_hours, "Hours per beam")->capture_default_str();
  generate->add_option("--beams", gen_beams, "Number of beams")->capture_default_str();
  generate->add_option("--out", gen_out, "Output directory")->capture_default_str();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<double> availability;
  bool parallel = false;
  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration")->required();
    cmd->add_option("--seed", seed, "Override the experiment seed");
    cmd->add_option("--out", out_dir, "Override the output directory");
    cmd->add_option("--availability", availability, "Client availability probability in (0, 1]");
    cmd->add_flag("--parallel-clients", parallel, "Train clients of a round concurrently");
  };
  auto* train = app.add_subcommand("train", "Run one federated training configuration");
  add_run_options(train);
  auto* compare = app.add_subcommand("compare", "Run Fed-KAN and Fed-MLP on the same data");
  add_run_options(compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (generate->parsed()) {
      for (const auto& p : fedkan::cmd_generate(gen_seed, gen_hours, gen_beams, gen_out)) {
        std::cout << p.string() << '\n';
      }
      return kOk;
    }
    fedkan::RunConfig rc = fedkan::load_run_config(config_path);
    fedkan::CliOverrides overrides;
    overrides.seed = seed;
    if (out_dir) overrides.output_dir = *out_dir;
    overrides.availability = availability;
    overrides.parallel_clients = parallel;
    fedkan::apply_overrides(rc, overrides);
    if (train->parsed()) {
      fedkan::cmd_train(rc, std::cout, round_logger(fedkan::to_string(rc.model.kind)));
    } else {
      fedkan::cmd_compare(rc, std::cout, round_logger("experiment"));
    }
    return kOk;
  } catch (const fedkan::ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const fedkan::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const fedkan::IngestionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kIo;
  } catch (const fedkan::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
}
