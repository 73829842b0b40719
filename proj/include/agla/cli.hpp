#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "agla/benchmark.hpp"
#include "agla/decoding.hpp"
#include "agla/masking.hpp"

namespace agla::cli {

enum class Subcommand { match, mask, decode, generate, bench, render };

struct RunConfig {
  Subcommand subcommand = Subcommand::match;
  std::string image;   // PGM input
  std::string scene;   // scene JSON input, alternative to image
  std::string prompt;
  std::string out;     // output directory (or PGM path for render)
  std::string config;  // calibration file supplying world constants
  DecoderConfig decoder;
  MaskStrategy strategy = MaskStrategy::pixel;
  std::optional<double> gamma;
  std::uint64_t seed = 0;
  std::uint64_t world_seed = 0;
  toy::BenchmarkKind kind = toy::BenchmarkKind::pope_adversarial;
  std::size_t n = 200;
};

/// Bad flags or values. exit_code is 0 for --help, where message holds the
/// help text.
class UsageError : public std::runtime_error {
 public:
  UsageError(const std::string& message, int exit_code)
      : std::runtime_error(message), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

/// args excludes the program name. `env_seed` is the value of AGLA_SEED, if set.
RunConfig parse_args(const std::vector<std::string>& args,
                     const std::optional<std::string>& env_seed = std::nullopt);

/// Executes a parsed config, writing human-readable results to `out`.
void execute(const RunConfig& cfg, std::ostream& out);

/// parse_args + execute; diagnostics go to `err` as a single line.
int run(const std::vector<std::string>& args, const std::optional<std::string>& env_seed,
        std::ostream& out, std::ostream& err);

}  // namespace agla::cli
