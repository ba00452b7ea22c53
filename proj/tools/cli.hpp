#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "derits/data.hpp"
#include "derits/error.hpp"
#include "derits/model.hpp"
#include "derits/train.hpp"

namespace derits::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitRuntime = 1,
  kExitConfig = 2,
  kExitFormat = 3,
};

/// Everything one invocation needs, assembled from the config file and flags.
struct RunConfig {
  std::optional<std::filesystem::path> csv_path;
  std::optional<data::SynthSpec> synthetic;  // set when any synthetic key is present
  model::ModelConfig model;
  train::TrainConfig train;
  std::filesystem::path out_dir = ".";
  std::optional<std::filesystem::path> checkpoint;
};

/// Parses a flat JSON object. Unknown keys and ill-typed values raise kConfig.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

const std::vector<std::string>& known_config_keys();

int exit_code_for(ErrorKind kind) noexcept;

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace derits::cli
