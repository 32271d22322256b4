#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "avatr/model/config.hpp"
#include "avatr/train/config.hpp"

namespace avatr::cli {

enum ExitCode : int { ok = 0, usage = 1, data = 2, numerical = 3 };

struct OutputConfig {
  std::string checkpoint = "checkpoint.avtr";
  std::string log = "train_log.csv";
};

// Everything cmd_train needs, addressed by dotted keys: model.*, train.*,
// data.*, out.*.
struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  train::DataConfig data;
  OutputConfig out;

  void set(std::string_view key, std::string_view value);
  void validate() const;
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
  // One "key=value" line per field; reparses to the same config.
  std::string to_text() const;
};

// "key=value" lines, '#' comments. A key may appear once per file.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text);

// defaults < file < overrides. Each override is "key=value".
RunConfig resolve_config(const std::filesystem::path* file, const std::vector<std::string>& overrides);

// Runs one command line (without the program name). Never throws; errors are
// reported on `err` and mapped to an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace avatr::cli
