// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_CLI_H_
#define NITCG_CLI_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace nitcg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNumeric = 2;
inline constexpr int kExitUsage = 64;

// Defaults of one subcommand's configuration section.
nlohmann::json default_section(const std::string& subcommand);

// Effective configuration: defaults, then the subcommand's section of the
// config file, then `overrides` ("a.b=value"; the value is parsed as JSON and
// falls back to a string). Unknown keys throw InputError.
nlohmann::json resolve_config(const std::string& subcommand, const std::filesystem::path& config_file,
                              const std::vector<std::string>& overrides);

// Sets `dotted` inside `section`; the key path must already exist.
void apply_override(nlohmann::json& section, const std::string& dotted, const nlohmann::json& value);

// Per-SNR grouped bars as an SVG document.
struct BarSeries {
  std::string system;
  std::vector<double> values;  // one per group
};
std::string bar_chart_svg(const std::string& title, const std::string& y_label,
                          const std::vector<std::string>& groups, const std::vector<BarSeries>& series,
                          int width = 640, int height = 360);

// Entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nitcg::cli

#endif  // NITCG_CLI_H_
