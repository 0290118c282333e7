// Copyright 2026 The nanorotor Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// simulate <scenario|preset|config.json|manifest.json> [--key.path value ...]
//
// Exit codes: 0 ok, 2 configuration or usage error, 3 runtime failure.

#include <iostream>

#include "CLI11.hpp"
#include "nanorotor/cli/runner.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_runtime = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace nanorotor;
  CLI::App app{"Alignment dynamics of a laser-kicked nanorotor"};
  app.allow_extras();
  std::string source;
  std::string out_prefix;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  bool validate = false;
  app.add_option("source", source, "scenario name, preset name, config file or manifest")->required();
  app.add_option("--out", out_prefix, "output prefix");
  app.add_option("--threads", threads, "worker threads (0: NANOROTOR_THREADS or all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "ensemble seed");
  app.add_flag("--validate", validate, "check the config and print estimates without running");
  app.footer("Any other --a.b value pair overrides that config key; the value is read as JSON when it parses.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_config;
  }

  try {
    cli::json raw = cli::load_source(source);
    const auto extras = app.remaining();
    for (std::size_t i = 0; i < extras.size(); ++i) {
      const std::string& a = extras[i];
      if (a.rfind("--", 0) != 0) throw ConfigError(a, "unexpected argument");
      std::string key = a.substr(2), value;
      if (const auto eq = key.find('='); eq != std::string::npos) {
        value = key.substr(eq + 1);
        key = key.substr(0, eq);
      } else {
        if (i + 1 >= extras.size()) throw ConfigError(key, "override needs a value");
        value = extras[++i];
      }
      cli::apply_override(raw, key, value);
    }
    if (!out_prefix.empty()) raw["output"]["prefix"] = out_prefix;
    if (seed) raw["ensemble"]["seed"] = *seed;

    if (validate) {
      const auto rep = cli::validate_report(raw);
      std::cout << rep.dump(2) << "\n";
      return rep["valid"].get<bool>() ? 0 : exit_config;
    }

    const auto config = cli::resolve(raw);
    const auto result = cli::run(config, threads);
    for (const auto& f : result.files) std::cout << f << "\n";
    const auto& diag = result.manifest["diagnostics"];
    std::size_t shown = 0;
    for (const auto& w : diag["warnings"]) {
      if (shown++ == 5) break;
      std::cerr << "warning: " << w.get<std::string>() << "\n";
    }
    const auto total = diag["warning_count"].get<std::size_t>();
    if (total > 5) std::cerr << "warning: " << total - 5 << " more in the manifest\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const cli::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_runtime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_runtime;
  }
}
