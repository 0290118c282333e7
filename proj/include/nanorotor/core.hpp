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

#pragma once

#include <complex>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nanorotor {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;

inline constexpr double pi = std::numbers::pi;
inline constexpr const char* version = "1.0.0";

namespace constants {
inline constexpr double hbar = 1.054571817e-34;       // J s
inline constexpr double amu = 1.66053906660e-27;      // kg
inline constexpr double epsilon0 = 8.8541878128e-12;  // F/m
inline constexpr double c_light = 299792458.0;        // m/s
}  // namespace constants

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : Error {
  using Error::Error;
};
struct SingularityError : Error {
  using Error::Error;
};
struct ResolutionError : Error {
  using Error::Error;
};
struct TruncationError : Error {
  using Error::Error;
};
struct AssignmentError : Error {
  using Error::Error;
};
struct IntegrationError : Error {
  using Error::Error;
};
struct AmbiguousPeakError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  ConfigError(std::string key, const std::string& what)
      : Error(key + ": " + what), key(std::move(key)) {}
  std::string key;
};

/// Non-fatal findings carried alongside a state or result.
struct Diagnostics {
  std::vector<std::string> warnings;
  std::map<std::string, double> values;

  void warn(std::string w) { warnings.push_back(std::move(w)); }
  void record_max(const std::string& key, double v) {
    auto [it, inserted] = values.emplace(key, v);
    if (!inserted && v > it->second) it->second = v;
  }
  void record_min(const std::string& key, double v) {
    auto [it, inserted] = values.emplace(key, v);
    if (!inserted && v < it->second) it->second = v;
  }
  void merge(const Diagnostics& o) {
    warnings.insert(warnings.end(), o.warnings.begin(), o.warnings.end());
    for (const auto& [k, v] : o.values) {
      if (k.find("min") != std::string::npos)
        record_min(k, v);
      else
        record_max(k, v);
    }
  }
};

}  // namespace nanorotor
