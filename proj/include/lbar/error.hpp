/* Copyright 2026 The lbar Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace lbar {

// Invalid or inconsistent configuration. `key` is the dotted path of the
// first offending entry (empty when the error is not tied to a key).
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key.empty() ? what : key + ": " + what),
        key_(std::move(key)),
        detail_(what) {}

  const std::string& key() const noexcept { return key_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string key_;
  std::string detail_;
};

// A persisted artifact (trial log, cache file, checkpoint) is unreadable or
// inconsistent.
class PersistenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A remote service (translation provider) failed or is not configured.
class ServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unsupported or malformed input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lbar
