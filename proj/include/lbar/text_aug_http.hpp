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

// HTTP translation provider speaking the LibreTranslate JSON API:
//
//   POST {base_url}/translate
//   {"q": "...", "source": "en", "target": "de", "format": "text", "api_key": "..."}
//   -> {"translatedText": "..."}
//
// A back translation is two requests (en -> pivot, pivot -> en).

#pragma once

#include <cstdlib>
#include <string>

#include "httplib.h"
#include <nlohmann/json.hpp>
#include "lbar/error.hpp"
#include "lbar/text_aug.hpp"

namespace lbar {

inline constexpr const char* kTranslateUrlEnv = "LBAR_TRANSLATE_URL";
inline constexpr const char* kTranslateKeyEnv = "LBAR_TRANSLATE_API_KEY";

class HttpTranslator {
 public:
  HttpTranslator(std::string base_url, std::string api_key, int timeout_s = 30)
      : base_url_(std::move(base_url)), api_key_(std::move(api_key)), timeout_s_(timeout_s) {
    if (base_url_.empty()) throw ServiceError("translation provider URL is empty");
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  }

  // Reads LBAR_TRANSLATE_URL and LBAR_TRANSLATE_API_KEY.
  static HttpTranslator from_env() {
    const char* url = std::getenv(kTranslateUrlEnv);
    if (url == nullptr || *url == '\0') throw ServiceError(std::string(kTranslateUrlEnv) + " is not set");
    const char* key = std::getenv(kTranslateKeyEnv);
    return HttpTranslator(url, key != nullptr ? key : "");
  }

  std::string translate(const std::string& text, const std::string& source, const std::string& target) const {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_s_);
    client.set_read_timeout(timeout_s_);
    nlohmann::json body = {{"q", text}, {"source", source}, {"target", target}, {"format", "text"}};
    if (!api_key_.empty()) body["api_key"] = api_key_;
    auto res = client.Post("/translate", body.dump(), "application/json");
    if (!res) throw ServiceError("translation request to " + base_url_ + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw ServiceError("translation provider returned HTTP " + std::to_string(res->status) + ": " + res->body);
    try {
      return nlohmann::json::parse(res->body).at("translatedText").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ServiceError(std::string("malformed translation response: ") + e.what());
    }
  }

  std::string operator()(const std::string& text, Pivot pivot) const {
    return translate(translate(text, "en", pivot_code(pivot)), pivot_code(pivot), "en");
  }

 private:
  std::string base_url_;
  std::string api_key_;
  int timeout_s_;
};

}  // namespace lbar
