// Copyright 2026 The Orgloop Authors.
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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <thread>
#include <variant>

#include <fmt/format.h>

#include "orgloop/protocol.hpp"

namespace orgloop::protocol {
namespace {

struct AttemptFailure {
  std::string reason;
  bool retryable = true;
};

}  // namespace

HttpGenerator::HttpGenerator(HttpGeneratorConfig cfg, Sleep sleep)
    : cfg_(std::move(cfg)), sleep_(std::move(sleep)) {
  if (cfg_.base_url.empty()) throw std::invalid_argument("generator base_url is empty");
  if (cfg_.attempts < 1) throw std::invalid_argument("generator attempts must be >= 1");
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string HttpGenerator::generate(const std::string& prompt) {
  httplib::Client client(cfg_.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (const char* token = std::getenv(cfg_.token_env.c_str()); token && *token) {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const nlohmann::json body{{"model", cfg_.model}, {"prompt", prompt}};
  const std::string payload = body.dump();

  auto attempt = [&]() -> std::variant<std::string, AttemptFailure> {
    auto res = client.Post(cfg_.path, headers, payload, "application/json");
    if (!res) {
      return AttemptFailure{fmt::format("transport failure: {}", httplib::to_string(res.error()))};
    }
    if (res->status >= 500 || res->status == 429) {
      return AttemptFailure{fmt::format("server answered HTTP {}", res->status)};
    }
    if (res->status != 200) {
      return AttemptFailure{fmt::format("server answered HTTP {}", res->status), false};
    }
    const auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("text") ||
        !reply.at("text").is_string()) {
      return AttemptFailure{"response is not a JSON object with a text field"};
    }
    auto text = reply.at("text").get<std::string>();
    if (text.empty()) return AttemptFailure{"empty response"};
    return text;
  };

  auto backoff = cfg_.backoff;
  std::string last;
  for (int i = 1; i <= cfg_.attempts; ++i) {
    auto outcome = attempt();
    if (auto* text = std::get_if<std::string>(&outcome)) return std::move(*text);
    const auto& failure = std::get<AttemptFailure>(outcome);
    last = failure.reason;
    if (!failure.retryable) throw GeneratorError(last, i);
    if (i < cfg_.attempts) {
      sleep_(backoff);
      backoff *= 2;
    }
  }
  throw GeneratorError(last, cfg_.attempts);
}

}  // namespace orgloop::protocol
