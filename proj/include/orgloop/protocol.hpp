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

// Protocol generation loop: prompt construction, candidate generators,
// execution of validated protocols and template refinement.
//
// Only protocol documents are executed. Candidates that look like free-form
// programs are stored verbatim in the dataset and never run.

#ifndef ORGLOOP_PROTOCOL_HPP_
#define ORGLOOP_PROTOCOL_HPP_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "orgloop/harness.hpp"
#include "orgloop/plasticity.hpp"
#include "orgloop/protocol_spec.hpp"

namespace orgloop::protocol {

// ---------------------------------------------------------------- prompts

struct OrganoidState {
  double baseline_rate_hz = 0.0;
  std::optional<double> last_fepsp_slope;
};

struct HistoryEntry {
  std::string protocol;  // describe() of the protocol
  double outcome = 0.0;  // primary metric in [0, 1]
};

struct PromptContext {
  std::string objective;
  std::string api_spec;
  OrganoidState state;
  std::vector<HistoryEntry> history;  // oldest first
};

// Placeholders understood by build_prompt. {objective}, {state} and {history}
// are required; the constraint block is appended when {constraints} is absent.
inline constexpr std::string_view kObjectivePlaceholder = "{objective}";
inline constexpr std::string_view kApiPlaceholder = "{api_spec}";
inline constexpr std::string_view kStatePlaceholder = "{state}";
inline constexpr std::string_view kHistoryPlaceholder = "{history}";
inline constexpr std::string_view kConstraintsPlaceholder = "{constraints}";

// Most recent runs kept in a prompt.
inline constexpr std::size_t kHistoryLimit = 10;

std::string default_template();

// The parameter bounds enforced by validate(), one per line.
std::string constraint_block();

// One history line: "- Run 3: Electrical reward (20Hz, 2uA) -> 22%".
std::string format_history_line(int run, const HistoryEntry& e);

// Deterministic substitution. Throws std::invalid_argument naming the first
// missing required placeholder.
std::string build_prompt(std::string_view tmpl, const PromptContext& ctx);

// ------------------------------------------------------------- generators

class GeneratorError : public std::runtime_error {
 public:
  GeneratorError(const std::string& what, int attempts)
      : std::runtime_error(what), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

// One request, one candidate text. Throws GeneratorError on failure.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string generate(const std::string& prompt) = 0;
};

// Replays a fixed table of responses in order, wrapping around. Table entries
// in JSON: a string is returned verbatim, {"error": "..."} fails the call and
// any other value is returned as its JSON text.
class StubGenerator : public Generator {
 public:
  struct Response {
    std::string text;
    std::optional<std::string> error;
  };

  explicit StubGenerator(std::vector<Response> table);
  static StubGenerator from_json(const nlohmann::json& table);
  static StubGenerator load(const std::filesystem::path& path);

  std::string generate(const std::string& prompt) override;
  std::size_t calls() const { return calls_; }

 private:
  std::vector<Response> table_;
  std::size_t calls_ = 0;
};

// Remote service speaking JSON over HTTP(S): POST {"model", "prompt"} to
// `path`, answer {"text"}. The bearer token is read from the environment
// variable named by `token_env` and never written anywhere.
struct HttpGeneratorConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/generate";
  std::string model;
  std::string token_env = "ORGLOOP_GENERATOR_TOKEN";
  int attempts = 3;
  std::chrono::milliseconds backoff{1000};  // doubles after each failure
  std::chrono::milliseconds timeout{30000};  // per attempt
};

void to_json(nlohmann::json& j, const HttpGeneratorConfig& c);
void from_json(const nlohmann::json& j, HttpGeneratorConfig& c);

class HttpGenerator : public Generator {
 public:
  using Sleep = std::function<void(std::chrono::milliseconds)>;

  // `sleep` defaults to std::this_thread::sleep_for.
  explicit HttpGenerator(HttpGeneratorConfig cfg, Sleep sleep = {});
  std::string generate(const std::string& prompt) override;

 private:
  HttpGeneratorConfig cfg_;
  Sleep sleep_;
};

// --------------------------------------------------------------- execution

// True when the candidate reads as a program rather than a JSON document.
bool looks_like_script(std::string_view text);

// Strips one surrounding Markdown code fence, if any.
std::string strip_code_fence(std::string_view text);

// Runs `blocks` blocks of the base experiment under `spec`. Throws
// std::invalid_argument when the spec fails validation or does not fit the
// experiment.
harness::ExperimentResult execute_protocol(const ProtocolSpec& spec,
                                           harness::ExperimentConfig base, int blocks);

// ------------------------------------------------------------ the dataset

enum class Status { Executed, Invalid, GeneratorFailed, ScriptStored, ExecutionFailed };
std::string to_string(Status s);
Status status_from_string(std::string_view s);

struct DatasetRecord {
  int iteration = 0;
  std::string prompt_digest;  // SHA-256 of the prompt
  std::string candidate;      // raw generator output
  Status status = Status::Invalid;
  std::vector<ValidationError> validation;
  std::optional<ProtocolSpec> protocol;
  std::optional<std::string> primary_metric;
  std::optional<double> primary_value;
  harness::MetricTable metrics;
  std::optional<probe::PlasticityReport> plasticity;
  std::string curriculum_suggestion;
  std::optional<std::string> error;
};

nlohmann::json to_json(const DatasetRecord& r);
DatasetRecord dataset_record_from_json(const nlohmann::json& j);

// Few-shot examples kept by refine_template, and the template size cap.
inline constexpr int kFewShotCount = 3;
inline constexpr std::size_t kTemplateLimit = 16000;

// Appends the best executed runs as examples and the most frequent
// validation failures to the base part of `tmpl`. Earlier refinements are
// replaced, so an unchanged dataset gives an unchanged template. Throws
// std::invalid_argument for an empty dataset.
std::string refine_template(std::string_view tmpl, const std::vector<DatasetRecord>& dataset);

struct MetaLoopConfig {
  harness::ExperimentConfig experiment;
  int blocks = 2;
  int iterations = 10;
  int refine_every = 5;  // 0 disables refinement
  std::string objective = "Raise the prey capture rate of the culture.";
  std::string api_spec;  // empty: a description of the protocol document
  std::string prompt_template;  // empty: default_template()
  std::size_t history_limit = kHistoryLimit;
  // Each executed run i uses seed derive_seed(experiment.run.seed, "run/i").
  std::filesystem::path dataset_path;  // empty: kept in memory only
};

struct MetaLoopResult {
  std::vector<DatasetRecord> dataset;
  std::string final_template;
  int refinements = 0;
  std::map<int, std::vector<std::string>> events;  // by iteration, executed runs
};

// Never throws for per-iteration failures; they become dataset records.
MetaLoopResult meta_loop(const MetaLoopConfig& cfg, Generator& generator);

}  // namespace orgloop::protocol

#endif  // ORGLOOP_PROTOCOL_HPP_
