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

#include "orgloop/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include <fmt/format.h>

#include "orgloop/rng.hpp"

namespace orgloop::protocol {
namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

constexpr std::string_view kExamplesHeader = "\n\nSuccessful examples:\n";
constexpr std::string_view kFailuresHeader = "\n\nFrequent validation failures:\n";

std::string default_api_spec() {
  return "Reply with one JSON document with the keys reward_modality, "
         "electrical_params, dopamine_params, punishment_params and optionally "
         "curriculum {environment, trials_per_block, z, prey_policy}. The parameters "
         "of the modality not in use are null.";
}

std::string state_text(const OrganoidState& s) {
  return fmt::format("Baseline firing rate: {:.2f} Hz\nLast fEPSP slope: {}",
                     s.baseline_rate_hz,
                     s.last_fepsp_slope ? fmt::format("{:.6g}", *s.last_fepsp_slope)
                                        : std::string("none"));
}

// Mean firing rate of an untouched agent over one second.
double baseline_rate(const harness::ExperimentConfig& cfg) {
  const auto layout = harness::layout_for(cfg);
  auto agent = harness::build_agent(cfg, layout);
  constexpr double kWindowMs = 1000.0;
  const auto spikes = agent.run(kWindowMs);
  return static_cast<double>(spikes.size()) / agent.size() / (kWindowMs / 1000.0);
}

std::string base_of(std::string_view tmpl) {
  const auto cut = std::min(tmpl.find(kExamplesHeader), tmpl.find(kFailuresHeader));
  return std::string(tmpl.substr(0, cut));
}

}  // namespace

// ---------------------------------------------------------------- prompts

std::string default_template() {
  return "You design stimulation protocols for a closed-loop neural culture "
         "experiment.\n"
         "Objective: {objective}\n\n"
         "Interface:\n{api_spec}\n\n"
         "Culture state:\n{state}\n\n"
         "Historical Data:\n{history}\n\n"
         "Propose the next protocol as a single JSON document.\n"
         "Parameter constraints:\n{constraints}";
}

std::string constraint_block() {
  return fmt::format(
      "- reward_modality: one of [\"electrical\", \"dopamine_uncaging\"]\n"
      "- electrical_params.shape: one of [\"bi-phasic\", \"tri-phasic\"]\n"
      "- electrical_params.amplitude_uA: float, range [{:.1f}, {:.1f}]\n"
      "- electrical_params.pulse_duration_us: int, range [{}, {}]\n"
      "- electrical_params.frequency_hz: float, range [{:.1f}, {:.1f}]\n"
      "- dopamine_params.uncaging_duration_ms: int, range [{}, {}]\n"
      "- punishment_params.amplitude_uA: float, range [{:.1f}, {:.1f}]\n"
      "- punishment_params.pulse_duration_us: int, range [{}, {}]",
      kAmplitudeMin, kAmplitudeMax, kPulseMin, kPulseMax, kFrequencyMin, kFrequencyMax,
      kUncagingMin, kUncagingMax, kAmplitudeMin, kAmplitudeMax, kPulseMin, kPulseMax);
}

std::string format_history_line(int run, const HistoryEntry& e) {
  return fmt::format("- Run {}: {} -> {:.0f}%", run, e.protocol, e.outcome * 100.0);
}

std::string build_prompt(std::string_view tmpl, const PromptContext& ctx) {
  for (auto p : {kObjectivePlaceholder, kStatePlaceholder, kHistoryPlaceholder}) {
    if (tmpl.find(p) == std::string_view::npos) {
      throw std::invalid_argument(fmt::format("prompt template lacks the {} placeholder", p));
    }
  }
  std::string history;
  for (std::size_t i = 0; i < ctx.history.size(); ++i) {
    if (i > 0) history += '\n';
    history += format_history_line(static_cast<int>(i) + 1, ctx.history[i]);
  }
  const std::string out(tmpl);
  // Single left-to-right pass over the template, so substituted values are
  // never rescanned for placeholders.
  std::string result;
  result.reserve(out.size() + 1024);
  std::size_t pos = 0;
  const std::pair<std::string_view, std::string> values[] = {
      {kObjectivePlaceholder, ctx.objective},
      {kApiPlaceholder, ctx.api_spec},
      {kStatePlaceholder, state_text(ctx.state)},
      {kHistoryPlaceholder, history},
      {kConstraintsPlaceholder, constraint_block()},
  };
  while (pos < out.size()) {
    bool matched = false;
    for (const auto& [key, value] : values) {
      if (out.compare(pos, key.size(), key) == 0) {
        result += value;
        pos += key.size();
        matched = true;
        break;
      }
    }
    if (!matched) result += out[pos++];
  }
  if (tmpl.find(kConstraintsPlaceholder) == std::string_view::npos) {
    result += "\n\nParameter constraints:\n" + constraint_block();
  }
  return result;
}

// ------------------------------------------------------------- generators

StubGenerator::StubGenerator(std::vector<Response> table) : table_(std::move(table)) {
  if (table_.empty()) throw std::invalid_argument("stub response table is empty");
}

StubGenerator StubGenerator::from_json(const json& table) {
  if (!table.is_array()) throw std::invalid_argument("stub responses must be a JSON array");
  std::vector<Response> out;
  for (const auto& entry : table) {
    Response r;
    if (entry.is_string()) {
      r.text = entry.get<std::string>();
    } else if (entry.is_object() && entry.size() == 1 && entry.contains("error")) {
      r.error = entry.at("error").get<std::string>();
    } else {
      r.text = entry.dump(2);
    }
    out.push_back(std::move(r));
  }
  return StubGenerator(std::move(out));
}

StubGenerator StubGenerator::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  return from_json(json::parse(in));
}

std::string StubGenerator::generate(const std::string&) {
  const auto& r = table_[calls_ % table_.size()];
  ++calls_;
  if (r.error) throw GeneratorError(*r.error, 1);
  return r.text;
}

void to_json(json& j, const HttpGeneratorConfig& c) {
  j = json{{"base_url", c.base_url},
           {"path", c.path},
           {"model", c.model},
           {"token_env", c.token_env},
           {"attempts", c.attempts},
           {"backoff_ms", c.backoff.count()},
           {"timeout_ms", c.timeout.count()}};
}

void from_json(const json& j, HttpGeneratorConfig& c) {
  c.base_url = j.value("base_url", c.base_url);
  c.path = j.value("path", c.path);
  c.model = j.value("model", c.model);
  c.token_env = j.value("token_env", c.token_env);
  c.attempts = j.value("attempts", c.attempts);
  c.backoff = std::chrono::milliseconds(j.value("backoff_ms", c.backoff.count()));
  c.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.timeout.count()));
}

// --------------------------------------------------------------- execution

bool looks_like_script(std::string_view text) {
  static const std::regex kCode(
      R"((^|\n)\s*(def |class |import |from \S+ import |for .+:|while .+:|if .+:))");
  const std::string s(text);
  return std::regex_search(s, kCode);
}

std::string strip_code_fence(std::string_view text) {
  const std::string s(text);
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos || s.compare(first, 3, "```") != 0) return s;
  const auto body = s.find('\n', first);
  const auto close = s.rfind("```");
  if (body == std::string::npos || close <= body) return s;
  return s.substr(body + 1, close - body - 1);
}

harness::ExperimentResult execute_protocol(const ProtocolSpec& spec,
                                           harness::ExperimentConfig base, int blocks) {
  if (blocks < 0) throw std::invalid_argument("blocks must be >= 0");
  const auto errors = validate(spec);
  if (!errors.empty()) {
    throw std::invalid_argument(
        fmt::format("refusing an invalid protocol: {}", to_string(errors.front())));
  }
  harness::apply_protocol(base, spec);
  base.protocol = spec;
  base.run.trials = blocks * base.run.block_size;
  return harness::run_experiment(base);
}

// ------------------------------------------------------------ the dataset

std::string to_string(Status s) {
  switch (s) {
    case Status::Executed: return "executed";
    case Status::Invalid: return "invalid";
    case Status::GeneratorFailed: return "generator_failed";
    case Status::ScriptStored: return "script_stored";
    case Status::ExecutionFailed: return "execution_failed";
  }
  return "invalid";
}

Status status_from_string(std::string_view s) {
  for (auto st : {Status::Executed, Status::Invalid, Status::GeneratorFailed,
                  Status::ScriptStored, Status::ExecutionFailed}) {
    if (to_string(st) == s) return st;
  }
  throw std::invalid_argument(fmt::format("unknown dataset status '{}'", s));
}

json to_json(const DatasetRecord& r) {
  ordered j;
  j["iteration"] = r.iteration;
  j["prompt_digest"] = r.prompt_digest;
  j["candidate"] = r.candidate;
  j["status"] = to_string(r.status);
  ordered errors = ordered::array();
  for (const auto& e : r.validation) {
    json ej = e;
    errors.push_back(ordered::parse(ej.dump()));
  }
  j["validation"] = {{"ok", r.status == Status::Executed}, {"errors", errors}};
  j["protocol"] = r.protocol ? ordered::parse(serialize(*r.protocol)) : ordered(nullptr);
  j["primary_metric"] = r.primary_metric ? ordered(*r.primary_metric) : ordered(nullptr);
  j["primary_value"] = r.primary_value ? ordered(*r.primary_value) : ordered(nullptr);
  j["metrics"] = r.metrics;
  j["plasticity"] = r.plasticity
                        ? ordered::parse(harness::plasticity_to_json("overall", *r.plasticity).dump())
                        : ordered(nullptr);
  j["curriculum_suggestion"] = r.curriculum_suggestion;
  j["error"] = r.error ? ordered(*r.error) : ordered(nullptr);
  return json::parse(j.dump());
}

DatasetRecord dataset_record_from_json(const json& j) {
  DatasetRecord r;
  r.iteration = j.at("iteration").get<int>();
  r.prompt_digest = j.at("prompt_digest").get<std::string>();
  r.candidate = j.at("candidate").get<std::string>();
  r.status = status_from_string(j.at("status").get<std::string>());
  for (const auto& e : j.at("validation").at("errors")) {
    ValidationError v;
    v.kind = ErrorKind::Syntax;
    const auto kind = e.at("kind").get<std::string>();
    for (auto k : {ErrorKind::Syntax, ErrorKind::UnknownField, ErrorKind::TypeMismatch,
                   ErrorKind::Missing, ErrorKind::Range, ErrorKind::Consistency}) {
      if (to_string(k) == kind) v.kind = k;
    }
    v.path = e.at("path").get<std::string>();
    v.constraint = e.at("constraint").get<std::string>();
    v.value = e.at("value").get<std::string>();
    r.validation.push_back(std::move(v));
  }
  if (!j.at("protocol").is_null()) {
    auto parsed = parse_protocol(j.at("protocol").dump());
    if (!parsed.spec) throw std::invalid_argument("dataset record holds a malformed protocol");
    r.protocol = *parsed.spec;
  }
  if (!j.at("primary_metric").is_null()) r.primary_metric = j.at("primary_metric").get<std::string>();
  if (!j.at("primary_value").is_null()) r.primary_value = j.at("primary_value").get<double>();
  r.metrics = j.at("metrics").get<harness::MetricTable>();
  if (!j.at("plasticity").is_null()) {
    r.plasticity = harness::plasticity_from_json(j.at("plasticity")).report;
  }
  r.curriculum_suggestion = j.value("curriculum_suggestion", "");
  if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  return r;
}

std::string refine_template(std::string_view tmpl, const std::vector<DatasetRecord>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("cannot refine from an empty dataset");
  std::vector<const DatasetRecord*> best;
  for (const auto& r : dataset) {
    if (r.status == Status::Executed && r.protocol && r.primary_value) best.push_back(&r);
  }
  std::stable_sort(best.begin(), best.end(), [](const auto* a, const auto* b) {
    if (*a->primary_value != *b->primary_value) return *a->primary_value > *b->primary_value;
    return a->iteration < b->iteration;
  });
  if (best.size() > static_cast<std::size_t>(kFewShotCount)) best.resize(kFewShotCount);

  std::map<std::pair<std::string, std::string>, int> failures;
  for (const auto& r : dataset) {
    for (const auto& e : r.validation) {
      ++failures[{e.path.empty() ? std::string("(document)") : e.path, to_string(e.kind)}];
    }
  }
  std::vector<std::pair<std::pair<std::string, std::string>, int>> ranked(failures.begin(),
                                                                          failures.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  constexpr std::size_t kFailureLines = 5;
  if (ranked.size() > kFailureLines) ranked.resize(kFailureLines);

  const std::string base = base_of(tmpl);
  std::vector<std::string> examples;
  for (std::size_t i = 0; i < best.size(); ++i) {
    const auto& r = *best[i];
    examples.push_back(fmt::format("Example {} (iteration {}, {} {:.2f}, prompt {}):\n{}", i + 1,
                                   r.iteration, r.primary_metric.value_or("metric"),
                                   *r.primary_value, r.prompt_digest.substr(0, 12),
                                   serialize(*r.protocol)));
  }
  std::string failure_text;
  for (const auto& [key, count] : ranked) {
    failure_text += fmt::format("- {}: {} ({} times)\n", key.first, key.second, count);
  }
  auto assemble = [&] {
    std::string out = base;
    if (!examples.empty()) {
      out += kExamplesHeader;
      for (std::size_t i = 0; i < examples.size(); ++i) {
        if (i > 0) out += "\n";
        out += examples[i];
      }
    }
    if (!failure_text.empty()) {
      out += kFailuresHeader;
      out += failure_text.substr(0, failure_text.size() - 1);
    }
    return out;
  };
  std::string out = assemble();
  // Drop the weakest examples until the template fits.
  while (out.size() > kTemplateLimit && !examples.empty()) {
    examples.pop_back();
    out = assemble();
  }
  return out;
}

MetaLoopResult meta_loop(const MetaLoopConfig& cfg, Generator& generator) {
  MetaLoopResult result;
  std::string tmpl = cfg.prompt_template.empty() ? default_template() : cfg.prompt_template;
  PromptContext ctx;
  ctx.objective = cfg.objective;
  ctx.api_spec = cfg.api_spec.empty() ? default_api_spec() : cfg.api_spec;
  ctx.state.baseline_rate_hz = baseline_rate(cfg.experiment);

  std::ofstream dataset_out;
  if (!cfg.dataset_path.empty()) {
    if (cfg.dataset_path.has_parent_path()) {
      std::filesystem::create_directories(cfg.dataset_path.parent_path());
    }
    dataset_out.open(cfg.dataset_path, std::ios::trunc);
    if (!dataset_out) {
      throw std::runtime_error(fmt::format("cannot write {}", cfg.dataset_path.string()));
    }
  }

  for (int it = 1; it <= cfg.iterations; ++it) {
    DatasetRecord rec;
    rec.iteration = it;
    const std::string prompt = build_prompt(tmpl, ctx);
    rec.prompt_digest = harness::sha256_hex(prompt);
    bool have_candidate = false;
    try {
      rec.candidate = generator.generate(prompt);
      have_candidate = true;
    } catch (const GeneratorError& e) {
      rec.status = Status::GeneratorFailed;
      rec.error = fmt::format("{} (after {} attempts)", e.what(), e.attempts());
    } catch (const std::exception& e) {
      rec.status = Status::GeneratorFailed;
      rec.error = e.what();
    }
    if (have_candidate) {
      auto parsed = parse_protocol(strip_code_fence(rec.candidate));
      if (!parsed.spec) {
        rec.validation = parsed.errors;
        if (looks_like_script(rec.candidate)) {
          rec.status = Status::ScriptStored;
          rec.error = "free-form script stored, not executed";
        } else {
          rec.status = Status::Invalid;
          rec.error = to_string(parsed.errors.front());
        }
      } else if (auto errors = validate(*parsed.spec); !errors.empty()) {
        rec.status = Status::Invalid;
        rec.validation = std::move(errors);
        rec.protocol = *parsed.spec;
        rec.error = to_string(rec.validation.front());
      } else {
        rec.protocol = *parsed.spec;
        try {
          auto run_cfg = cfg.experiment;
          run_cfg.run.seed = derive_seed(cfg.experiment.run.seed, fmt::format("run/{}", it));
          run_cfg.output_dir.clear();
          auto run = execute_protocol(*parsed.spec, run_cfg, cfg.blocks);
          rec.status = Status::Executed;
          rec.metrics = run.record.metrics;
          rec.primary_metric = run.record.primary_metric;
          const auto found = run.record.metrics.find(run.record.primary_metric);
          rec.primary_value =
              found != run.record.metrics.end() ? found->second : 0.0;
          rec.plasticity = run.record.overall_plasticity;
          rec.curriculum_suggestion = run.record.curriculum_suggestion;
          if (!run.record.blocks.empty() && run.record.blocks.back().fepsp_slope) {
            ctx.state.last_fepsp_slope = run.record.blocks.back().fepsp_slope;
          }
          ctx.history.push_back({describe(*parsed.spec), *rec.primary_value});
          if (ctx.history.size() > cfg.history_limit) {
            ctx.history.erase(ctx.history.begin());
          }
          result.events[it] = std::move(run.events);
        } catch (const std::exception& e) {
          rec.status = Status::ExecutionFailed;
          rec.error = e.what();
        }
      }
    }
    if (dataset_out) dataset_out << to_json(rec).dump() << '\n' << std::flush;
    result.dataset.push_back(std::move(rec));
    if (cfg.refine_every > 0 && it % cfg.refine_every == 0) {
      tmpl = refine_template(tmpl, result.dataset);
      ++result.refinements;
    }
  }
  result.final_template = tmpl;
  return result;
}

}  // namespace orgloop::protocol
