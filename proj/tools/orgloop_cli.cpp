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

// Command-line front end: run, validate, probe, autoloop and report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "orgloop/harness.hpp"
#include "orgloop/plasticity.hpp"
#include "orgloop/protocol.hpp"
#include "orgloop/protocol_spec.hpp"

namespace fs = std::filesystem;
using namespace orgloop;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

harness::ExperimentConfig load_or_default(const std::string& path) {
  if (path.empty()) return harness::config_from_json(nlohmann::json::object());
  return harness::load_config(path);
}

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--out", f.out, "Output directory");
}

int cmd_run(const CommonFlags& f, bool baseline, int parallel) {
  auto cfg = load_or_default(f.config);
  if (f.seed) cfg.run.seed = *f.seed;
  if (baseline) cfg.run.baseline_random = true;
  cfg.output_dir.clear();

  std::vector<harness::ExperimentConfig> cfgs;
  for (int i = 0; i < parallel; ++i) {
    auto c = cfg;
    c.run.seed = cfg.run.seed + static_cast<std::uint64_t>(i);
    cfgs.push_back(std::move(c));
  }
  const auto results = harness::run_experiments(cfgs, parallel);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (!f.out.empty()) {
      fs::path dir = f.out;
      if (parallel > 1) dir /= fmt::format("seed_{}", r.record.seed);
      harness::write_outputs(r, dir);
    }
    std::cout << harness::summary(r.record);
    if (i + 1 < results.size()) std::cout << '\n';
  }
  return 0;
}

int cmd_validate(const std::string& path) {
  const auto parsed = protocol::parse_protocol(read_file(path));
  auto errors = parsed.errors;
  if (parsed.spec) errors = protocol::validate(*parsed.spec);
  if (errors.empty()) {
    std::cout << "ok: " << protocol::describe(*parsed.spec) << '\n';
    return 0;
  }
  for (const auto& e : errors) std::cout << protocol::to_string(e) << '\n';
  return 1;
}

int cmd_probe(const CommonFlags& f) {
  auto cfg = load_or_default(f.config);
  if (f.seed) cfg.run.seed = *f.seed;
  const auto layout = harness::layout_for(cfg);
  auto agent = harness::build_agent(cfg, layout);
  const auto electrode = cfg.probe.electrode.value_or(layout.c().electrodes.front());
  const auto m =
      probe::measure_fepsp(agent, layout, electrode, layout.group(cfg.probe.group), cfg.probe.pulse);
  nlohmann::ordered_json j{{"probe_electrode", m.probe_electrode},
                           {"record_group", m.record_group},
                           {"slope", m.slope},
                           {"trace", m.trace}};
  const auto text = j.dump(2);
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    std::ofstream(fs::path(f.out) / "probe.json") << text << '\n';
  }
  std::cout << text << '\n';
  return 0;
}

int cmd_autoloop(const CommonFlags& f, int iterations, const std::string& stub_path,
                 const std::string& generator_path, int blocks, int refine_every) {
  protocol::MetaLoopConfig mc;
  mc.experiment = load_or_default(f.config);
  if (f.seed) mc.experiment.run.seed = *f.seed;
  mc.experiment.output_dir.clear();
  mc.iterations = iterations;
  mc.blocks = blocks;
  mc.refine_every = refine_every;
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    mc.dataset_path = fs::path(f.out) / "dataset.jsonl";
  }

  std::unique_ptr<protocol::Generator> generator;
  if (!stub_path.empty()) {
    generator = std::make_unique<protocol::StubGenerator>(protocol::StubGenerator::load(stub_path));
  } else if (!generator_path.empty()) {
    protocol::HttpGeneratorConfig gc = nlohmann::json::parse(read_file(generator_path));
    generator = std::make_unique<protocol::HttpGenerator>(gc);
  } else {
    throw CLI::ValidationError("autoloop", "needs --stub-responses or --generator");
  }

  const auto result = protocol::meta_loop(mc, *generator);
  if (!f.out.empty()) {
    std::ofstream(fs::path(f.out) / "template.txt") << result.final_template;
  }
  for (const auto& r : result.dataset) {
    std::cout << fmt::format("iteration {}: {}", r.iteration, protocol::to_string(r.status));
    if (r.primary_value) std::cout << fmt::format(" {} = {:.3f}", *r.primary_metric, *r.primary_value);
    std::cout << '\n';
  }
  std::cout << fmt::format("refinements: {}\n", result.refinements);
  return 0;
}

int cmd_report(const std::string& record_path, const std::string& out) {
  const auto record = harness::record_from_json(nlohmann::json::parse(read_file(record_path)));
  std::cout << harness::summary(record);
  if (out.empty()) {
    std::cout << '\n';
    harness::write_metrics_csv(std::cout, record);
  } else {
    fs::create_directories(out);
    std::ofstream csv(fs::path(out) / "metrics.csv");
    harness::write_metrics_csv(csv, record);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop training of a surrogate neural culture"};
  app.require_subcommand(1);

  CommonFlags run_f, probe_f, loop_f;
  bool baseline = false;
  int parallel = 1;
  auto* run = app.add_subcommand("run", "Run one experiment");
  add_common(run, run_f);
  run->add_flag("--baseline-random", baseline, "Draw actions uniformly instead of decoding");
  run->add_option("--parallel", parallel, "Independent seeds seed..seed+N-1, one per worker")
      ->check(CLI::PositiveNumber);

  std::string protocol_path;
  auto* validate = app.add_subcommand("validate", "Check a protocol document");
  validate->add_option("protocol", protocol_path, "Protocol document (JSON)")->required();

  auto* probe = app.add_subcommand("probe", "Take one fEPSP measurement");
  add_common(probe, probe_f);

  int iterations = 10, blocks = 2, refine_every = 5;
  std::string stub_path, generator_path;
  auto* loop = app.add_subcommand("autoloop", "Generate, validate and run protocols");
  add_common(loop, loop_f);
  loop->add_option("--iterations", iterations, "Loop iterations")->check(CLI::NonNegativeNumber);
  loop->add_option("--blocks", blocks, "Blocks per executed protocol")->check(CLI::PositiveNumber);
  loop->add_option("--refine-every", refine_every, "Iterations between template refinements")
      ->check(CLI::NonNegativeNumber);
  loop->add_option("--stub-responses", stub_path, "Replay generator responses from a JSON array");
  loop->add_option("--generator", generator_path, "HTTP generator settings (JSON)");

  std::string record_path, report_out;
  auto* report = app.add_subcommand("report", "Summarize a record and export its CSV");
  report->add_option("record", record_path, "record.json")->required();
  report->add_option("--out", report_out, "Directory for metrics.csv (default: stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_f, baseline, parallel);
    if (*validate) return cmd_validate(protocol_path);
    if (*probe) return cmd_probe(probe_f);
    if (*loop) return cmd_autoloop(loop_f, iterations, stub_path, generator_path, blocks, refine_every);
    if (*report) return cmd_report(record_path, report_out);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
