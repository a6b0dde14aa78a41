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

#include "orgloop/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <omp.h>

#include "orgloop/kernels.hpp"

namespace orgloop::snn {

void NetworkConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(fmt::format("NetworkConfig: {}", what));
  };
  require(n_neurons > 0, "n_neurons must be positive");
  require(excitatory_fraction > 0.0 && excitatory_fraction <= 1.0,
          "excitatory_fraction must be in (0, 1]");
  require(connection_probability >= 0.0 && connection_probability <= 1.0,
          "connection_probability must be in [0, 1]");
  require(feedforward_probability >= 0.0 && feedforward_probability <= 1.0,
          "feedforward_probability must be in [0, 1]");
  require(weight_std >= 0.0, "weight_std must be >= 0");
  require(w_max > 0.0, "w_max must be > 0");
  require(tau_membrane_ms > 0.0, "tau_membrane_ms must be > 0");
  require(tau_synapse_ms > 0.0, "tau_synapse_ms must be > 0");
  require(accommodation_ms >= 0.0, "accommodation_ms must be >= 0");
  require(refractory_ms >= 0.0, "refractory_ms must be >= 0");
  require(adaptation_increment >= 0.0, "adaptation_increment must be >= 0");
  require(tau_adaptation_ms > 0.0, "tau_adaptation_ms must be > 0");
  require(stdp.tau_plus_ms > 0.0 && stdp.tau_minus_ms > 0.0,
          "STDP time constants must be > 0");
  require(eligibility_tau_ms > 0.0, "eligibility_tau_ms must be > 0");
  require(motor.interneurons >= 0, "motor.interneurons must be >= 0");
  require(motor.self_excitation >= 0.0 && motor.interneuron_drive >= 0.0 &&
              motor.inhibition >= 0.0,
          "motor competition weights must be >= 0");
  require(threshold > reset, "threshold must exceed reset");
  require(noise_std >= 0.0, "noise_std must be >= 0");
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = nlohmann::json{
      {"n_neurons", c.n_neurons},
      {"excitatory_fraction", c.excitatory_fraction},
      {"connection_probability", c.connection_probability},
      {"feedforward_probability", c.feedforward_probability},
      {"weight_mean", c.weight_mean},
      {"weight_std", c.weight_std},
      {"w_max", c.w_max},
      {"inhibitory_scale", c.inhibitory_scale},
      {"tau_membrane_ms", c.tau_membrane_ms},
      {"v_rest", c.v_rest},
      {"threshold", c.threshold},
      {"reset", c.reset},
      {"resistance", c.resistance},
      {"tau_synapse_ms", c.tau_synapse_ms},
      {"refractory_ms", c.refractory_ms},
      {"adaptation_increment", c.adaptation_increment},
      {"tau_adaptation_ms", c.tau_adaptation_ms},
      {"stimulus_gain", c.stimulus_gain},
      {"accommodation_ms", c.accommodation_ms},
      {"stdp",
       {{"a_plus", c.stdp.a_plus},
        {"a_minus", c.stdp.a_minus},
        {"tau_plus_ms", c.stdp.tau_plus_ms},
        {"tau_minus_ms", c.stdp.tau_minus_ms}}},
      {"motor",
       {{"interneurons", c.motor.interneurons},
        {"self_excitation", c.motor.self_excitation},
        {"interneuron_drive", c.motor.interneuron_drive},
        {"inhibition", c.motor.inhibition}}},
      {"eligibility_tau_ms", c.eligibility_tau_ms},
      {"learning_rate", c.learning_rate},
      {"plastic", c.plastic == PlasticSynapses::All ? "all" : "feedforward"},
      {"input_normalization", c.input_normalization},
      {"noise_enabled", c.noise_enabled},
      {"noise_std", c.noise_std},
      {"noise_mean", c.noise_mean},
      {"seed", c.seed},
      {"noise_seed", c.noise_seed},
      {"parallel_threshold", c.parallel_threshold},
      {"kernels", c.kernels == KernelPolicy::Serial     ? "serial"
                  : c.kernels == KernelPolicy::Parallel ? "parallel"
                                                        : "auto"},
  };
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
  // Missing keys keep their defaults so config files can stay short.
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("n_neurons", c.n_neurons);
  get("excitatory_fraction", c.excitatory_fraction);
  get("connection_probability", c.connection_probability);
  get("feedforward_probability", c.feedforward_probability);
  get("weight_mean", c.weight_mean);
  get("weight_std", c.weight_std);
  get("w_max", c.w_max);
  get("inhibitory_scale", c.inhibitory_scale);
  get("tau_membrane_ms", c.tau_membrane_ms);
  get("v_rest", c.v_rest);
  get("threshold", c.threshold);
  get("reset", c.reset);
  get("resistance", c.resistance);
  get("tau_synapse_ms", c.tau_synapse_ms);
  get("refractory_ms", c.refractory_ms);
  get("adaptation_increment", c.adaptation_increment);
  get("tau_adaptation_ms", c.tau_adaptation_ms);
  get("stimulus_gain", c.stimulus_gain);
  get("accommodation_ms", c.accommodation_ms);
  if (j.contains("stdp")) {
    const auto& s = j.at("stdp");
    if (s.contains("a_plus")) s.at("a_plus").get_to(c.stdp.a_plus);
    if (s.contains("a_minus")) s.at("a_minus").get_to(c.stdp.a_minus);
    if (s.contains("tau_plus_ms")) s.at("tau_plus_ms").get_to(c.stdp.tau_plus_ms);
    if (s.contains("tau_minus_ms")) s.at("tau_minus_ms").get_to(c.stdp.tau_minus_ms);
  }
  if (j.contains("motor")) {
    const auto& m = j.at("motor");
    if (m.contains("interneurons")) m.at("interneurons").get_to(c.motor.interneurons);
    if (m.contains("self_excitation")) m.at("self_excitation").get_to(c.motor.self_excitation);
    if (m.contains("interneuron_drive")) {
      m.at("interneuron_drive").get_to(c.motor.interneuron_drive);
    }
    if (m.contains("inhibition")) m.at("inhibition").get_to(c.motor.inhibition);
  }
  get("eligibility_tau_ms", c.eligibility_tau_ms);
  get("learning_rate", c.learning_rate);
  if (j.contains("plastic")) {
    const auto p = j.at("plastic").get<std::string>();
    if (p == "all") c.plastic = PlasticSynapses::All;
    else if (p == "feedforward") c.plastic = PlasticSynapses::Feedforward;
    else throw std::invalid_argument(fmt::format("unknown plastic synapse set '{}'", p));
  }
  get("input_normalization", c.input_normalization);
  get("noise_enabled", c.noise_enabled);
  get("noise_std", c.noise_std);
  get("noise_mean", c.noise_mean);
  get("seed", c.seed);
  get("noise_seed", c.noise_seed);
  get("parallel_threshold", c.parallel_threshold);
  if (j.contains("kernels")) {
    const auto k = j.at("kernels").get<std::string>();
    if (k == "serial") c.kernels = KernelPolicy::Serial;
    else if (k == "parallel") c.kernels = KernelPolicy::Parallel;
    else if (k == "auto") c.kernels = KernelPolicy::Auto;
    else throw std::invalid_argument(fmt::format("unknown kernel policy '{}'", k));
  }
}

const std::vector<NeuronId>& ElectrodeMap::of(mea::ElectrodeId e) const {
  auto it = neurons.find(e);
  if (it == neurons.end()) {
    throw std::out_of_range(fmt::format("electrode {} is not mapped", e));
  }
  return it->second;
}

std::vector<NeuronId> ElectrodeMap::of_group(const mea::ElectrodeGroup& g) const {
  std::vector<NeuronId> out;
  for (auto e : g.electrodes) {
    const auto& ns = of(e);
    out.insert(out.end(), ns.begin(), ns.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ElectrodeMap ElectrodeMap::standard(const mea::MeaLayout& layout,
                                    const NetworkConfig& cfg, int per_stim,
                                    int per_record) {
  const int n_exc = std::max(
      1, static_cast<int>(std::lround(cfg.n_neurons * cfg.excitatory_fraction)));
  std::vector<NeuronId> pool(n_exc);
  std::iota(pool.begin(), pool.end(), 0);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(pool.begin(), pool.end(), rng);

  ElectrodeMap map;
  std::size_t next = 0;
  for (const auto& g : layout.groups()) {
    if (g.role != mea::GroupRole::Record) continue;
    for (auto e : g.electrodes) {
      if (next + per_record > pool.size()) {
        throw std::invalid_argument("not enough excitatory neurons for recording");
      }
      std::vector<NeuronId> ns(pool.begin() + next, pool.begin() + next + per_record);
      std::sort(ns.begin(), ns.end());
      map.neurons[e] = std::move(ns);
      map.outputs.insert(e);
      next += per_record;
    }
  }
  std::vector<NeuronId> rest(pool.begin() + next, pool.end());
  if (rest.empty()) throw std::invalid_argument("no neurons left for stimulation");
  std::size_t cursor = 0;
  for (const auto& g : layout.groups()) {
    if (g.role != mea::GroupRole::Stimulate) continue;
    for (auto e : g.electrodes) {
      std::vector<NeuronId> ns;
      for (int k = 0; k < per_stim; ++k) {
        if (cursor == rest.size()) {
          // Pool exhausted: later electrodes reuse neurons in a new order.
          std::shuffle(rest.begin(), rest.end(), rng);
          cursor = 0;
        }
        ns.push_back(rest[cursor++]);
      }
      std::sort(ns.begin(), ns.end());
      ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
      map.neurons[e] = std::move(ns);
    }
  }
  return map;
}

void to_json(nlohmann::json& j, const ElectrodeMap& m) {
  nlohmann::json neurons = nlohmann::json::object();
  for (const auto& [e, ns] : m.neurons) neurons[std::to_string(e)] = ns;
  j = {{"neurons", neurons}, {"outputs", m.outputs}};
}

void from_json(const nlohmann::json& j, ElectrodeMap& m) {
  m.neurons.clear();
  for (const auto& [key, value] : j.at("neurons").items()) {
    m.neurons[std::stoi(key)] = value.get<std::vector<NeuronId>>();
  }
  m.outputs = j.value("outputs", std::set<mea::ElectrodeId>{});
}

Agent::Agent(const NetworkConfig& cfg, ElectrodeMap map)
    : cfg_(cfg), map_(std::move(map)) {
  cfg_.validate();
  n_excitatory_ = std::max(
      1, static_cast<int>(std::lround(cfg_.n_neurons * cfg_.excitatory_fraction)));
  for (const auto& [e, ns] : map_.neurons) {
    if (ns.empty()) {
      throw std::invalid_argument(fmt::format("electrode {} maps to no neuron", e));
    }
    for (auto n : ns) {
      if (n < 0 || n >= cfg_.n_neurons) {
        throw std::invalid_argument(fmt::format(
            "electrode {} maps to neuron {} outside the network", e, n));
      }
    }
  }
  const auto n = static_cast<std::size_t>(cfg_.n_neurons);
  v_.assign(n, cfg_.v_rest);
  syn_rise_.assign(n, 0.0);
  syn_current_.assign(n, 0.0);
  refractory_.assign(n, 0.0);
  adaptation_.assign(n, 0.0);
  pre_trace_.assign(n, 0.0);
  post_trace_.assign(n, 0.0);
  external_.assign(n, 0.0);
  external_charge_.assign(n, 0.0);
  incoming_.assign(n, 0.0);
  drive_.assign(n, 0.0);
  spiked_.assign(n, 0);
  noise_rng_ = SplitMix64(cfg_.noise_seed);
  noise_on_ = cfg_.noise_enabled;
}

Agent Agent::create(const NetworkConfig& cfg, ElectrodeMap map) {
  Agent agent(cfg, std::move(map));
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> w(cfg.weight_mean, cfg.weight_std);
  const auto n = static_cast<std::size_t>(cfg.n_neurons);
  const auto input = agent.input_neurons();
  const auto output = agent.output_neurons();
  // Dense pre-major tables so the competition wiring can overwrite pairs.
  std::vector<double> table(n * n, 0.0);
  std::vector<std::uint8_t> present(n * n, 0);
  for (NeuronId pre = 0; pre < cfg.n_neurons; ++pre) {
    for (NeuronId post = 0; post < cfg.n_neurons; ++post) {
      if (pre == post) continue;
      const bool feedforward = input[static_cast<std::size_t>(pre)] &&
                               output[static_cast<std::size_t>(post)];
      const double p = feedforward ? cfg.feedforward_probability : cfg.connection_probability;
      if (!(coin(rng) < p)) continue;
      double weight = w(rng);
      if (agent.is_excitatory(pre)) {
        weight = std::clamp(weight, 0.0, cfg.w_max);
      } else {
        weight = -std::clamp(cfg.inhibitory_scale * std::abs(weight), 0.0, cfg.w_max);
      }
      const auto k = static_cast<std::size_t>(pre) * n + static_cast<std::size_t>(post);
      table[k] = weight;
      present[k] = 1;
    }
  }
  auto set = [&](NeuronId pre, NeuronId post, double weight) {
    const auto k = static_cast<std::size_t>(pre) * n + static_cast<std::size_t>(post);
    table[k] = weight;
    present[k] = 1;
  };
  const auto& m = agent.map_;
  const int per = cfg.motor.interneurons;
  if (per > 0 && m.outputs.size() > 1) {
    const int groups = static_cast<int>(m.outputs.size());
    const int n_inh = cfg.n_neurons - agent.n_excitatory_;
    if (per * groups > n_inh) {
      throw std::invalid_argument(fmt::format(
          "motor competition needs {} inhibitory neurons, the network has {}",
          per * groups, n_inh));
    }
    const double w_drive = std::min(cfg.motor.interneuron_drive, cfg.w_max);
    const double w_inh = -std::min(cfg.motor.inhibition, cfg.w_max);
    const double w_self = std::min(cfg.motor.self_excitation, cfg.w_max);
    // Interneurons are the highest-numbered inhibitory neurons.
    NeuronId next = cfg.n_neurons - per * groups;
    for (auto e : m.outputs) {
      const auto& own = m.of(e);
      for (int i = 0; i < per; ++i, ++next) {
        for (auto x : own) set(x, next, w_drive);
        for (auto f : m.outputs) {
          if (f == e) continue;
          for (auto y : m.of(f)) set(next, y, w_inh);
        }
      }
      if (w_self > 0.0) {
        for (auto x : own) {
          for (auto y : own) {
            if (x != y) set(x, y, w_self);
          }
        }
      }
    }
  }
  std::vector<SynapseSpec> synapses;
  for (std::size_t k = 0; k < table.size(); ++k) {
    if (present[k]) {
      synapses.push_back({static_cast<NeuronId>(k / n), static_cast<NeuronId>(k % n), table[k]});
    }
  }
  agent.build_index(std::move(synapses));
  return agent;
}

std::vector<std::uint8_t> Agent::input_neurons() const {
  std::vector<std::uint8_t> flag(static_cast<std::size_t>(cfg_.n_neurons), 0);
  for (const auto& [e, ns] : map_.neurons) {
    if (map_.outputs.count(e)) continue;
    for (auto x : ns) flag[static_cast<std::size_t>(x)] = 1;
  }
  return flag;
}

std::vector<std::uint8_t> Agent::output_neurons() const {
  std::vector<std::uint8_t> flag(static_cast<std::size_t>(cfg_.n_neurons), 0);
  for (auto e : map_.outputs) {
    for (auto x : map_.of(e)) flag[static_cast<std::size_t>(x)] = 1;
  }
  return flag;
}

Agent Agent::from_synapses(const NetworkConfig& cfg, ElectrodeMap map,
                           std::span<const SynapseSpec> synapses) {
  Agent agent(cfg, std::move(map));
  std::vector<SynapseSpec> list(synapses.begin(), synapses.end());
  for (const auto& s : list) {
    if (s.pre < 0 || s.pre >= cfg.n_neurons || s.post < 0 ||
        s.post >= cfg.n_neurons || s.pre == s.post) {
      throw std::invalid_argument(
          fmt::format("bad synapse {} -> {}", s.pre, s.post));
    }
  }
  agent.build_index(std::move(list));
  return agent;
}

void Agent::build_index(std::vector<SynapseSpec> synapses) {
  std::sort(synapses.begin(), synapses.end(), [](const auto& a, const auto& b) {
    return std::tie(a.pre, a.post) < std::tie(b.pre, b.post);
  });
  const auto n = static_cast<std::size_t>(cfg_.n_neurons);
  const auto m = synapses.size();
  pre_.resize(m);
  post_.resize(m);
  weight_.resize(m);
  excitatory_pre_.resize(m);
  eligibility_.assign(m, 0.0);
  eligibility_epoch_us_ = clock_us_;
  out_offsets_.assign(n + 1, 0);
  in_offsets_.assign(n + 1, 0);
  for (std::size_t s = 0; s < m; ++s) {
    pre_[s] = synapses[s].pre;
    post_[s] = synapses[s].post;
    excitatory_pre_[s] = is_excitatory(pre_[s]) ? 1 : 0;
    const double bound = cfg_.w_max;
    weight_[s] = excitatory_pre_[s] ? std::clamp(synapses[s].weight, 0.0, bound)
                                    : std::clamp(synapses[s].weight, -bound, 0.0);
    ++out_offsets_[pre_[s] + 1];
    ++in_offsets_[post_[s] + 1];
  }
  std::partial_sum(out_offsets_.begin(), out_offsets_.end(), out_offsets_.begin());
  std::partial_sum(in_offsets_.begin(), in_offsets_.end(), in_offsets_.begin());
  plastic_.assign(m, 1);
  if (cfg_.plastic == PlasticSynapses::Feedforward) {
    const auto input = input_neurons();
    const auto output = output_neurons();
    for (std::size_t s = 0; s < m; ++s) {
      plastic_[s] = input[pre_[s]] && output[post_[s]] ? 1 : 0;
    }
  }
  input_target_.assign(n, 0.0);
  for (std::size_t s = 0; s < m; ++s) {
    if (excitatory_pre_[s] && plastic_[s]) input_target_[post_[s]] += weight_[s];
  }
  in_synapses_.assign(m, 0);
  std::vector<std::int64_t> fill(in_offsets_.begin(), in_offsets_.end() - 1);
  // Synapses are visited in ascending pre order, so each incoming list ends up
  // sorted by presynaptic neuron.
  for (std::size_t s = 0; s < m; ++s) {
    in_synapses_[fill[post_[s]]++] = static_cast<int>(s);
  }
}

bool Agent::use_parallel() const {
  switch (cfg_.kernels) {
    case KernelPolicy::Serial: return false;
    case KernelPolicy::Parallel: return true;
    case KernelPolicy::Auto:
      return cfg_.n_neurons >= cfg_.parallel_threshold && omp_get_max_threads() > 1;
  }
  return false;
}

void Agent::inject_series(std::vector<NeuronId> neurons,
                          std::vector<double> samples, double sample_dt_ms) {
  if (!(sample_dt_ms > 0.0)) throw std::invalid_argument("sample dt must be > 0");
  for (auto n : neurons) {
    if (n < 0 || n >= cfg_.n_neurons) {
      throw std::invalid_argument(fmt::format("neuron {} outside the network", n));
    }
  }
  if (cfg_.accommodation_ms > 0.0 && !samples.empty()) {
    const double a = cfg_.accommodation_ms / (cfg_.accommodation_ms + sample_dt_ms);
    double prev_in = 0.0;
    double out = 0.0;
    for (auto& x : samples) {
      out = a * (out + x - prev_in);
      prev_in = x;
      x = out;
    }
  }
  PendingStimulus p;
  p.neurons = std::move(neurons);
  p.samples = std::move(samples);
  p.start_us = clock_us_;
  p.sample_dt_us = std::max<std::int64_t>(1, std::llround(sample_dt_ms * 1000.0));
  pending_.push_back(std::move(p));
}

void Agent::gather_external(std::int64_t dt_us) {
  std::fill(external_.begin(), external_.end(), 0.0);
  const std::int64_t t0 = clock_us_;
  const std::int64_t t1 = clock_us_ + dt_us;
  for (const auto& p : pending_) {
    const auto n = static_cast<std::int64_t>(p.samples.size());
    // Samples whose start time lies in [t0, t1).
    auto first = (t0 - p.start_us + p.sample_dt_us - 1) / p.sample_dt_us;
    auto last = (t1 - p.start_us + p.sample_dt_us - 1) / p.sample_dt_us;
    first = std::clamp<std::int64_t>(first, 0, n);
    last = std::clamp<std::int64_t>(last, 0, n);
    if (first >= last) continue;
    double sum = 0.0;
    for (auto k = first; k < last; ++k) sum += std::abs(p.samples[k]);
    // Rectified electrode current averaged over the step.
    const double drive = cfg_.stimulus_gain * sum *
                         static_cast<double>(p.sample_dt_us) /
                         static_cast<double>(dt_us);
    for (auto neuron : p.neurons) external_[neuron] += drive;
  }
  std::erase_if(pending_, [&](const PendingStimulus& p) {
    return p.start_us + static_cast<std::int64_t>(p.samples.size()) * p.sample_dt_us <= t1;
  });
  const double dt_ms = static_cast<double>(dt_us) * 1e-3;
  for (std::size_t i = 0; i < external_.size(); ++i) {
    external_charge_[i] += external_[i] * dt_ms;
  }
}

std::vector<NeuronId> Agent::step(double dt_ms, std::span<const double> injected) {
  if (!(dt_ms > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (!injected.empty() && injected.size() != external_.size()) {
    throw std::invalid_argument("injected current must cover every neuron");
  }
  const auto dt_us = std::max<std::int64_t>(1, std::llround(dt_ms * 1000.0));
  const double dt = static_cast<double>(dt_us) * 1e-3;

  gather_external(dt_us);
  // The drive fed to the membranes adds direct injection and background noise
  // on top of the electrode current kept in external_.
  std::copy(external_.begin(), external_.end(), drive_.begin());
  if (!injected.empty()) {
    for (std::size_t i = 0; i < drive_.size(); ++i) drive_[i] += injected[i];
  }
  if (noise_on_ && cfg_.noise_std > 0.0) {
    const double scale = cfg_.noise_std / std::sqrt(dt);
    for (auto& d : drive_) d += cfg_.noise_mean + scale * noise_dist_(noise_rng_);
  }

  kernels::LifParams lif{
      .dt_over_tau_m = dt / cfg_.tau_membrane_ms,
      .v_rest = cfg_.v_rest,
      .threshold = cfg_.threshold,
      .reset = cfg_.reset,
      .resistance = cfg_.resistance,
      .syn_decay = std::exp(-dt / cfg_.tau_synapse_ms),
      .dt_over_tau_syn = dt / cfg_.tau_synapse_ms,
      .dt_ms = dt,
      .refractory_ms = cfg_.refractory_ms,
      .adaptation_increment = cfg_.adaptation_increment,
      .adaptation_decay = std::exp(-dt / cfg_.tau_adaptation_ms),
  };
  kernels::LifBuffers buffers{v_,          syn_rise_,   syn_current_, refractory_,
                              adaptation_, drive_,      spiked_};
  const bool par = use_parallel();
  const int fired = par ? kernels::parallel::integrate_lif(lif, buffers)
                        : kernels::serial::integrate_lif(lif, buffers);

  std::vector<NeuronId> spikes;
  spikes.reserve(static_cast<std::size_t>(fired));
  for (std::size_t i = 0; i < spiked_.size(); ++i) {
    if (spiked_[i]) spikes.push_back(static_cast<NeuronId>(i));
  }

  if (!spikes.empty()) {
    kernels::SynapseView view{pre_, post_, weight_, out_offsets_, in_offsets_,
                              in_synapses_};
    if (par) {
      kernels::parallel::propagate_spikes(view, spikes, incoming_);
    } else {
      kernels::serial::propagate_spikes(view, spikes, incoming_);
    }
    for (std::size_t i = 0; i < incoming_.size(); ++i) syn_rise_[i] += incoming_[i];
  }

  clock_us_ += dt_us;
  if (frozen_) {
    eligibility_epoch_us_ += dt_us;  // hold the decay factor while frozen
  } else {
    update_plasticity(spikes, dt);
  }
  return spikes;
}

double Agent::eligibility_scale() const {
  const double age_ms = static_cast<double>(clock_us_ - eligibility_epoch_us_) * 1e-3;
  return std::exp(-age_ms / cfg_.eligibility_tau_ms);
}

void Agent::update_plasticity(std::span<const int> spikes, double dt_ms) {
  const double dp = std::exp(-dt_ms / cfg_.stdp.tau_plus_ms);
  const double dm = std::exp(-dt_ms / cfg_.stdp.tau_minus_ms);
  for (auto& x : pre_trace_) x *= dp;
  for (auto& y : post_trace_) y *= dm;

  double scale = eligibility_scale();
  if (scale < 1e-6) {
    for (auto& e : eligibility_) e *= scale;
    eligibility_epoch_us_ = clock_us_;
    scale = 1.0;
  }
  const double gain = 1.0 / scale;
  auto bump = [&](std::size_t s, double delta) { eligibility_[s] += delta * gain; };
  // Pre-before-post: potentiating eligibility from the presynaptic trace.
  for (int i : spikes) {
    for (auto k = in_offsets_[i]; k < in_offsets_[i + 1]; ++k) {
      const auto s = static_cast<std::size_t>(in_synapses_[k]);
      if (!plastic_[s]) continue;
      const double x = pre_trace_[pre_[s]];
      if (x != 0.0) bump(s, cfg_.stdp.a_plus * x);
    }
  }
  // Post-before-pre: depressing eligibility from the postsynaptic trace.
  for (int j : spikes) {
    for (auto s = out_offsets_[j]; s < out_offsets_[j + 1]; ++s) {
      if (!plastic_[static_cast<std::size_t>(s)]) continue;
      const double y = post_trace_[post_[s]];
      if (y != 0.0) bump(static_cast<std::size_t>(s), -cfg_.stdp.a_minus * y);
    }
  }
  for (int n : spikes) {
    pre_trace_[n] += 1.0;
    post_trace_[n] += 1.0;
  }
}

std::vector<Agent::TimedSpike> Agent::run(double duration_ms, double dt_ms) {
  std::vector<TimedSpike> out;
  const std::int64_t start = clock_us_;
  const auto end = start + std::llround(duration_ms * 1000.0);
  while (clock_us_ < end) {
    const double t = static_cast<double>(clock_us_ - start) * 1e-3;
    for (auto n : step(dt_ms)) out.push_back({t, n});
  }
  return out;
}

void Agent::apply_neuromodulation(double signal) {
  if (!(signal >= -1.0 && signal <= 1.0)) {
    throw std::invalid_argument(
        fmt::format("neuromodulatory signal {} outside [-1, 1]", signal));
  }
  if (signal == 0.0 || frozen_) return;
  kernels::ModulationParams p{
      .learning_rate = cfg_.learning_rate,
      .signal = signal,
      .w_max = cfg_.w_max,
      .scale = eligibility_scale(),
  };
  kernels::ModulationBuffers b{weight_, eligibility_, excitatory_pre_, plastic_};
  if (use_parallel()) {
    kernels::parallel::modulate_weights(p, b);
  } else {
    kernels::serial::modulate_weights(p, b);
  }
}

void Agent::normalize_inputs() {
  if (!cfg_.input_normalization || frozen_) return;
  std::vector<double> sum(input_target_.size(), 0.0);
  for (std::size_t s = 0; s < weight_.size(); ++s) {
    if (excitatory_pre_[s] && plastic_[s]) sum[post_[s]] += weight_[s];
  }
  for (std::size_t s = 0; s < weight_.size(); ++s) {
    const auto i = static_cast<std::size_t>(post_[s]);
    if (!excitatory_pre_[s] || !plastic_[s] || !(sum[i] > 0.0)) continue;
    weight_[s] = std::min(weight_[s] * input_target_[i] / sum[i], cfg_.w_max);
  }
}

std::vector<double> Agent::eligibility() const {
  const double scale = eligibility_scale();
  std::vector<double> out(eligibility_.size());
  for (std::size_t s = 0; s < out.size(); ++s) out[s] = eligibility_[s] * scale;
  return out;
}

void Agent::set_weight(std::size_t synapse, double w) {
  if (synapse >= weight_.size()) throw std::out_of_range("no such synapse");
  weight_[synapse] = excitatory_pre_[synapse] ? std::clamp(w, 0.0, cfg_.w_max)
                                              : std::clamp(w, -cfg_.w_max, 0.0);
}

Agent::Dynamics Agent::save_dynamics() const {
  return Dynamics{v_,          syn_rise_,  syn_current_, refractory_, adaptation_,
                  pre_trace_,  post_trace_, pending_,   clock_us_,   noise_rng_,
                  noise_dist_, noise_on_};
}

void Agent::restore_dynamics(const Dynamics& d) {
  v_ = d.v;
  syn_rise_ = d.syn_rise;
  syn_current_ = d.syn_current;
  refractory_ = d.refractory;
  adaptation_ = d.adaptation;
  pre_trace_ = d.pre_trace;
  post_trace_ = d.post_trace;
  pending_ = d.pending;
  // Eligibility is learning state, not dynamics: keep its current value.
  eligibility_epoch_us_ += d.clock_us - clock_us_;
  clock_us_ = d.clock_us;
  noise_rng_ = d.noise_rng;
  noise_dist_ = d.noise_dist;
  noise_on_ = d.noise_on;
}

void Agent::quiesce() {
  std::fill(v_.begin(), v_.end(), cfg_.v_rest);
  std::fill(syn_rise_.begin(), syn_rise_.end(), 0.0);
  std::fill(syn_current_.begin(), syn_current_.end(), 0.0);
  std::fill(refractory_.begin(), refractory_.end(), 0.0);
  std::fill(adaptation_.begin(), adaptation_.end(), 0.0);
  pending_.clear();
}

void Agent::export_weights_csv(std::ostream& os) const {
  os << "neuron_pre,neuron_post,weight\n";
  for (std::size_t s = 0; s < weight_.size(); ++s) {
    os << pre_[s] << ',' << post_[s] << ',' << fmt::format("{}", weight_[s]) << '\n';
  }
}

}  // namespace orgloop::snn
