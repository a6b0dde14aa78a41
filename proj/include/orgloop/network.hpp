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

// Surrogate spiking network standing in for the biological culture.
//
// Leaky integrate-and-fire neurons with alpha-shaped current synapses, pair-based
// STDP feeding per-synapse eligibility traces, and a scalar neuromodulatory
// signal that converts eligibility into weight change.

#ifndef ORGLOOP_NETWORK_HPP_
#define ORGLOOP_NETWORK_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <set>
#include <span>
#include <vector>

#include <boost/random/normal_distribution.hpp>
#include <json.hpp>

#include "orgloop/mea.hpp"
#include "orgloop/rng.hpp"

namespace orgloop::snn {

using NeuronId = int;

struct StdpParams {
  double a_plus = 1.0;
  double a_minus = 0.6;
  double tau_plus_ms = 20.0;
  double tau_minus_ms = 20.0;
};

enum class KernelPolicy { Serial, Parallel, Auto };

// Which synapses learn. Feedforward: only stimulated-to-recorded synapses.
enum class PlasticSynapses { All, Feedforward };

// Competition between recording electrodes. Each recording electrode gets
// `interneurons` inhibitory cells that it drives and that inhibit every other
// recording electrode's neurons; its own neurons excite each other.
struct MotorCompetition {
  int interneurons = 8;  // per recording electrode; 0 disables competition
  double self_excitation = 4.0;
  double interneuron_drive = 8.0;
  double inhibition = 8.0;
};

struct NetworkConfig {
  int n_neurons = 256;
  double excitatory_fraction = 0.8;
  double connection_probability = 0.1;
  // Connection probability from stimulated onto recorded neurons, replacing
  // connection_probability for those pairs.
  double feedforward_probability = 0.5;
  double weight_mean = 2.0;
  double weight_std = 0.5;
  double w_max = 8.0;
  double inhibitory_scale = 2.0;  // inhibitory weights are -scale * |N(mean, std)|

  double tau_membrane_ms = 20.0;
  double v_rest = 0.0;
  double threshold = 15.0;
  double reset = 0.0;
  double resistance = 1.0;
  double tau_synapse_ms = 5.0;
  double refractory_ms = 2.0;
  double adaptation_increment = 5.0;  // added to the adaptation current per spike
  double tau_adaptation_ms = 100.0;
  double stimulus_gain = 100.0;  // model current per microamp of electrode drive
  // Time constant of the first-order high-pass applied to electrode current;
  // slow waveforms drive the membrane less than fast edges. 0 disables it.
  double accommodation_ms = 1.0;

  MotorCompetition motor;

  StdpParams stdp;
  double eligibility_tau_ms = 300.0;
  double learning_rate = 4.0;
  PlasticSynapses plastic = PlasticSynapses::Feedforward;
  // After each neuromodulatory update, rescale every neuron's plastic
  // excitatory input weights to their initial sum.
  bool input_normalization = true;

  bool noise_enabled = true;
  double noise_std = 12.0;   // per sqrt(ms)
  double noise_mean = 12.0;  // tonic background current

  std::uint64_t seed = 1;
  std::uint64_t noise_seed = 2;

  KernelPolicy kernels = KernelPolicy::Auto;
  int parallel_threshold = 4096;  // Auto goes parallel at this many neurons
                                  // when OpenMP has more than one thread

  // Throws std::invalid_argument when out of range.
  void validate() const;
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

// Which neurons each electrode drives (stimulation) or reads (recording).
struct ElectrodeMap {
  std::map<mea::ElectrodeId, std::vector<NeuronId>> neurons;
  // Recording electrodes. The rest of `neurons` are stimulation electrodes.
  std::set<mea::ElectrodeId> outputs;

  const std::vector<NeuronId>& of(mea::ElectrodeId e) const;
  // Union of the neurons behind a group's electrodes, sorted, deduplicated.
  std::vector<NeuronId> of_group(const mea::ElectrodeGroup& g) const;

  // Recording electrodes get `per_record` dedicated excitatory neurons each.
  // Stimulation electrodes get `per_stim` excitatory neurons each, drawn from
  // the remaining excitatory pool; stimulation sets may overlap.
  static ElectrodeMap standard(const mea::MeaLayout& layout,
                               const NetworkConfig& cfg, int per_stim = 8,
                               int per_record = 8);
};

void to_json(nlohmann::json& j, const ElectrodeMap& m);
void from_json(const nlohmann::json& j, ElectrodeMap& m);

struct SynapseSpec {
  NeuronId pre = 0;
  NeuronId post = 0;
  double weight = 0.0;
};

// The agent. Exclusively owned by one experiment loop.
class Agent {
 public:
  // Random topology and weights drawn from cfg.seed, then the motor
  // competition wiring. Throws if the map names a neuron outside
  // [0, n_neurons), or there are too few inhibitory neurons for the
  // interneurons.
  static Agent create(const NetworkConfig& cfg, ElectrodeMap map);
  // Explicit topology; used by probes and tests.
  static Agent from_synapses(const NetworkConfig& cfg, ElectrodeMap map,
                             std::span<const SynapseSpec> synapses);

  // Advances one integration step. `injected` is an additional per-neuron
  // current (empty means none). Returns the neurons that spiked, ascending.
  std::vector<NeuronId> step(double dt_ms, std::span<const double> injected = {});

  // Steps until `duration_ms` has elapsed. Returns the spikes of every step
  // concatenated with their offsets from the start.
  struct TimedSpike {
    double t_ms;
    NeuronId neuron;
  };
  std::vector<TimedSpike> run(double duration_ms, double dt_ms = 1.0);

  // dw = learning_rate * signal * eligibility on every synapse, then clipping.
  // Eligibility traces are left as they are. Throws if |signal| > 1.
  void apply_neuromodulation(double signal);
  // Rescales each neuron's plastic excitatory input weights to the sum they had
  // at creation. No-op while frozen.
  void normalize_inputs();

  void freeze_plasticity(bool frozen) { frozen_ = frozen; }
  bool plasticity_frozen() const { return frozen_; }

  // Queues an electrode current (samples in microamps every `sample_dt_ms`)
  // into `neurons`, starting at the current clock. The current passes the
  // accommodation high-pass before it reaches the membranes.
  void inject_series(std::vector<NeuronId> neurons, std::vector<double> samples,
                     double sample_dt_ms);

  const NetworkConfig& config() const { return cfg_; }
  const ElectrodeMap& electrode_map() const { return map_; }
  int size() const { return cfg_.n_neurons; }
  double clock_ms() const { return static_cast<double>(clock_us_) * 1e-3; }
  std::int64_t clock_us() const { return clock_us_; }
  bool is_excitatory(NeuronId n) const { return n < n_excitatory_; }
  bool is_plastic(std::size_t synapse) const { return plastic_[synapse] != 0; }

  std::size_t synapse_count() const { return pre_.size(); }
  std::span<const int> synapse_pre() const { return pre_; }
  std::span<const int> synapse_post() const { return post_; }
  std::span<const double> weights() const { return weight_; }
  std::span<const double> membrane() const { return v_; }
  std::span<const double> synaptic_current() const { return syn_current_; }
  // Eligibility of every synapse decayed to the current clock.
  std::vector<double> eligibility() const;
  std::span<const double> pre_trace() const { return pre_trace_; }
  std::span<const double> post_trace() const { return post_trace_; }
  // Electrode current delivered to each neuron on the last step, and the sum of
  // that current over all steps so far (current x ms).
  std::span<const double> last_external_current() const { return external_; }
  std::span<const double> external_charge() const { return external_charge_; }

  // Direct weight access for probe set-ups.
  void set_weight(std::size_t synapse, double w);

  // Membranes, synaptic filters, refractoriness, adaptation, traces, pending
  // stimuli, clock and noise state.
  struct Dynamics;
  Dynamics save_dynamics() const;
  void restore_dynamics(const Dynamics& d);
  // Resting membranes, empty synaptic filters, no refractoriness or
  // adaptation, no pending stimuli.
  void quiesce();
  void set_noise(bool enabled) { noise_on_ = enabled; }
  bool noise() const { return noise_on_; }

  // CSV rows: neuron_pre,neuron_post,weight
  void export_weights_csv(std::ostream& os) const;

 private:
  struct PendingStimulus {
    std::vector<NeuronId> neurons;
    std::vector<double> samples;
    std::int64_t start_us = 0;
    std::int64_t sample_dt_us = 100;
  };

  Agent(const NetworkConfig& cfg, ElectrodeMap map);
  void build_index(std::vector<SynapseSpec> synapses);
  bool use_parallel() const;
  // Per-neuron flags: mapped to a stimulation / recording electrode.
  std::vector<std::uint8_t> input_neurons() const;
  std::vector<std::uint8_t> output_neurons() const;
  void gather_external(std::int64_t dt_us);
  void update_plasticity(std::span<const int> spikes, double dt_ms);
  // Factor converting stored eligibility to its value at the current clock.
  double eligibility_scale() const;

  NetworkConfig cfg_;
  ElectrodeMap map_;
  int n_excitatory_ = 0;

  // Synapses sorted by (pre, post).
  std::vector<int> pre_;
  std::vector<int> post_;
  std::vector<double> weight_;
  // Stored as e * exp((clock - epoch) / tau): one shared decay per step
  // instead of one per synapse. Rebased when the factor grows large.
  std::vector<double> eligibility_;
  std::int64_t eligibility_epoch_us_ = 0;
  std::vector<std::uint8_t> excitatory_pre_;
  std::vector<std::uint8_t> plastic_;
  std::vector<double> input_target_;  // initial plastic excitatory input per neuron
  std::vector<std::int64_t> out_offsets_;
  std::vector<std::int64_t> in_offsets_;
  std::vector<int> in_synapses_;

  std::vector<double> v_;
  std::vector<double> syn_rise_;
  std::vector<double> syn_current_;
  std::vector<double> refractory_;
  std::vector<double> adaptation_;
  std::vector<double> pre_trace_;
  std::vector<double> post_trace_;
  std::vector<double> external_;
  std::vector<double> external_charge_;
  std::vector<double> incoming_;
  std::vector<double> drive_;
  std::vector<std::uint8_t> spiked_;
  std::vector<PendingStimulus> pending_;

  std::int64_t clock_us_ = 0;
  bool frozen_ = false;
  bool noise_on_ = true;
  SplitMix64 noise_rng_;
  boost::random::normal_distribution<double> noise_dist_;
};

struct Agent::Dynamics {
  std::vector<double> v, syn_rise, syn_current, refractory, adaptation, pre_trace,
      post_trace;
  std::vector<PendingStimulus> pending;
  std::int64_t clock_us = 0;
  SplitMix64 noise_rng;
  boost::random::normal_distribution<double> noise_dist;
  bool noise_on = true;
};

}  // namespace orgloop::snn

#endif  // ORGLOOP_NETWORK_HPP_
