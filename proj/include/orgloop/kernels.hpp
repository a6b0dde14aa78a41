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

// Inner loops of the surrogate network and the entropy metric.
//
// Every kernel exists twice: `serial` is the reference implementation and
// `parallel` is the OpenMP version. The two must agree bit-for-bit; the unit
// tests and the benchmark compare them. Floating-point sums are always taken
// in the same order in both versions (ascending presynaptic index), which is
// what makes the exact agreement possible.

#ifndef ORGLOOP_KERNELS_HPP_
#define ORGLOOP_KERNELS_HPP_

#include <cstdint>
#include <span>
#include <vector>

namespace orgloop::kernels {

// Synapses are stored sorted by (pre, post). `out_offsets[j]..out_offsets[j+1]`
// indexes the outgoing synapses of neuron j; `in_offsets[i]..in_offsets[i+1]`
// indexes `in_synapses`, the ids of the incoming synapses of neuron i sorted by
// presynaptic index.
struct SynapseView {
  std::span<const int> pre;
  std::span<const int> post;
  std::span<const double> weight;
  std::span<const std::int64_t> out_offsets;
  std::span<const std::int64_t> in_offsets;
  std::span<const int> in_synapses;
};

struct LifParams {
  double dt_over_tau_m = 0.05;
  double v_rest = 0.0;
  double threshold = 15.0;
  double reset = 0.0;
  double resistance = 1.0;
  double syn_decay = 0.0;       // exp(-dt / tau_syn)
  double dt_over_tau_syn = 0.0;
  double dt_ms = 1.0;
  double refractory_ms = 0.0;
  double adaptation_increment = 0.0;
  double adaptation_decay = 1.0;  // exp(-dt / tau_adaptation)
};

// Per-neuron buffers touched by the membrane kernel.
struct LifBuffers {
  std::span<double> v;
  std::span<double> syn_rise;     // rise stage of the synaptic filter
  std::span<double> syn_current;  // current stage of the synaptic filter
  std::span<double> refractory;   // remaining refractory time, ms
  std::span<double> adaptation;   // spike-triggered hyperpolarizing current
  std::span<const double> external;
  std::span<std::uint8_t> spiked;
};

// Weight update buffers for reward-modulated plasticity. Eligibility is
// stored scaled by a shared factor; the current trace is `eligibility * scale`.
struct ModulationBuffers {
  std::span<double> weight;
  std::span<const double> eligibility;
  std::span<const std::uint8_t> excitatory_pre;  // indexed by synapse
  std::span<const std::uint8_t> plastic;         // indexed by synapse
};

struct ModulationParams {
  double learning_rate = 0.0;
  double signal = 0.0;
  double w_max = 0.0;
  double scale = 1.0;
};

namespace serial {

// Leaky integrate-and-fire update followed by threshold detection. Returns the
// number of neurons that spiked.
int integrate_lif(const LifParams& p, LifBuffers b);

// Summed weight of every spiking presynaptic neuron onto each neuron.
// Scatter over the outgoing lists of the (ascending) spiking neurons.
void propagate_spikes(const SynapseView& syn, std::span<const int> spikes,
                      std::span<double> incoming);

// Applies dw = lr * signal * e to every plastic synapse and clips to the
// sign-preserving bound.
void modulate_weights(const ModulationParams& p, ModulationBuffers b);

// Equal-width histogram over [lo, hi] (hi inclusive in the last bin).
std::vector<std::int64_t> histogram(std::span<const double> samples, double lo,
                                    double hi, int bins);

}  // namespace serial

namespace parallel {

int integrate_lif(const LifParams& p, LifBuffers b);

// Each thread owns a contiguous range of postsynaptic neurons and scatters
// the spiking neurons' outgoing synapses that land in it. Per neuron the
// summation order is the serial one.
void propagate_spikes(const SynapseView& syn, std::span<const int> spikes,
                      std::span<double> incoming);

void modulate_weights(const ModulationParams& p, ModulationBuffers b);

std::vector<std::int64_t> histogram(std::span<const double> samples, double lo,
                                    double hi, int bins);

}  // namespace parallel

// Bin index shared by both histogram versions.
inline int bin_of(double x, double lo, double hi, int bins) {
  if (hi <= lo) return 0;
  auto k = static_cast<int>((x - lo) / (hi - lo) * bins);
  if (k < 0) k = 0;
  if (k >= bins) k = bins - 1;
  return k;
}

}  // namespace orgloop::kernels

#endif  // ORGLOOP_KERNELS_HPP_
