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

#include "orgloop/kernels.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

namespace orgloop::kernels {
namespace {

inline bool lif_neuron(const LifParams& p, const LifBuffers& b,
                       std::size_t i) {
  const double current = b.syn_current[i] + b.external[i] - b.adaptation[i];
  bool fired = false;
  if (b.refractory[i] > 0.5 * p.dt_ms) {
    b.refractory[i] -= p.dt_ms;
    b.v[i] = p.reset;
  } else {
    b.refractory[i] = 0.0;
    double v = b.v[i] + p.dt_over_tau_m * (p.v_rest - b.v[i] + p.resistance * current);
    fired = v >= p.threshold;
    if (fired) {
      v = p.reset;
      b.refractory[i] = p.refractory_ms;
      b.adaptation[i] += p.adaptation_increment;
    }
    b.v[i] = v;
  }
  b.spiked[i] = fired ? 1 : 0;
  b.adaptation[i] *= p.adaptation_decay;
  // Alpha-shaped synaptic current: a rise stage feeding a current stage.
  b.syn_current[i] = b.syn_current[i] * p.syn_decay + p.dt_over_tau_syn * b.syn_rise[i];
  b.syn_rise[i] *= p.syn_decay;
  return fired;
}

inline void modulate_one(const ModulationParams& p, const ModulationBuffers& b,
                         std::size_t s) {
  if (!b.plastic[s]) return;
  const double e = b.eligibility[s] * p.scale;
  double w = b.weight[s] + p.learning_rate * p.signal * e;
  if (b.excitatory_pre[s]) {
    w = std::clamp(w, 0.0, p.w_max);
  } else {
    w = std::clamp(w, -p.w_max, 0.0);
  }
  b.weight[s] = w;
}

}  // namespace

namespace serial {

int integrate_lif(const LifParams& p, LifBuffers b) {
  int fired = 0;
  for (std::size_t i = 0; i < b.v.size(); ++i) {
    if (lif_neuron(p, b, i)) ++fired;
  }
  return fired;
}

void propagate_spikes(const SynapseView& syn, std::span<const int> spikes,
                      std::span<double> incoming) {
  std::fill(incoming.begin(), incoming.end(), 0.0);
  for (int j : spikes) {
    for (auto s = syn.out_offsets[j]; s < syn.out_offsets[j + 1]; ++s) {
      incoming[syn.post[s]] += syn.weight[s];
    }
  }
}

void modulate_weights(const ModulationParams& p, ModulationBuffers b) {
  for (std::size_t s = 0; s < b.weight.size(); ++s) modulate_one(p, b, s);
}

std::vector<std::int64_t> histogram(std::span<const double> samples, double lo,
                                    double hi, int bins) {
  std::vector<std::int64_t> counts(bins, 0);
  for (double x : samples) ++counts[bin_of(x, lo, hi, bins)];
  return counts;
}

}  // namespace serial

namespace parallel {

int integrate_lif(const LifParams& p, LifBuffers b) {
  const auto n = static_cast<std::int64_t>(b.v.size());
  int fired = 0;
#pragma omp parallel for reduction(+ : fired) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    if (lif_neuron(p, b, static_cast<std::size_t>(i))) ++fired;
  }
  return fired;
}

void propagate_spikes(const SynapseView& syn, std::span<const int> spikes,
                      std::span<double> incoming) {
  const auto n = static_cast<std::int64_t>(incoming.size());
#pragma omp parallel
  {
    const auto threads = static_cast<std::int64_t>(omp_get_num_threads());
    const auto t = static_cast<std::int64_t>(omp_get_thread_num());
    const auto lo = n * t / threads;
    const auto hi = n * (t + 1) / threads;
    std::fill(incoming.begin() + lo, incoming.begin() + hi, 0.0);
    for (int j : spikes) {
      const auto* first = syn.post.data() + syn.out_offsets[j];
      const auto* last = syn.post.data() + syn.out_offsets[j + 1];
      for (const auto* p = std::lower_bound(first, last, lo); p != last && *p < hi; ++p) {
        incoming[*p] += syn.weight[p - syn.post.data()];
      }
    }
  }
}

void modulate_weights(const ModulationParams& p, ModulationBuffers b) {
  const auto n = static_cast<std::int64_t>(b.weight.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < n; ++s) modulate_one(p, b, static_cast<std::size_t>(s));
}

std::vector<std::int64_t> histogram(std::span<const double> samples, double lo,
                                    double hi, int bins) {
  std::vector<std::int64_t> counts(bins, 0);
  std::int64_t* c = counts.data();
  const auto n = static_cast<std::int64_t>(samples.size());
  const double* x = samples.data();
#pragma omp parallel for reduction(+ : c[:bins]) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) ++c[bin_of(x[i], lo, hi, bins)];
  return counts;
}

}  // namespace parallel
}  // namespace orgloop::kernels
