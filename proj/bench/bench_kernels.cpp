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

// Serial reference kernels against their OpenMP versions, and a whole agent
// under both kernel policies. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "orgloop/kernels.hpp"
#include "orgloop/mea.hpp"
#include "orgloop/network.hpp"
#include "orgloop/rng.hpp"

namespace orgloop::kernels {
namespace {

struct Graph {
  std::vector<int> pre, post;
  std::vector<double> weight;
  std::vector<std::int64_t> out_offsets, in_offsets;
  std::vector<int> in_synapses;
  SynapseView view() const { return {pre, post, weight, out_offsets, in_offsets, in_synapses}; }
};

// Random graph with about `fan_in` inputs per neuron.
Graph random_graph(int n, int fan_in, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> w(1.0, 2.0);
  const double p = static_cast<double>(fan_in) / n;
  Graph g;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && u(rng) < p) {
        g.pre.push_back(i);
        g.post.push_back(j);
        g.weight.push_back(w(rng));
      }
    }
  }
  g.out_offsets.assign(static_cast<std::size_t>(n) + 1, 0);
  g.in_offsets.assign(static_cast<std::size_t>(n) + 1, 0);
  for (std::size_t s = 0; s < g.pre.size(); ++s) {
    ++g.out_offsets[static_cast<std::size_t>(g.pre[s]) + 1];
    ++g.in_offsets[static_cast<std::size_t>(g.post[s]) + 1];
  }
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    g.out_offsets[i + 1] += g.out_offsets[i];
    g.in_offsets[i + 1] += g.in_offsets[i];
  }
  g.in_synapses.resize(g.pre.size());
  auto fill = g.in_offsets;
  for (std::size_t s = 0; s < g.pre.size(); ++s) {
    g.in_synapses[static_cast<std::size_t>(fill[static_cast<std::size_t>(g.post[s])]++)] =
        static_cast<int>(s);
  }
  return g;
}

std::vector<int> random_spikes(int n, double rate, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> spikes;
  for (int i = 0; i < n; ++i) {
    if (u(rng) < rate) spikes.push_back(i);
  }
  return spikes;
}

constexpr int kFanIn = 64;
constexpr double kSpikeRate = 0.05;

void BM_PropagateSerial(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto g = random_graph(n, kFanIn, 1);
  const auto spikes = random_spikes(n, kSpikeRate, 2);
  std::vector<double> incoming(static_cast<std::size_t>(n));
  for (auto _ : state) {
    serial::propagate_spikes(g.view(), spikes, incoming);
    benchmark::DoNotOptimize(incoming.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.pre.size()));
}

void BM_PropagateParallel(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto g = random_graph(n, kFanIn, 1);
  const auto spikes = random_spikes(n, kSpikeRate, 2);
  std::vector<double> incoming(static_cast<std::size_t>(n));
  for (auto _ : state) {
    parallel::propagate_spikes(g.view(), spikes, incoming);
    benchmark::DoNotOptimize(incoming.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.pre.size()));
}

struct LifState {
  explicit LifState(int n)
      : v(n, 0.0), rise(n, 0.0), current(n, 0.0), refractory(n, 0.0), adaptation(n, 0.0),
        external(n, 0.0), spiked(n, 0) {
    SplitMix64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    for (auto& x : external) x = u(rng);
  }
  LifBuffers buffers() {
    return {v, rise, current, refractory, adaptation, external, spiked};
  }
  std::vector<double> v, rise, current, refractory, adaptation, external;
  std::vector<std::uint8_t> spiked;
};

LifParams lif_params() {
  LifParams p;
  p.syn_decay = 0.8;
  p.dt_over_tau_syn = 0.2;
  p.refractory_ms = 2.0;
  p.adaptation_increment = 0.5;
  p.adaptation_decay = 0.99;
  return p;
}

template <int (*Kernel)(const LifParams&, LifBuffers)>
void BM_Lif(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  LifState s(n);
  const auto p = lif_params();
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(p, s.buffers()));
  state.SetItemsProcessed(state.iterations() * n);
}

template <void (*Kernel)(const ModulationParams&, ModulationBuffers)>
void BM_Modulate(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  std::vector<double> weight(m, 1.0), eligibility(m);
  std::vector<std::uint8_t> excitatory(m, 1), plastic(m, 1);
  SplitMix64 rng(4);
  std::normal_distribution<double> e(0.0, 1e-3);
  for (auto& x : eligibility) x = e(rng);
  ModulationParams p;
  p.learning_rate = 1.0;
  p.signal = 1.0;
  p.w_max = 10.0;
  for (auto _ : state) {
    p.signal = -p.signal;
    Kernel(p, {weight, eligibility, excitatory, plastic});
    benchmark::DoNotOptimize(weight.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m));
}

template <std::vector<std::int64_t> (*Kernel)(std::span<const double>, double, double, int)>
void BM_Histogram(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> samples(n);
  SplitMix64 rng(5);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (auto& x : samples) x = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(samples, -10.0, 10.0, mea::kEntropyBins));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

// One simulated second of an unstimulated agent with background noise.
void BM_AgentSecond(benchmark::State& state) {
  snn::NetworkConfig cfg;
  cfg.n_neurons = static_cast<int>(state.range(0));
  cfg.connection_probability = static_cast<double>(kFanIn) / cfg.n_neurons;
  cfg.kernels = state.range(1) != 0 ? snn::KernelPolicy::Parallel : snn::KernelPolicy::Serial;
  const auto layout = mea::MeaLayout::standard();
  auto agent = snn::Agent::create(cfg, snn::ElectrodeMap::standard(layout, cfg));
  for (auto _ : state) benchmark::DoNotOptimize(agent.run(1000.0));
  state.SetLabel(state.range(1) != 0 ? "parallel" : "serial");
}

BENCHMARK(BM_PropagateSerial)->RangeMultiplier(4)->Range(256, 16384);
BENCHMARK(BM_PropagateParallel)->RangeMultiplier(4)->Range(256, 16384);
BENCHMARK(BM_Lif<serial::integrate_lif>)->RangeMultiplier(4)->Range(256, 65536);
BENCHMARK(BM_Lif<parallel::integrate_lif>)->RangeMultiplier(4)->Range(256, 65536);
BENCHMARK(BM_Modulate<serial::modulate_weights>)->RangeMultiplier(8)->Range(4096, 1 << 21);
BENCHMARK(BM_Modulate<parallel::modulate_weights>)->RangeMultiplier(8)->Range(4096, 1 << 21);
BENCHMARK(BM_Histogram<serial::histogram>)->RangeMultiplier(8)->Range(1 << 12, 1 << 21);
BENCHMARK(BM_Histogram<parallel::histogram>)->RangeMultiplier(8)->Range(1 << 12, 1 << 21);
BENCHMARK(BM_AgentSecond)
    ->ArgsProduct({{256, 4096}, {0, 1}})
    ->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace orgloop::kernels

BENCHMARK_MAIN();
