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

#include "orgloop/electrode_io.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

namespace orgloop::mea {

void check_map(const MeaLayout& layout, const snn::ElectrodeMap& map) {
  std::set<snn::NeuronId> recorded;
  for (const auto& g : layout.groups()) {
    for (auto e : g.electrodes) {
      const auto it = map.neurons.find(e);
      if (it == map.neurons.end() || it->second.empty()) {
        throw std::invalid_argument(fmt::format("electrode {} is not mapped", e));
      }
      if (g.role != GroupRole::Record) continue;
      for (auto n : it->second) {
        if (!recorded.insert(n).second) {
          throw std::invalid_argument(fmt::format(
              "neuron {} is read by more than one recording electrode", n));
        }
      }
    }
  }
}

std::vector<SpikeWindow> record_groups(snn::Agent& agent,
                                       std::span<const ElectrodeGroup> groups,
                                       double window_ms, double dt_ms) {
  if (!(window_ms > 0.0)) throw std::invalid_argument("window must be > 0");
  // Neuron -> index of the group that reads it (recording maps are disjoint).
  std::vector<int> owner(static_cast<std::size_t>(agent.size()), -1);
  std::vector<SpikeWindow> out;
  out.reserve(groups.size());
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& g = groups[k];
    if (g.role != GroupRole::Record) {
      throw std::invalid_argument(
          fmt::format("group {} is a stimulation group, not a recording group", g.id));
    }
    for (auto n : agent.electrode_map().of_group(g)) owner[n] = static_cast<int>(k);
    out.push_back(SpikeWindow{g.id, window_ms, 0, {}});
  }
  for (const auto& s : agent.run(window_ms, dt_ms)) {
    const int k = owner[s.neuron];
    if (k < 0) continue;
    out[k].timestamps.push_back(s.t_ms);
    ++out[k].count;
  }
  return out;
}

SpikeWindow record_spikes(snn::Agent& agent, const ElectrodeGroup& group,
                          double window_ms, double dt_ms) {
  return record_groups(agent, std::span(&group, 1), window_ms, dt_ms).front();
}

void apply_stimulus(snn::Agent& agent, const MeaLayout& layout,
                    const StimulusCommand& cmd) {
  std::vector<snn::NeuronId> neurons;
  for (auto e : cmd.targets()) {
    const auto role = layout.role_of(e);
    if (!role) {
      throw std::invalid_argument(fmt::format("electrode {} is not in the layout", e));
    }
    if (*role != GroupRole::Stimulate) {
      throw std::invalid_argument(
          fmt::format("electrode {} belongs to a recording group", e));
    }
    const auto& ns = agent.electrode_map().of(e);
    neurons.insert(neurons.end(), ns.begin(), ns.end());
  }
  std::sort(neurons.begin(), neurons.end());
  neurons.erase(std::unique(neurons.begin(), neurons.end()), neurons.end());
  const double dt = injection_dt_ms(cmd);
  agent.inject_series(std::move(neurons), render_waveform(cmd, dt), dt);
}

}  // namespace orgloop::mea
