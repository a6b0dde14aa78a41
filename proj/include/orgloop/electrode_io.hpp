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

// Recording from and stimulating an agent through its electrodes.

#ifndef ORGLOOP_ELECTRODE_IO_HPP_
#define ORGLOOP_ELECTRODE_IO_HPP_

#include <span>
#include <vector>

#include "orgloop/mea.hpp"
#include "orgloop/network.hpp"

namespace orgloop::mea {

// Every electrode of the layout is mapped and recording maps are pairwise
// disjoint. Throws std::invalid_argument otherwise.
void check_map(const MeaLayout& layout, const snn::ElectrodeMap& map);

// Advances the agent by `window_ms` once and returns one window per group,
// holding the spikes of the neurons behind that group's electrodes.
// Throws std::invalid_argument if any group is not a recording group.
std::vector<SpikeWindow> record_groups(snn::Agent& agent,
                                       std::span<const ElectrodeGroup> groups,
                                       double window_ms, double dt_ms = 1.0);

SpikeWindow record_spikes(snn::Agent& agent, const ElectrodeGroup& group,
                          double window_ms, double dt_ms = 1.0);

// Queues the rendered waveform into the neurons behind the targets, starting at
// the agent's clock. Throws unless every target is a stimulation electrode of
// `layout`.
void apply_stimulus(snn::Agent& agent, const MeaLayout& layout,
                    const StimulusCommand& cmd);

}  // namespace orgloop::mea

#endif  // ORGLOOP_ELECTRODE_IO_HPP_
