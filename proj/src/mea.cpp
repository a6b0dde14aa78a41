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

#include "orgloop/mea.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "orgloop/kernels.hpp"

namespace orgloop::mea {

bool ElectrodeGroup::contains(ElectrodeId e) const {
  return std::find(electrodes.begin(), electrodes.end(), e) != electrodes.end();
}

ElectrodeGroup make_group(std::string id, GroupRole role,
                          std::vector<ElectrodeId> electrodes) {
  if (electrodes.empty()) {
    throw std::invalid_argument(fmt::format("group {} has no electrodes", id));
  }
  std::set<ElectrodeId> seen(electrodes.begin(), electrodes.end());
  if (seen.size() != electrodes.size()) {
    throw std::invalid_argument(fmt::format("group {} repeats an electrode", id));
  }
  return ElectrodeGroup{std::move(id), role, std::move(electrodes)};
}

MeaLayout::MeaLayout(std::vector<ElectrodeGroup> groups)
    : groups_(std::move(groups)) {
  std::set<std::string> ids;
  std::set<ElectrodeId> used;
  for (const auto& g : groups_) {
    // Re-run the per-group checks for groups built by hand.
    make_group(g.id, g.role, g.electrodes);
    if (!ids.insert(g.id).second) {
      throw std::invalid_argument(fmt::format("duplicate group id {}", g.id));
    }
    for (auto e : g.electrodes) {
      if (!used.insert(e).second) {
        throw std::invalid_argument(
            fmt::format("electrode {} belongs to more than one group", e));
      }
    }
  }
  for (const char* id : {"A", "B", "C", "D"}) {
    if (!has_group(id)) {
      throw std::invalid_argument(fmt::format("layout lacks group {}", id));
    }
  }
  if (a().role != GroupRole::Record || b().role != GroupRole::Record) {
    throw std::invalid_argument("groups A and B must record");
  }
  if (c().role != GroupRole::Stimulate || d().role != GroupRole::Stimulate) {
    throw std::invalid_argument("groups C and D must stimulate");
  }
}

MeaLayout MeaLayout::standard(int stim_per_group, int record_per_group) {
  if (stim_per_group < 1 || record_per_group < 1) {
    throw std::invalid_argument("electrode counts must be positive");
  }
  auto range = [](int first, int count) {
    std::vector<ElectrodeId> v(count);
    for (int i = 0; i < count; ++i) v[i] = first + i;
    return v;
  };
  const int n = stim_per_group;
  const int r = record_per_group;
  return MeaLayout({
      make_group("A", GroupRole::Record, range(2 * n + 1, r)),
      make_group("B", GroupRole::Record, range(2 * n + r + 1, r)),
      make_group("C", GroupRole::Stimulate, range(n + 1, n)),
      make_group("D", GroupRole::Stimulate, range(1, n)),
  });
}

const ElectrodeGroup& MeaLayout::group(std::string_view id) const {
  for (const auto& g : groups_) {
    if (g.id == id) return g;
  }
  throw std::out_of_range(fmt::format("no electrode group {}", id));
}

bool MeaLayout::has_group(std::string_view id) const {
  return std::any_of(groups_.begin(), groups_.end(),
                     [&](const ElectrodeGroup& g) { return g.id == id; });
}

ElectrodeGroup MeaLayout::stimulation_union() const {
  std::vector<ElectrodeId> all = c().electrodes;
  all.insert(all.end(), d().electrodes.begin(), d().electrodes.end());
  return ElectrodeGroup{"CD", GroupRole::Stimulate, std::move(all)};
}

std::vector<ElectrodeGroup> MeaLayout::four_way_groups() const {
  auto split = [](const ElectrodeGroup& g, std::string first_id,
                  std::string second_id) {
    if (g.size() < 2) {
      throw std::invalid_argument(fmt::format(
          "group {} needs two electrodes for four-way decoding", g.id));
    }
    const auto half = static_cast<std::ptrdiff_t>(g.size() / 2);
    ElectrodeGroup first{std::move(first_id), g.role,
                         {g.electrodes.begin(), g.electrodes.begin() + half}};
    ElectrodeGroup second{std::move(second_id), g.role,
                          {g.electrodes.begin() + half, g.electrodes.end()}};
    return std::pair{first, second};
  };
  auto [up, down] = split(a(), "A_up", "A_down");
  auto [left, right] = split(b(), "B_left", "B_right");
  return {up, down, left, right};
}

std::optional<GroupRole> MeaLayout::role_of(ElectrodeId e) const {
  for (const auto& g : groups_) {
    if (g.contains(e)) return g.role;
  }
  return std::nullopt;
}

std::vector<ElectrodeId> MeaLayout::all_electrodes() const {
  std::vector<ElectrodeId> out;
  for (const auto& g : groups_) {
    out.insert(out.end(), g.electrodes.begin(), g.electrodes.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string to_string(Waveform w) {
  switch (w) {
    case Waveform::Sinusoid: return "sinusoid";
    case Waveform::WhiteNoise: return "white_noise";
    case Waveform::PulseTrain: return "pulse_train";
    case Waveform::SinglePulse: return "single_pulse";
  }
  return "?";
}

std::string to_string(PulseShape s) {
  return s == PulseShape::BiPhasic ? "bi-phasic" : "tri-phasic";
}

Waveform waveform_from_string(std::string_view s) {
  for (auto w : {Waveform::Sinusoid, Waveform::WhiteNoise, Waveform::PulseTrain,
                 Waveform::SinglePulse}) {
    if (to_string(w) == s) return w;
  }
  throw std::invalid_argument(fmt::format("unknown waveform '{}'", s));
}

PulseShape shape_from_string(std::string_view s) {
  if (s == "bi-phasic") return PulseShape::BiPhasic;
  if (s == "tri-phasic") return PulseShape::TriPhasic;
  throw std::invalid_argument(fmt::format("unknown pulse shape '{}'", s));
}

StimulusCommand StimulusCommand::sinusoid(std::vector<ElectrodeId> targets,
                                          double amplitude_ua,
                                          double frequency_hz,
                                          double duration_ms) {
  StimulusCommand c;
  c.targets_ = std::move(targets);
  c.waveform_ = Waveform::Sinusoid;
  c.amplitude_ua_ = amplitude_ua;
  c.frequency_hz_ = frequency_hz;
  c.duration_ms_ = duration_ms;
  c.validate();
  return c;
}

StimulusCommand StimulusCommand::white_noise(std::vector<ElectrodeId> targets,
                                             double amplitude_ua,
                                             double duration_ms,
                                             std::uint64_t seed) {
  StimulusCommand c;
  c.targets_ = std::move(targets);
  c.waveform_ = Waveform::WhiteNoise;
  c.amplitude_ua_ = amplitude_ua;
  c.duration_ms_ = duration_ms;
  c.seed_ = seed;
  c.validate();
  return c;
}

StimulusCommand StimulusCommand::pulse_train(std::vector<ElectrodeId> targets,
                                             PulseShape shape,
                                             double amplitude_ua,
                                             double pulse_width_us,
                                             double frequency_hz,
                                             double duration_ms) {
  StimulusCommand c;
  c.targets_ = std::move(targets);
  c.waveform_ = Waveform::PulseTrain;
  c.shape_ = shape;
  c.amplitude_ua_ = amplitude_ua;
  c.pulse_width_us_ = pulse_width_us;
  c.frequency_hz_ = frequency_hz;
  c.duration_ms_ = duration_ms;
  c.validate();
  return c;
}

StimulusCommand StimulusCommand::single_pulse(std::vector<ElectrodeId> targets,
                                              PulseShape shape,
                                              double amplitude_ua,
                                              double pulse_width_us,
                                              double duration_ms) {
  StimulusCommand c;
  c.targets_ = std::move(targets);
  c.waveform_ = Waveform::SinglePulse;
  c.shape_ = shape;
  c.amplitude_ua_ = amplitude_ua;
  c.pulse_width_us_ = pulse_width_us;
  c.duration_ms_ = duration_ms;
  c.validate();
  return c;
}

void StimulusCommand::validate() const {
  if (targets_.empty()) throw std::invalid_argument("stimulus has no targets");
  if (!(amplitude_ua_ > 0.0)) throw std::invalid_argument("amplitude must be > 0");
  if (!(duration_ms_ > 0.0)) throw std::invalid_argument("duration must be > 0");
  if (waveform_ == Waveform::WhiteNoise && !seed_) {
    throw std::invalid_argument("white noise needs a seed");
  }
  if ((waveform_ == Waveform::Sinusoid || waveform_ == Waveform::PulseTrain) &&
      !(frequency_hz_ > 0.0)) {
    throw std::invalid_argument("frequency must be > 0");
  }
  if ((waveform_ == Waveform::PulseTrain ||
       waveform_ == Waveform::SinglePulse) &&
      !(pulse_width_us_ > 0.0)) {
    throw std::invalid_argument("pulse width must be > 0");
  }
}

nlohmann::json StimulusCommand::to_json() const {
  nlohmann::json j;
  j["electrodes"] = targets_;
  j["waveform"] = to_string(waveform_);
  j["shape"] = to_string(shape_);
  j["amplitude_uA"] = amplitude_ua_;
  j["frequency_hz"] = frequency_hz_;
  j["pulse_duration_us"] = pulse_width_us_;
  j["duration_ms"] = duration_ms_;
  j["seed"] = seed_ ? nlohmann::json(*seed_) : nlohmann::json(nullptr);
  return j;
}

StimulusCommand StimulusCommand::from_json(const nlohmann::json& j) {
  StimulusCommand c;
  c.targets_ = j.at("electrodes").get<std::vector<ElectrodeId>>();
  c.waveform_ = waveform_from_string(j.at("waveform").get<std::string>());
  c.shape_ = shape_from_string(j.at("shape").get<std::string>());
  c.amplitude_ua_ = j.at("amplitude_uA").get<double>();
  c.frequency_hz_ = j.at("frequency_hz").get<double>();
  c.pulse_width_us_ = j.at("pulse_duration_us").get<double>();
  c.duration_ms_ = j.at("duration_ms").get<double>();
  if (!j.at("seed").is_null()) c.seed_ = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

namespace {

// Integer sample count for an interval; throws unless dt divides it.
std::int64_t exact_steps(double span_ms, double dt_ms, const char* what) {
  const double ratio = span_ms / dt_ms;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument(fmt::format(
        "dt {} ms does not divide {} {} ms", dt_ms, what, span_ms));
  }
  return static_cast<std::int64_t>(rounded);
}

// Writes one pulse starting at sample `onset`. Phase lengths are in samples.
void write_pulse(std::vector<double>& out, std::int64_t onset,
                 std::int64_t phase, PulseShape shape, double amplitude) {
  auto put = [&](std::int64_t from, std::int64_t len, double value) {
    for (std::int64_t i = from; i < from + len; ++i) {
      if (i >= 0 && i < static_cast<std::int64_t>(out.size())) out[i] = value;
    }
  };
  if (shape == PulseShape::BiPhasic) {
    put(onset, phase, -amplitude);
    put(onset + phase, phase, amplitude);
  } else {
    put(onset, phase, 0.5 * amplitude);
    put(onset + phase, phase, -amplitude);
    put(onset + 2 * phase, phase, 0.5 * amplitude);
  }
}

}  // namespace

std::vector<double> render_waveform(const StimulusCommand& cmd, double dt_ms) {
  if (!(dt_ms > 0.0)) throw std::invalid_argument("dt must be > 0");
  const auto n = exact_steps(cmd.duration_ms(), dt_ms, "duration");
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  const double a = cmd.amplitude_ua();

  switch (cmd.waveform()) {
    case Waveform::Sinusoid: {
      const double w = 2.0 * std::numbers::pi * cmd.frequency_hz() * 1e-3;
      for (std::int64_t i = 0; i < n; ++i) {
        out[i] = a * std::sin(w * static_cast<double>(i) * dt_ms);
      }
      break;
    }
    case Waveform::WhiteNoise: {
      std::mt19937_64 rng(*cmd.seed());
      std::uniform_real_distribution<double> u(-a, a);
      for (auto& x : out) x = u(rng);
      break;
    }
    case Waveform::PulseTrain:
    case Waveform::SinglePulse: {
      const double width_ms = cmd.pulse_width_us() * 1e-3;
      if (dt_ms > width_ms + 1e-12) {
        throw std::invalid_argument(fmt::format(
            "dt {} ms is coarser than the {} us pulse width", dt_ms,
            cmd.pulse_width_us()));
      }
      const auto phase = std::max<std::int64_t>(
          1, static_cast<std::int64_t>(std::llround(width_ms / dt_ms)));
      if (cmd.waveform() == Waveform::SinglePulse) {
        write_pulse(out, 0, phase, cmd.shape(), a);
        break;
      }
      const double period_ms = 1000.0 / cmd.frequency_hz();
      for (std::int64_t k = 0;; ++k) {
        const double onset_ms = static_cast<double>(k) * period_ms;
        if (onset_ms >= cmd.duration_ms() - 1e-9) break;
        write_pulse(out, std::llround(onset_ms / dt_ms), phase, cmd.shape(), a);
      }
      break;
    }
  }
  return out;
}

double injection_dt_ms(const StimulusCommand& cmd) {
  if (cmd.waveform() != Waveform::PulseTrain && cmd.waveform() != Waveform::SinglePulse) {
    return kRenderDtMs;
  }
  auto divides = [](double span_ms, double dt_ms) {
    const double ratio = span_ms / dt_ms;
    return std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio);
  };
  const double width_ms = cmd.pulse_width_us() * 1e-3;
  for (double dt : {0.1, 0.05, 0.025, 0.02, 0.01, 0.005, 0.002, 0.001}) {
    if (dt <= width_ms + 1e-12 && divides(width_ms, dt) && divides(cmd.duration_ms(), dt)) {
      return dt;
    }
  }
  throw std::invalid_argument(fmt::format("no sample step fits the {} us pulse width",
                                          cmd.pulse_width_us()));
}

double shannon_entropy(std::span<const double> samples, int bins) {
  if (samples.size() < 2) throw std::invalid_argument("need at least 2 samples");
  if (bins < 2) throw std::invalid_argument("need at least 2 bins");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) return 0.0;
  const auto counts = samples.size() >= 1u << 16
                          ? kernels::parallel::histogram(samples, lo, hi, bins)
                          : kernels::serial::histogram(samples, lo, hi, bins);
  const double total = static_cast<double>(samples.size());
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

}  // namespace orgloop::mea
