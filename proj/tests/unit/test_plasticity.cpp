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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "orgloop/mea.hpp"
#include "orgloop/network.hpp"
#include "orgloop/plasticity.hpp"

namespace orgloop::probe {
namespace {

// C = {1} drives neuron 0, which projects onto neurons 1 and 2 read by A = {3}.
struct Chain {
  mea::MeaLayout layout{{mea::make_group("C", mea::GroupRole::Stimulate, {1}),
                         mea::make_group("D", mea::GroupRole::Stimulate, {2}),
                         mea::make_group("A", mea::GroupRole::Record, {3}),
                         mea::make_group("B", mea::GroupRole::Record, {4})}};
  snn::Agent agent;

  explicit Chain(double w)
      : agent(snn::Agent::from_synapses(config(), map(), synapses(w))) {}

  static snn::NetworkConfig config() {
    snn::NetworkConfig cfg;
    cfg.n_neurons = 4;
    cfg.excitatory_fraction = 1.0;
    cfg.motor.interneurons = 0;
    return cfg;
  }
  static snn::ElectrodeMap map() {
    snn::ElectrodeMap m;
    m.neurons = {{1, {0}}, {2, {0}}, {3, {1, 2}}, {4, {3}}};
    m.outputs = {3, 4};
    return m;
  }
  static std::vector<snn::SynapseSpec> synapses(double w) {
    return {{0, 1, w}, {0, 2, 0.5 * w}};
  }
};

snn::Agent standard_agent() {
  const auto layout = mea::MeaLayout::standard();
  snn::NetworkConfig cfg;
  return snn::Agent::create(cfg, snn::ElectrodeMap::standard(layout, cfg));
}

PlasticityMeasurement with_slope(double slope) {
  PlasticityMeasurement m;
  m.probe_electrode = 9;
  m.record_group = "A";
  m.slope = slope;
  return m;
}

TEST(Slope, LeastSquaresOnALine) {
  const std::vector<double> t{0.5, 1.0, 1.5, 2.0, 2.5};
  std::vector<double> y;
  for (double x : t) y.push_back(3.0 * x - 1.0);
  EXPECT_NEAR(least_squares_slope(t, y), 3.0, 1e-12);
}

TEST(Measure, ZeroWeightsGiveZeroSlope) {
  Chain c(0.0);
  const auto m = measure_fepsp(c.agent, c.layout, 1, c.layout.a());
  EXPECT_EQ(m.slope, 0.0);
}

TEST(Measure, DoublingPathWeightsDoublesSlope) {
  Chain one(1.0);
  Chain two(2.0);
  const auto m1 = measure_fepsp(one.agent, one.layout, 1, one.layout.a());
  const auto m2 = measure_fepsp(two.agent, two.layout, 1, two.layout.a());
  ASSERT_GT(m1.slope, 0.0);
  EXPECT_NEAR(m2.slope, 2.0 * m1.slope, 1e-12 * std::abs(m1.slope));
}

TEST(Measure, SideEffectFreeAndRepeatable) {
  auto agent = standard_agent();
  const auto layout = mea::MeaLayout::standard();
  agent.run(137.0);
  const std::vector<double> w(agent.weights().begin(), agent.weights().end());
  const auto e = agent.eligibility();
  const auto clock = agent.clock_us();
  const auto m1 = measure_fepsp(agent, layout, layout.c().electrodes[0], layout.a());
  const auto m2 = measure_fepsp(agent, layout, layout.c().electrodes[0], layout.a());
  EXPECT_EQ(m1.slope, m2.slope);
  EXPECT_EQ(m1.trace, m2.trace);
  EXPECT_EQ(std::vector<double>(agent.weights().begin(), agent.weights().end()), w);
  EXPECT_EQ(agent.eligibility(), e);
  EXPECT_EQ(agent.clock_us(), clock);
  EXPECT_FALSE(agent.plasticity_frozen());
  EXPECT_TRUE(agent.noise());
  EXPECT_EQ(m1.trace.size(), 50u);
}

TEST(Measure, SlopeIndependentOfProbeTime) {
  auto agent = standard_agent();
  const auto layout = mea::MeaLayout::standard();
  const auto early = measure_fepsp(agent, layout, layout.c().electrodes[2], layout.b());
  agent.freeze_plasticity(true);
  agent.run(750.0);
  agent.freeze_plasticity(false);
  const auto late = measure_fepsp(agent, layout, layout.c().electrodes[2], layout.b());
  EXPECT_EQ(early.slope, late.slope);
  EXPECT_LT(early.timestamp_ms, late.timestamp_ms);
}

TEST(Measure, RejectsRecordingProbe) {
  auto agent = standard_agent();
  const auto layout = mea::MeaLayout::standard();
  EXPECT_THROW(measure_fepsp(agent, layout, layout.a().electrodes[0], layout.b()),
               std::invalid_argument);
  EXPECT_THROW(measure_fepsp(agent, layout, layout.c().electrodes[0], layout.d()),
               std::invalid_argument);
}

TEST(Classify, Examples) {
  EXPECT_EQ(classify(with_slope(1.0), with_slope(1.0)).classification, Classification::NoChange);
  const auto r = classify(with_slope(1.0), with_slope(1.2), 5.0);
  EXPECT_EQ(r.classification, Classification::LTP);
  EXPECT_NEAR(r.percent_change, 20.0, 1e-9);
  EXPECT_EQ(classify(with_slope(1.0), with_slope(0.9)).classification, Classification::LTD);
  EXPECT_EQ(classify(with_slope(1.0), with_slope(1.04)).classification, Classification::NoChange);
}

TEST(Classify, ZeroBaseline) {
  const auto r = classify(with_slope(0.0), with_slope(0.3));
  EXPECT_EQ(r.classification, Classification::LTP);
  EXPECT_TRUE(std::isinf(r.percent_change));
  EXPECT_EQ(classify(with_slope(0.0), with_slope(0.0)).classification, Classification::NoChange);
}

TEST(Classify, SwappingFlipsBeyondThreshold) {
  for (double a : {0.5, 1.0, 2.0, -1.0}) {
    for (double b : {0.2, 0.9, 1.5, 3.0, -0.5}) {
      const auto fwd = classify(with_slope(a), with_slope(b));
      const auto rev = classify(with_slope(b), with_slope(a));
      if (fwd.classification == Classification::LTP && std::abs(rev.percent_change) > 5.0) {
        EXPECT_EQ(rev.classification, Classification::LTD) << a << " " << b;
      }
      if (fwd.classification == Classification::LTD && std::abs(rev.percent_change) > 5.0) {
        EXPECT_EQ(rev.classification, Classification::LTP) << a << " " << b;
      }
    }
  }
}

TEST(Classify, RejectsMismatchedPairs) {
  auto other = with_slope(1.0);
  other.record_group = "B";
  EXPECT_THROW(classify(with_slope(1.0), other), std::invalid_argument);
  other = with_slope(1.0);
  other.probe_electrode = 10;
  EXPECT_THROW(classify(with_slope(1.0), other), std::invalid_argument);
}

TEST(Pairing, RewardedCausalPairingPotentiates) {
  auto agent = standard_agent();
  const auto layout = mea::MeaLayout::standard();
  const auto probe = layout.c().electrodes[0];
  const auto before = measure_fepsp(agent, layout, probe, layout.a());
  SplitMix64 rng(5);
  PairingConfig pc;
  pc.pairings = 30;
  run_pairing_session(agent, layout, probe, layout.a(), pc, {}, rng);
  const auto after = measure_fepsp(agent, layout, probe, layout.a());
  EXPECT_EQ(classify(before, after).classification, Classification::LTP);
}

TEST(Csv, HeaderAndRow) {
  std::ostringstream os;
  write_csv_header(os);
  write_csv_row(os, "block0", classify(with_slope(1.0), with_slope(1.5)));
  EXPECT_EQ(os.str(),
            "label,probe_electrode,record_group,before_slope,after_slope,percent_change,"
            "classification\nblock0,9,A,1,1.5,50,LTP\n");
}

TEST(Names, ClassificationRoundTrip) {
  for (auto c : {Classification::LTP, Classification::LTD, Classification::NoChange}) {
    EXPECT_EQ(classification_from_string(to_string(c)), c);
  }
}

}  // namespace
}  // namespace orgloop::probe
