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

#include <algorithm>
#include <set>

#include "orgloop/codec.hpp"
#include "orgloop/mea.hpp"

namespace orgloop::codec {
namespace {

mea::SpikeWindow window(int count, double ms = kDecodeWindowMs, std::string id = "A") {
  mea::SpikeWindow w{std::move(id), ms, count, {}};
  for (int i = 0; i < count; ++i) w.timestamps.push_back(ms * i / (count + 1));
  return w;
}

mea::ElectrodeGroup group_of(int n, int first, std::string id = "C") {
  std::vector<mea::ElectrodeId> e(n);
  for (int i = 0; i < n; ++i) e[i] = first + i;
  return mea::make_group(std::move(id), mea::GroupRole::Stimulate, e);
}

TEST(Spatial, FirstPositionTargetsFirstElectrode) {
  const auto layout = mea::MeaLayout::standard();
  const auto cmd = encode_position_spatial(1, layout.c());
  EXPECT_EQ(cmd.targets(), std::vector<mea::ElectrodeId>{layout.c().electrodes[0]});
  EXPECT_EQ(cmd.waveform(), mea::Waveform::PulseTrain);
}

TEST(Spatial, PreyAtSixIsElectrodeFourteen) {
  const auto layout = mea::MeaLayout::standard();
  EXPECT_EQ(encode_position_spatial(6, layout.c()).targets(), std::vector<mea::ElectrodeId>{14});
}

TEST(Spatial, InjectiveUpToHundredElectrodes) {
  for (int n = 1; n <= 100; ++n) {
    const auto g = group_of(n, 1);
    std::set<std::vector<mea::ElectrodeId>> seen;
    for (int pos = 1; pos <= n; ++pos) {
      const auto t = encode_position_spatial(pos, g).targets();
      ASSERT_EQ(t.size(), 1u);
      ASSERT_TRUE(seen.insert(t).second);
    }
  }
}

TEST(Spatial, RejectsOutOfRange) {
  const auto g = group_of(8, 1);
  EXPECT_THROW(encode_position_spatial(0, g), std::out_of_range);
  EXPECT_THROW(encode_position_spatial(9, g), std::out_of_range);
}

TEST(Rate, BoundariesAndMidpoint) {
  const RateCodeSpec spec{5.0, 45.0, 10.0};
  EXPECT_EQ(rate_frequency(0.0, spec), 45.0);
  EXPECT_EQ(rate_frequency(10.0, spec), 5.0);
  EXPECT_EQ(rate_frequency(5.0, spec), 25.0);
  EXPECT_EQ(rate_frequency(1e9, spec), 5.0);
  const auto g = group_of(4, 1);
  const auto cmd = encode_rate(5.0, spec, g);
  EXPECT_EQ(cmd.frequency_hz(), 25.0);
  EXPECT_EQ(cmd.targets(), g.electrodes);
  EXPECT_THROW(encode_rate(-1.0, spec, g), std::invalid_argument);
}

TEST(Rate, MonotoneAndClamped) {
  const RateCodeSpec spec{2.0, 80.0, 7.0};
  double prev = rate_frequency(0.0, spec);
  for (double d = 0.0; d <= 20.0; d += 0.01) {
    const double f = rate_frequency(d, spec);
    EXPECT_LE(f, prev);
    EXPECT_GE(f, spec.f_min);
    EXPECT_LE(f, spec.f_max);
    prev = f;
  }
}

TEST(Rate, SpecValidation) {
  EXPECT_THROW((RateCodeSpec{10.0, 5.0, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((RateCodeSpec{0.0, 5.0, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((RateCodeSpec{1.0, 5.0, 0.0}.validate()), std::invalid_argument);
}

TEST(Xy, OriginIsFirstElectrodeAtMinimumFrequency) {
  const auto c = group_of(10, 1, "C");
  const auto d = group_of(10, 11, "D");
  const RateCodeSpec freq{5.0, 45.0, 10.0};
  const auto cmds = encode_xy(0, 0, 10, c, d, XyMode::FreqMod, freq);
  ASSERT_EQ(cmds.size(), 1u);
  EXPECT_EQ(cmds[0].targets(), std::vector<mea::ElectrodeId>{1});
  EXPECT_EQ(cmds[0].frequency_hz(), 5.0);
}

TEST(Xy, CellsAreDistinguishableInBothModes) {
  const auto c = group_of(10, 1, "C");
  const auto d = group_of(10, 11, "D");
  const RateCodeSpec freq{5.0, 45.0, 10.0};
  for (auto mode : {XyMode::FreqMod, XyMode::SplitGroups}) {
    std::set<std::vector<std::pair<std::vector<mea::ElectrodeId>, double>>> seen;
    for (int x = 0; x < 10; ++x) {
      for (int y = 0; y < 10; ++y) {
        std::vector<std::pair<std::vector<mea::ElectrodeId>, double>> key;
        for (const auto& cmd : encode_xy(x, y, 10, c, d, mode, freq)) {
          key.emplace_back(cmd.targets(), cmd.frequency_hz());
        }
        EXPECT_TRUE(seen.insert(key).second) << x << "," << y;
      }
    }
    EXPECT_EQ(seen.size(), 100u);
  }
}

TEST(Xy, ModesShareTheXCode) {
  const auto c = group_of(10, 1, "C");
  const auto d = group_of(10, 11, "D");
  const RateCodeSpec freq{5.0, 45.0, 10.0};
  for (int x = 0; x < 10; ++x) {
    const auto fm = encode_xy(x, 7, 10, c, d, XyMode::FreqMod, freq);
    const auto sg = encode_xy(x, 7, 10, c, d, XyMode::SplitGroups, freq);
    EXPECT_EQ(fm.front().targets(), sg.front().targets());
  }
  EXPECT_THROW(encode_xy(10, 0, 10, c, d, XyMode::FreqMod, freq), std::out_of_range);
  EXPECT_THROW(encode_xy(0, -1, 10, c, d, XyMode::SplitGroups, freq), std::out_of_range);
}

TEST(Binary, Rules) {
  EXPECT_EQ(decode_binary(window(10), window(5)), Action::Left);
  EXPECT_EQ(decode_binary(window(3), window(3)), Action::Stay);
  EXPECT_EQ(decode_binary(window(0), window(1)), Action::Right);
  EXPECT_THROW(decode_binary(window(1, 100.0), window(1, 10.0)), std::invalid_argument);
}

TEST(FourWay, Rules) {
  EXPECT_EQ(decode_4way(window(9), window(1), window(1), window(1)), Action::Up);
  EXPECT_EQ(decode_4way(window(4), window(4), window(1), window(1)), Action::Stay);
  EXPECT_EQ(decode_4way(window(0), window(0), window(0), window(0)), Action::Stay);
  EXPECT_THROW(decode_4way(window(1), window(1), window(1), window(1, 10.0)),
               std::invalid_argument);
}

// Exhaustive check of the tie rule against a direct statement of it.
TEST(FourWay, ExhaustiveUpToFive) {
  const std::array<Action, 4> labels{Action::Up, Action::Down, Action::Left, Action::Right};
  for (int u = 0; u <= 5; ++u)
    for (int d = 0; d <= 5; ++d)
      for (int l = 0; l <= 5; ++l)
        for (int r = 0; r <= 5; ++r) {
          const std::array<int, 4> c{u, d, l, r};
          const int top = *std::max_element(c.begin(), c.end());
          const auto winners = std::count(c.begin(), c.end(), top);
          const Action expected =
              winners == 1 ? labels[std::find(c.begin(), c.end(), top) - c.begin()] : Action::Stay;
          ASSERT_EQ(decode_4way(window(u), window(d), window(l), window(r)), expected);
        }
}

TEST(FourWay, TwoNonZeroInputsReduceToBinary) {
  for (int a = 0; a <= 6; ++a) {
    for (int b = 0; b <= 6; ++b) {
      const auto binary = decode_binary(window(a), window(b));
      const auto four = decode_4way(window(0), window(0), window(a), window(b));
      if (a == 0 && b == 0) {
        EXPECT_EQ(four, Action::Stay);
      } else {
        EXPECT_EQ(four, binary) << a << " " << b;
      }
    }
  }
}

TEST(Paddle, Rules) {
  const double w = kPaddleWindowMs;
  EXPECT_EQ(decode_paddle(window(2, w), window(1, w)), Action::Up);
  EXPECT_EQ(decode_paddle(window(1, w), window(2, w)), Action::Down);
  EXPECT_EQ(decode_paddle(window(1, w), window(2, w), PaddleAxis::Horizontal), Action::Right);
  EXPECT_EQ(decode_paddle(window(2, w), window(1, w), PaddleAxis::Horizontal), Action::Left);
  EXPECT_EQ(decode_paddle(window(5, w), window(5, w)), Action::Stay);
}

TEST(Decoders, IgnoreTimestampOrder) {
  auto a = window(4);
  auto b = window(2);
  const auto before = decode_binary(a, b);
  std::reverse(a.timestamps.begin(), a.timestamps.end());
  a.timestamps[0] = 99.0;
  EXPECT_EQ(decode_binary(a, b), before);
}

TEST(Actions, NamesRoundTrip) {
  for (auto a : {Action::Left, Action::Right, Action::Up, Action::Down, Action::Stay}) {
    EXPECT_EQ(action_from_string(to_string(a)), a);
  }
  EXPECT_THROW(action_from_string("sideways"), std::invalid_argument);
}

}  // namespace
}  // namespace orgloop::codec
