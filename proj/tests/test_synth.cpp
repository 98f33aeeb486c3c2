#include <gtest/gtest.h>

#include <set>

#include "das/metrics.hpp"
#include "das/synth.hpp"

using namespace das;

namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.num_items = 60;
  s.height = 8;
  s.width = 8;
  return s;
}

std::string error_of(const io::Bytes& bytes) {
  try {
    decode_dataset(bytes);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Generate, NoiselessFramesAreExact) {
  SynthSpec s = small_spec();
  s.noise_std = 0.0;
  const Dataset ds = generate(s);
  const std::size_t fs = ds.frame_size();
  for (const DatasetItem& it : ds.items) {
    const double level = static_cast<float>((it.label + 1) / 5.0);
    for (std::size_t t = 0; t < s.t_max; ++t) {
      const bool signal =
          std::find(it.signal_positions.begin(), it.signal_positions.end(), t) != it.signal_positions.end();
      for (std::size_t p = 0; p < fs; ++p) ASSERT_EQ(it.frames[t * fs + p], signal ? level : 0.0);
    }
  }
}

TEST(Generate, OrientedGradientPattern) {
  SynthSpec s = small_spec();
  s.noise_std = 0.0;
  s.signal_kind = SignalKind::oriented_gradient;
  const Tensor p0 = signal_pattern(s, 0);
  // Angle 0: a horizontal ramp, constant along each column.
  for (std::size_t y = 0; y < 8; ++y) EXPECT_EQ(p0.at(0, y, 3), p0.at(0, 0, 3));
  EXPECT_LT(p0.at(0, 0, 0), p0.at(0, 0, 7));
  EXPECT_NE(signal_pattern(s, 1), p0);
  const Dataset ds = generate(s);
  const DatasetItem& it = ds.items[3];
  const Tensor pat = signal_pattern(s, it.label);
  for (std::size_t p = 0; p < ds.frame_size(); ++p)
    EXPECT_EQ(it.frames[it.signal_positions[0] * ds.frame_size() + p], static_cast<double>(static_cast<float>(pat[p])));
}

TEST(Generate, SameSeedIsBitIdentical) {
  const SynthSpec s = small_spec();
  EXPECT_EQ(encode_dataset(generate(s)), encode_dataset(generate(s)));
  SynthSpec other = s;
  other.seed = 1;
  EXPECT_NE(encode_dataset(generate(s)), encode_dataset(generate(other)));
}

TEST(Generate, ItemInvariants) {
  SynthSpec s = small_spec();
  s.num_items = 203;
  const Dataset ds = generate(s);
  std::vector<std::size_t> counts(s.num_classes, 0);
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  for (const DatasetItem& it : ds.items) {
    ASSERT_GE(it.label, 0);
    ASSERT_LT(it.label, 5);
    ++counts[it.label];
    ASSERT_GE(it.valid_len, s.t_min);
    ASSERT_LE(it.valid_len, s.t_max);
    ASSERT_EQ(it.signal_positions.size(), s.signal_frames);
    EXPECT_EQ(std::set<std::size_t>(it.signal_positions.begin(), it.signal_positions.end()).size(), s.signal_frames);
    for (std::size_t t : it.signal_positions) ASSERT_LT(t, it.valid_len);
    for (std::size_t i = it.valid_len * ds.frame_size(); i < it.frames.size(); ++i) ASSERT_EQ(it.frames[i], 0.0);
    n_train += it.split == Split::train;
    n_val += it.split == Split::val;
    n_test += it.split == Split::test;
  }
  const double expected = static_cast<double>(s.num_items) / static_cast<double>(s.num_classes);
  for (std::size_t c : counts) EXPECT_LE(std::abs(static_cast<double>(c) - expected), 1.0);
  EXPECT_EQ(n_train, 142u);
  EXPECT_EQ(n_val, 30u);
  EXPECT_EQ(n_test, 31u);
}

TEST(Generate, InvalidSpecs) {
  SynthSpec s = small_spec();
  s.signal_frames = 13;
  EXPECT_THROW(generate(s), UsageError);
  s = small_spec();
  s.num_classes = 1;
  EXPECT_THROW(generate(s), UsageError);
  s = small_spec();
  s.noise_std = -0.1;
  EXPECT_THROW(generate(s), UsageError);
}

TEST(Generate, SignalFramesAreRecoverable) {
  for (SignalKind kind : {SignalKind::intensity_level, SignalKind::oriented_gradient}) {
    SynthSpec s;
    s.signal_kind = kind;
    const Dataset ds = generate(s);
    std::vector<int> preds, truth;
    for (const DatasetItem& it : ds.items) {
      preds.push_back(oracle_predict(ds, it));
      truth.push_back(it.label);
    }
    EXPECT_GE(balanced_accuracy(preds, truth, s.num_classes), 0.95) << to_string(kind);
  }
}

TEST(SpecJson, RoundTripAndStrictKeys) {
  SynthSpec s = small_spec();
  s.noise_std = 0.15;
  s.signal_kind = SignalKind::oriented_gradient;
  EXPECT_EQ(synth_spec_from_json(to_json(s)), s);
  EXPECT_THROW(synth_spec_from_json(nlohmann::json{{"num_itemz", 3}}), UsageError);
  EXPECT_EQ(synth_spec_from_json(nlohmann::json::object()), SynthSpec{});
}

TEST(DatasetFile, RoundTripsBitExactly) {
  const Dataset ds = generate(small_spec());
  const io::Bytes bytes = encode_dataset(ds);
  const Dataset back = decode_dataset(bytes);
  EXPECT_EQ(back.spec, ds.spec);
  ASSERT_EQ(back.items.size(), ds.items.size());
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    EXPECT_EQ(back.items[i].frames, ds.items[i].frames);
    EXPECT_EQ(back.items[i].signal_positions, ds.items[i].signal_positions);
    EXPECT_EQ(back.items[i].split, ds.items[i].split);
    EXPECT_EQ(back.items[i].valid_len, ds.items[i].valid_len);
  }
  EXPECT_EQ(encode_dataset(back), bytes);
}

TEST(DatasetFile, CorruptionErrors) {
  const io::Bytes bytes = encode_dataset(generate(small_spec()));
  io::Bytes bad = bytes;
  bad[3] = '?';
  EXPECT_NE(error_of(bad).find("bad magic"), std::string::npos);

  const std::size_t payload = 60 * 16 * 64 * 4;
  const io::Bytes cut(bytes.begin(), bytes.end() - 1000);
  const std::string msg = error_of(cut);
  EXPECT_NE(msg.find("truncated payload"), std::string::npos) << msg;
  EXPECT_NE(msg.find("expected " + std::to_string(payload)), std::string::npos) << msg;
  EXPECT_NE(msg.find("found " + std::to_string(payload - 1000)), std::string::npos) << msg;

  EXPECT_NE(error_of(io::Bytes(bytes.begin(), bytes.begin() + 30)).find("truncated header"), std::string::npos);

  nlohmann::json header = {{"version", 2}, {"spec", to_json(small_spec())}, {"items", nlohmann::json::array()}};
  EXPECT_NE(error_of(io::frame_container(kDatasetMagic, header, {})).find("version"), std::string::npos);
}

TEST(DatasetFile, MissingFileNamesPath) {
  try {
    read_dataset("/nonexistent/dir/data.bin");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/data.bin"), std::string::npos);
  }
}
