#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "cluttermap/net/checkpoint.hpp"
#include "test_util.hpp"

using namespace cluttermap;

namespace {

ImagePatch random_patch(int side, Rng& rng) {
  ImagePatch img(side, side);
  for (auto& b : img.data)
    b = static_cast<std::uint8_t>(rng.uniform_int(256));
  return img;
}

net::Checkpoint make_checkpoint(const net::NetConfig& config,
                                std::uint64_t seed) {
  auto netw = net::build_network<float>(config, seed);
  net::TrainingMeta meta;
  meta.seed = seed;
  meta.epochs = 3;
  meta.final_val_accuracy = 0.5;
  return net::checkpoint_from_network(netw, config, meta);
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(Checkpoint, SaveLoadPredictIsBitIdentical) {
  Rng rng(31);
  net::NetConfig config = net::default_stage1_config();
  config.input_side = 32;
  auto ck = make_checkpoint(config, 77);
  const std::string path = temp_path("ck_roundtrip.cltr");
  net::save_checkpoint(ck, path);
  auto loaded = net::load_checkpoint(path);

  net::Predictor<float> before(ck), after(loaded);
  for (int i = 0; i < 5; ++i) {
    ImagePatch img = random_patch(32, rng);
    auto a = before.predict(img);
    auto b = after.predict(img);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a[j], b[j]);
  }
  std::filesystem::remove(path);
}

TEST(Checkpoint, RepeatedPredictIsDeterministic) {
  Rng rng(5);
  net::NetConfig config = net::default_stage2_config();
  config.input_side = 32;
  auto ck = make_checkpoint(config, 3);
  net::Predictor<float> p(ck);
  ImagePatch img = random_patch(32, rng);
  auto a = p.predict(img);
  auto b = p.predict(img);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 2u);  // sigmoid head reports {p, 1-p}
  EXPECT_NEAR(a[0] + a[1], 1.0, 1e-12);
}

TEST(Checkpoint, TruncatedFileNamesOffendingTensor) {
  net::NetConfig config = net::default_stage1_config();
  config.input_side = 32;
  auto ck = make_checkpoint(config, 9);
  std::string bytes = net::serialize_checkpoint(ck);
  bytes.resize(bytes.size() - 40);  // cut into the last tensor's values
  try {
    net::deserialize_checkpoint(bytes, "test");
    FAIL() << "expected truncation error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
    // The final tensor in serialization order is the last batch-norm buffer.
    EXPECT_NE(std::string(e.what()).find("bn4.running_var"), std::string::npos);
  }
}

TEST(Checkpoint, BadMagicRejected) {
  auto ck = make_checkpoint(net::default_stage2_config(), 1);
  std::string bytes = net::serialize_checkpoint(ck);
  bytes[0] = 'X';
  EXPECT_THROW(net::deserialize_checkpoint(bytes, "test"), Error);
}

TEST(Checkpoint, UnsupportedVersionRejected) {
  auto ck = make_checkpoint(net::default_stage2_config(), 1);
  std::string bytes = net::serialize_checkpoint(ck);
  bytes[4] = 9;  // version little-endian low byte
  try {
    net::deserialize_checkpoint(bytes, "test");
    FAIL() << "expected version error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(Checkpoint, MismatchedConfigRejectedAtPredictorBuild) {
  net::NetConfig config = net::default_stage1_config();
  config.input_side = 32;
  auto ck = make_checkpoint(config, 11);
  // Claim a different architecture than the stored tensors.
  ck.config.conv_block_channels = {16, 16};
  EXPECT_THROW(net::Predictor<float>{ck}, Error);
}

TEST(Checkpoint, WrongPatchSizeRejected) {
  net::NetConfig config = net::default_stage1_config();
  config.input_side = 32;
  net::Predictor<float> p(make_checkpoint(config, 2));
  ImagePatch img(16, 16);
  EXPECT_THROW(p.predict(img), Error);
}

TEST(Checkpoint, EveryTensorNamedExactlyOnce) {
  auto ck = make_checkpoint(net::default_single_stage_config(), 4);
  std::set<std::string> names;
  for (const auto& [name, tensor] : ck.tensors) {
    EXPECT_TRUE(names.insert(name).second) << "duplicate " << name;
  }
  // 4 conv blocks (w+b), batch norm (gamma+beta+2 running), fc (w+b).
  EXPECT_EQ(ck.tensors.size(), 4u * 2 + 4 + 2);
}

TEST(Checkpoint, RandomConfigsRoundTripBitExact) {
  Rng rng(123);
  for (int trial = 0; trial < 5; ++trial) {
    net::NetConfig config = testutil::random_small_config(rng);
    auto ck = make_checkpoint(config, 100 + trial);
    auto back = net::deserialize_checkpoint(net::serialize_checkpoint(ck),
                                            "roundtrip");
    ASSERT_EQ(back.tensors.size(), ck.tensors.size());
    for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
      EXPECT_EQ(back.tensors[i].first, ck.tensors[i].first);
      EXPECT_EQ(back.tensors[i].second.shape, ck.tensors[i].second.shape);
      EXPECT_EQ(back.tensors[i].second.data, ck.tensors[i].second.data);
    }
  }
}
