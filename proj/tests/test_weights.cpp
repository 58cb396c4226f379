#include <gtest/gtest.h>

#include <random>

#include "lpcnet/weights.hpp"

using namespace lpcnet;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.na = 32;
  c.nb = 16;
  c.width = 24;
  c.density = 0.25;
  return c;
}

WeightErrorKind kind_of(const std::vector<std::uint8_t>& bytes) {
  try {
    parse_weights(bytes);
  } catch (const WeightFormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return WeightErrorKind::BadRecord;
}

void fix_crc(std::vector<std::uint8_t>& bytes) {
  const auto crc = crc32_of(bytes.data(), bytes.size() - 4);
  std::memcpy(bytes.data() + bytes.size() - 4, &crc, 4);
}

}  // namespace

TEST(Weights, RoundTripIsBitIdentical) {
  const Model m = random_model(small_config(), 41);
  const auto bytes = serialize_model(m);
  const Model back = parse_weights(bytes);
  EXPECT_EQ(serialize_model(back), bytes);
  EXPECT_EQ(back.frame.conv1.weight, m.frame.conv1.weight);
  EXPECT_EQ(back.sample.gru_a.recurrent[2], m.sample.gru_a.recurrent[2]);
  EXPECT_EQ(back.sample.embed.v[7], m.sample.embed.v[7]);
  EXPECT_EQ(back.sample.dual_fc.a2, m.sample.dual_fc.a2);
}

TEST(Weights, UnfoldedFileIsFoldedAtLoad) {
  const ModelConfig cfg = small_config();
  Model m = random_model(cfg, 42);
  std::mt19937_64 rng(43);
  const auto u = random_unfolded_embeddings(cfg.na, 8, 1.0f, rng);
  m.sample.embed = fold_embeddings(u);
  const auto bytes = serialize_model(m, &u);
  const auto file = parse_tensor_file(bytes);
  EXPECT_EQ(file.flags & kFlagFolded, 0u);
  ASSERT_NE(file.find("embedding"), nullptr);
  const Model back = model_from_tensors(file);
  for (std::size_t k = 0; k < 9; ++k) EXPECT_EQ(back.sample.embed.v[k], m.sample.embed.v[k]);
}

TEST(Weights, TruncationNamesExpectedSize) {
  const auto bytes = serialize_model(random_model(small_config(), 44));
  for (std::size_t cut : {std::size_t{2}, std::size_t{20}, bytes.size() / 2, bytes.size() - 2}) {
    const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    try {
      parse_weights(part);
      ADD_FAILURE() << "accepted truncated file of " << cut << " bytes";
    } catch (const WeightFormatError& e) {
      EXPECT_EQ(e.kind(), WeightErrorKind::Truncated) << cut;
      EXPECT_NE(std::string(e.what()).find("expected at least"), std::string::npos) << e.what();
      EXPECT_NE(std::string(e.what()).find(std::to_string(cut)), std::string::npos) << e.what();
    }
  }
}

TEST(Weights, FlippedChecksumByte) {
  auto bytes = serialize_model(random_model(small_config(), 45));
  bytes.back() ^= 0x01;
  EXPECT_EQ(kind_of(bytes), WeightErrorKind::Checksum);
}

TEST(Weights, FlippedPayloadByte) {
  auto bytes = serialize_model(random_model(small_config(), 46));
  bytes[bytes.size() / 2] ^= 0x40;
  EXPECT_EQ(kind_of(bytes), WeightErrorKind::Checksum);
}

TEST(Weights, BadMagic) {
  auto bytes = serialize_model(random_model(small_config(), 47));
  bytes[0] = 'X';
  EXPECT_EQ(kind_of(bytes), WeightErrorKind::BadMagic);
}

TEST(Weights, VersionMismatch) {
  auto bytes = serialize_model(random_model(small_config(), 48));
  bytes[4] = 2;
  fix_crc(bytes);
  EXPECT_EQ(kind_of(bytes), WeightErrorKind::VersionMismatch);
}

TEST(Weights, TrailingBytesRejected) {
  auto bytes = serialize_model(random_model(small_config(), 49));
  bytes.push_back(0);
  EXPECT_EQ(kind_of(bytes), WeightErrorKind::BadRecord);
}

TEST(Weights, MissingTensor) {
  TensorWriter w;
  w.add_vector("frame.fc1.bias", std::vector<float>(4));
  EXPECT_EQ(kind_of(w.finish(kFlagFolded)), WeightErrorKind::MissingTensor);
}

TEST(Weights, DimensionMismatchNamesRecord) {
  Model m = random_model(small_config(), 50);
  m.sample.gru_b.bias[1].push_back(0.0f);
  try {
    parse_weights(serialize_model(m));
    FAIL() << "accepted inconsistent shapes";
  } catch (const WeightFormatError& e) {
    EXPECT_EQ(e.kind(), WeightErrorKind::Dimension);
    EXPECT_FALSE(e.record().empty());
  }
}

TEST(Weights, DiagonalWeightInsideBlockRejected) {
  std::vector<float> values(16, 0.0f);
  values[3] = 1.0f;  // row 3 of the block at column 3
  TensorWriter w;
  w.add_sparse("gru_a.recurrent.u", BlockSparseMatrix(16, 16, {{0, 3}}, values, std::vector<float>(16)));
  EXPECT_EQ(kind_of(w.finish(kFlagFolded)), WeightErrorKind::BadRecord);
}

TEST(Weights, UnknownTensorType) {
  TensorWriter w;
  w.add_vector("x", std::vector<float>(2));
  auto bytes = w.finish(kFlagFolded);
  bytes[16 + 4 + 1] = 7;  // type byte after the 1-char name
  fix_crc(bytes);
  EXPECT_EQ(kind_of(bytes), WeightErrorKind::BadRecord);
}

TEST(Weights, DescribeListsTensors) {
  const auto text = describe(parse_tensor_file(serialize_model(random_model(small_config(), 51))));
  EXPECT_NE(text.find("gru_a.recurrent.u  sparse  [32, 32]"), std::string::npos) << text;
  EXPECT_NE(text.find("gru_a.embed.h.exc  dense   [256, 32]"), std::string::npos) << text;
  EXPECT_NE(text.find("frame.conv1.weight  dense   [24, 3, 20]"), std::string::npos) << text;
}
