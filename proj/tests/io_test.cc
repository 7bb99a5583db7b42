#include <cstring>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "shrinklab/checkpoint.h"
#include "shrinklab/text_io.h"
#include "test_support.h"

namespace shrinklab {
namespace {

TEST(TextIoTest, NineSignificantDigits) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(format_real(123456789.25), "123456789");
  EXPECT_EQ(round_to_text(1.0 / 3.0), 0.333333333);
  // Rounding is idempotent.
  const double r = round_to_text(2.0 / 7.0);
  EXPECT_EQ(round_to_text(r), r);
}

TEST(TextIoTest, AtomicWriteCreatesDirectories) {
  const auto dir = std::filesystem::temp_directory_path() / "shrinklab_io_test";
  std::filesystem::remove_all(dir);
  write_file_atomic(dir / "a" / "b.txt", "hello\n");
  EXPECT_EQ(read_file(dir / "a" / "b.txt"), "hello\n");
  EXPECT_FALSE(std::filesystem::exists(dir / "a" / "b.txt.tmp"));
  std::filesystem::remove_all(dir);
}

TEST(TextIoTest, CsvParsing) {
  const CsvTable t = parse_csv("a,b\n1,2\n\n3,4\n");
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.line_numbers[1], 4);
  EXPECT_EQ(t.column("b"), 1);
  EXPECT_EQ(t.column("z"), -1);
  try {
    parse_csv("a,b\n1,2\n3\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(parse_real("1.5x", 7), FormatError);
  EXPECT_THROW(parse_real("1e400", 7), FormatError);
  const double tiny = 2.47034305e-318;
  EXPECT_EQ(parse_real(format_real(tiny), 1), round_to_text(tiny));
  EXPECT_EQ(parse_integer("42", 1), 42);
}

TEST(CheckpointTest, RoundTripAndFraming) {
  MlpParams p = MlpParams::random(2, 4, 3, 9);
  Checkpoint c;
  c.add(p.params());
  const std::string bytes = c.serialize();
  const auto newline = bytes.find('\n');
  const nlohmann::json header = nlohmann::json::parse(bytes.substr(0, newline));
  EXPECT_EQ(header["format"], "shrinklab-checkpoint");
  EXPECT_EQ(header["tensors"][0]["name"], "encoder.0.weight");
  EXPECT_EQ(header["tensors"][0]["shape"], nlohmann::json::array({4, 2}));
  // Payload: every element as a little-endian float64.
  int64_t elements = 0;
  for (const auto& t : header["tensors"]) {
    int64_t n = 1;
    for (int64_t d : t["shape"]) n *= d;
    elements += n;
  }
  EXPECT_EQ(bytes.size() - newline - 1, static_cast<size_t>(elements * 8));
  double first = 0.0;
  std::memcpy(&first, bytes.data() + newline + 1, 8);
  EXPECT_EQ(first, p.encoder.layer(0).weight(0, 0));

  const MlpParams q = params_from_checkpoint(Checkpoint::deserialize(bytes));
  EXPECT_EQ(q.encoder.layer(0).weight, p.encoder.layer(0).weight);
  EXPECT_EQ(q.decoder.layer(2).bias, p.decoder.layer(2).bias);
}

TEST(CheckpointTest, EncoderOnlyAndErrors) {
  MlpParams p = MlpParams::random(2, 4, 3, 9);
  Checkpoint c;
  c.add(p.params());
  const Mlp enc = mlp_from_checkpoint(c, "encoder");
  EXPECT_EQ(enc.out_dim(), 3);
  EXPECT_THROW(c.get("codebook.tokens"), FormatError);

  const std::string bytes = c.serialize();
  EXPECT_THROW(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 3)),
               FormatError);
  EXPECT_THROW(Checkpoint::deserialize(bytes + "x"), FormatError);
  EXPECT_THROW(Checkpoint::deserialize("not json\n"), FormatError);
  EXPECT_THROW(Checkpoint::read("/nonexistent/ckpt.bin"), FormatError);
}

TEST(CheckpointTest, FileRoundTripAndLoadInto) {
  MlpParams p = MlpParams::random(3, 5, 2, 1);
  Checkpoint c;
  c.add(p.params());
  const auto path =
      std::filesystem::temp_directory_path() / "shrinklab_ckpt_test.bin";
  c.write(path);
  MlpParams other = MlpParams::random(3, 5, 2, 2);
  Checkpoint::read(path).load_into(other.params());
  EXPECT_EQ(other.encoder.layer(1).weight, p.encoder.layer(1).weight);
  MlpParams wrong = MlpParams::random(3, 6, 2, 2);
  EXPECT_THROW(Checkpoint::read(path).load_into(wrong.params()), FormatError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace shrinklab
