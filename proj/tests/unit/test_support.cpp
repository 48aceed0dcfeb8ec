#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "blinkkit/archive.hpp"
#include "blinkkit/csv.hpp"
#include "blinkkit/error.hpp"
#include "blinkkit/timestamp.hpp"
#include "test_util.hpp"

using namespace blinkkit;

TEST(Csv, ParseSkipsBlankLinesAndCr) {
  const auto t = csv::parse("a,b\r\n1,2\n\n3,\n");
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][1], "");
  EXPECT_EQ(t.line_numbers[1], 4u);
  EXPECT_EQ(t.column("b"), 1u);
  EXPECT_THROW(t.column("c"), Error);
  EXPECT_THROW(csv::parse("a,b\n1\n"), Error);
  EXPECT_TRUE(csv::parse("").header.empty());
}

TEST(Csv, Numbers) {
  EXPECT_EQ(csv::to_double("2.5", "x"), 2.5);
  EXPECT_EQ(csv::to_int("-7", "x"), -7);
  EXPECT_THROW(csv::to_double("2.5x", "x"), Error);
  EXPECT_THROW(csv::to_double("", "x"), Error);
  EXPECT_THROW(csv::to_int("1.5", "x"), Error);
  EXPECT_EQ(csv::format_double(0.1), "0.1");
  EXPECT_EQ(csv::format_double(3.0), "3");
}

TEST(Csv, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double v = i % 2 ? u(rng) : std::ldexp(u(rng), -40);
    ASSERT_EQ(csv::to_double(csv::format_double(v), "x"), v);
  }
}

TEST(Timestamp, Iso8601) {
  const Timestamp t{std::chrono::milliseconds(1700000000123LL)};
  EXPECT_EQ(format_iso8601(t), "2023-11-14T22:13:20.123Z");
  EXPECT_EQ(parse_iso8601("2023-11-14T22:13:20.123Z"), t);
  EXPECT_EQ(parse_iso8601("2023-11-14T22:13:20.123+00:00"), t);
  EXPECT_EQ(parse_iso8601("2023-11-14T22:13:20Z"), t - std::chrono::milliseconds(123));
  EXPECT_THROW(parse_iso8601("2023-11-14 22:13:20"), Error);
  EXPECT_THROW(parse_iso8601("yesterday"), Error);
  // Lexicographic order follows time order.
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const Timestamp a{std::chrono::milliseconds(static_cast<long long>(rng() % 4000000000000ULL))};
    const Timestamp b{std::chrono::milliseconds(static_cast<long long>(rng() % 4000000000000ULL))};
    ASSERT_EQ(parse_iso8601(format_iso8601(a)), a);
    ASSERT_EQ(a < b, format_iso8601(a) < format_iso8601(b));
  }
}

TEST(Archive, RoundTripAndReproducible) {
  std::string blob(5000, '\0');
  for (std::size_t i = 0; i < blob.size(); ++i) blob[i] = static_cast<char>(i * 31);
  const std::vector<archive::Entry> entries = {{"config.json", "{}"}, {"weights/conv1.bin", blob}, {"empty", ""}};
  const auto bytes = archive::encode_tar(entries);
  EXPECT_EQ(bytes.size() % 512, 0u);
  EXPECT_EQ(bytes, archive::encode_tar(entries));
  const auto back = archive::decode_tar(bytes);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].name, entries[i].name);
    EXPECT_EQ(back[i].data, entries[i].data);
  }
  EXPECT_THROW(archive::decode_tar(bytes.substr(0, 700)), Error);
  std::string bad = bytes;
  bad[150] ^= 0x55;  // header checksum field
  EXPECT_THROW(archive::decode_tar(bad), Error);

  blinkkit::testing::TempDir dir;
  archive::write_tar(dir / "x.tar", entries);
  EXPECT_EQ(archive::read_tar(dir / "x.tar").size(), 3u);
  EXPECT_THROW(archive::read_tar(dir / "missing.tar"), Error);
}
