#include "blinkkit/archive.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "blinkkit/error.hpp"

namespace blinkkit::archive {

namespace {

constexpr std::size_t kBlock = 512;

void put_octal(char* field, std::size_t width, unsigned long long value) {
  // width includes the terminating NUL.
  std::snprintf(field, width, "%0*llo", static_cast<int>(width - 1), value);
}

unsigned long long get_octal(const char* field, std::size_t width) {
  std::size_t i = 0;
  while (i < width && field[i] == ' ') ++i;
  unsigned long long value = 0;
  for (; i < width && field[i] != '\0' && field[i] != ' '; ++i) {
    const char c = field[i];
    if (c < '0' || c > '7') throw Error(ErrorCode::CorruptCheckpoint, "bad octal field in tar header");
    value = value * 8 + static_cast<unsigned>(c - '0');
  }
  return value;
}

unsigned checksum(const char* header) {
  unsigned sum = 0;
  for (std::size_t i = 0; i < kBlock; ++i) {
    const bool in_field = i >= 148 && i < 156;
    sum += in_field ? static_cast<unsigned>(' ') : static_cast<unsigned char>(header[i]);
  }
  return sum;
}

}  // namespace

std::string encode_tar(std::span<const Entry> entries) {
  std::string out;
  for (const auto& e : entries) {
    if (e.name.empty() || e.name.size() >= 100) {
      throw Error(ErrorCode::InvariantViolation, "tar entry names must be 1..99 characters");
    }
    char header[kBlock];
    std::memset(header, 0, sizeof(header));
    std::memcpy(header, e.name.data(), e.name.size());
    put_octal(header + 100, 8, 0644);
    put_octal(header + 108, 8, 0);
    put_octal(header + 116, 8, 0);
    put_octal(header + 124, 12, e.data.size());
    put_octal(header + 136, 12, 0);
    header[156] = '0';
    std::memcpy(header + 257, "ustar", 6);
    std::memcpy(header + 263, "00", 2);
    std::snprintf(header + 148, 8, "%06o", checksum(header));
    header[155] = ' ';
    out.append(header, kBlock);
    out += e.data;
    out.append((kBlock - e.data.size() % kBlock) % kBlock, '\0');
  }
  out.append(2 * kBlock, '\0');
  return out;
}

void write_tar(const std::filesystem::path& path, std::span<const Entry> entries) {
  const auto bytes = encode_tar(entries);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

std::vector<Entry> decode_tar(const std::string& bytes) {
  std::vector<Entry> entries;
  std::size_t pos = 0;
  while (pos + kBlock <= bytes.size()) {
    const char* header = bytes.data() + pos;
    bool zero = true;
    for (std::size_t i = 0; i < kBlock && zero; ++i) zero = header[i] == '\0';
    if (zero) return entries;
    const auto stored = get_octal(header + 148, 8);
    if (stored != checksum(header)) throw Error(ErrorCode::CorruptCheckpoint, "tar header checksum mismatch");
    const auto size = get_octal(header + 124, 12);
    pos += kBlock;
    if (pos + size > bytes.size()) throw Error(ErrorCode::CorruptCheckpoint, "truncated tar entry");
    const char type = header[156];
    if (type == '0' || type == '\0') {
      Entry e;
      e.name.assign(header, strnlen(header, 100));
      e.data.assign(bytes.data() + pos, size);
      entries.push_back(std::move(e));
    }
    pos += (size + kBlock - 1) / kBlock * kBlock;
  }
  throw Error(ErrorCode::CorruptCheckpoint, "tar archive lacks its end marker");
}

std::vector<Entry> read_tar(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_tar(buffer.str());
}

}  // namespace blinkkit::archive
