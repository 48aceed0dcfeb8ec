#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace blinkkit::archive {

struct Entry {
  std::string name;
  std::string data;
};

/// Writes a POSIX ustar archive (regular files only, mtime 0 so output is
/// byte-reproducible).
void write_tar(const std::filesystem::path& path, std::span<const Entry> entries);
std::string encode_tar(std::span<const Entry> entries);

/// Reads regular-file entries. Errors: MissingFile, CorruptCheckpoint.
std::vector<Entry> read_tar(const std::filesystem::path& path);
std::vector<Entry> decode_tar(const std::string& bytes);

}  // namespace blinkkit::archive
