#pragma once

#include <filesystem>
#include <string>

namespace irsc::data {

struct RemoteFile {
  std::string url;          // http(s)://host/path
  std::string sha256;       // expected digest, hex; empty skips verification
  std::filesystem::path dest;
};

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_string(const std::string& bytes);

// Downloads url to dest (skipped when dest already exists with a matching
// checksum). Throws on network failure or digest mismatch.
void fetch(const RemoteFile& file);

// Mirror defaults for the standard training/test archives.
struct DatasetMirror {
  std::string train_images_url;
  std::string test_images_url;
};
DatasetMirror default_mirror(const std::string& dataset);  // mnist | fashion

}  // namespace irsc::data
