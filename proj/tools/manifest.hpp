#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ecgdnn::cli {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// For a directory: SHA-256 over the sorted relative paths and file digests.
std::string sha256_path(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;
  std::map<std::string, std::filesystem::path> inputs;  // role -> path
  std::vector<std::filesystem::path> outputs;

  /// Writes `run_manifest.json` into `out_dir`; input digests are computed here.
  void write(const std::filesystem::path& out_dir) const;
};

}  // namespace ecgdnn::cli
