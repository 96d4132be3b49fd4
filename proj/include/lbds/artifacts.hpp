#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "json.hpp"
#include "lbds/config.hpp"

namespace lbds {

/// Shortest text that reads back as the same double ("%.17g"); nan and inf
/// are spelled out.
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(std::initializer_list<double> values);
  void row(const std::vector<double>& values);

 private:
  std::ofstream out_;
};

/// Output directory of one command run. Files are registered as they are
/// created; finish() writes manifest.json with their sizes and hashes.
class ArtifactSet {
 public:
  ArtifactSet(std::filesystem::path dir, const ExperimentConfig& config, std::string command);

  const std::filesystem::path& dir() const { return dir_; }
  bool csv() const { return csv_; }
  bool json() const { return json_; }
  std::filesystem::path add(const std::string& name);
  CsvWriter csv_file(const std::string& name, const std::vector<std::string>& header);
  void write_json(const std::string& name, const nlohmann::json& value);
  /// Writes manifest.json; `summary` is embedded verbatim.
  void finish(const nlohmann::json& summary);
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::string command_;
  std::string config_hash_;
  std::uint64_t seed_;
  bool csv_, json_;
  std::vector<std::string> files_;
};

/// Library, compiler and dependency versions recorded in manifests.
nlohmann::json version_info();

/// FNV-1a of a file's bytes.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace lbds
