#include "lbds/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "lbds/error.hpp"
#include "lbds/version.hpp"

namespace lbds {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary) {
  if (!out_) throw InvalidArgument("cannot write " + path.string());
  for (std::size_t k = 0; k < header.size(); ++k) out_ << (k ? "," : "") << header[k];
  out_ << '\n';
}

void CsvWriter::row(std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    out_ << (first ? "" : ",") << format_double(v);
    first = false;
  }
  out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  for (std::size_t k = 0; k < values.size(); ++k) out_ << (k ? "," : "") << format_double(values[k]);
  out_ << '\n';
}

ArtifactSet::ArtifactSet(std::filesystem::path dir, const ExperimentConfig& config, std::string command)
    : dir_(std::move(dir)),
      command_(std::move(command)),
      config_hash_(hex64(config.hash)),
      seed_(config.seed),
      csv_(config.outputs.csv),
      json_(config.outputs.json) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw InvalidArgument("cannot create output directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path ArtifactSet::add(const std::string& name) {
  if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
  return dir_ / name;
}

CsvWriter ArtifactSet::csv_file(const std::string& name, const std::vector<std::string>& header) {
  return CsvWriter(add(name), header);
}

void ArtifactSet::write_json(const std::string& name, const nlohmann::json& value) {
  std::ofstream out(add(name), std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + (dir_ / name).string());
  out << value.dump(2) << '\n';
}

void ArtifactSet::finish(const nlohmann::json& summary) {
  auto names = files_;
  std::sort(names.begin(), names.end());
  nlohmann::json list = nlohmann::json::array();
  for (const auto& n : names) {
    const auto p = dir_ / n;
    list.push_back({{"file", n}, {"bytes", std::filesystem::file_size(p)}, {"fnv1a64", hex64(file_hash(p))}});
  }
  nlohmann::json m;
  m["command"] = command_;
  m["config_hash"] = config_hash_;
  m["seed"] = seed_;
  m["versions"] = version_info();
  m["artifacts"] = list;
  m["summary"] = summary;
  std::ofstream out(dir_ / "manifest.json", std::ios::binary);
  if (!out) throw InvalidArgument("cannot write manifest in " + dir_.string());
  out << m.dump(2) << '\n';
}

nlohmann::json version_info() {
  std::ostringstream eigen, boost;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  boost << BOOST_VERSION / 100000 << '.' << BOOST_VERSION / 100 % 1000 << '.' << BOOST_VERSION % 100;
  return {{"lbds", kVersion},
          {"compiler", __VERSION__},
          {"eigen", eigen.str()},
          {"boost", boost.str()},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a64(buf.str());
}

}  // namespace lbds
