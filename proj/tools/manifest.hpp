#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace dualres::cli {

/// Git blob id: SHA-1 over "blob <size>\0" followed by the content.
std::string git_blob_digest(const std::string& content);
std::string file_digest(const std::filesystem::path& path);

/// Reproducibility record written next to a command's outputs.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  void set_config(nlohmann::json config) { doc_["config"] = std::move(config); }
  void set_seed(std::uint64_t seed) { doc_["seed"] = seed; }
  void add_input(const std::string& role, const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);

  const nlohmann::json& json() const { return doc_; }
  void write(const std::filesystem::path& path) const;

 private:
  nlohmann::json doc_;
};

std::filesystem::path manifest_path_for(const std::filesystem::path& output);

}  // namespace dualres::cli
