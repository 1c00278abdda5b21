#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "dualres/types.hpp"

namespace dualres {

struct DatasetMeta {
  int num_object_classes = 0;
  int num_predicates = 0;
  /// Generator record written by synthgen; null for hand-written corpora.
  nlohmann::json generator;
  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<SceneAnnotation> images;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Checks index ranges, subject != object and label ranges. Throws DataError
/// naming the image and the offending field.
void validate_dataset(const Dataset& dataset);

nlohmann::json dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(const nlohmann::json& doc);

std::string serialize_dataset(const Dataset& dataset);
Dataset parse_dataset(const std::string& text);

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace dualres
