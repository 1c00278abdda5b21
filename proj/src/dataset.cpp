#include "dualres/dataset.hpp"

#include <fstream>
#include <sstream>

namespace dualres {

using nlohmann::json;

namespace {

std::string where(const std::string& image_id, const std::string& field) {
  return "image '" + image_id + "': " + field;
}

template <typename T>
T required(const json& obj, const char* key, const std::string& context) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw DataError(context + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError(context + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

std::string to_string(TaskMode mode) {
  switch (mode) {
    case TaskMode::PredCls: return "predcls";
    case TaskMode::SGCls: return "sgcls";
    case TaskMode::SGGenSim: return "sggen-sim";
  }
  return "?";
}

TaskMode parse_task_mode(std::string_view text) {
  if (text == "predcls") return TaskMode::PredCls;
  if (text == "sgcls") return TaskMode::SGCls;
  if (text == "sggen-sim" || text == "sggen") return TaskMode::SGGenSim;
  throw ConfigError("unknown task '" + std::string(text) + "' (expected predcls|sgcls|sggen-sim)");
}

void validate_dataset(const Dataset& dataset) {
  const int num_classes = dataset.meta.num_object_classes;
  const int num_predicates = dataset.meta.num_predicates;
  if (num_classes <= 0) throw DataError("meta: num_object_classes must be positive");
  if (num_predicates <= 0) throw DataError("meta: num_predicates must be positive");
  for (const auto& image : dataset.images) {
    if (image.width <= 0 || image.height <= 0) {
      throw DataError(where(image.image_id, "width/height must be positive"));
    }
    const int n = static_cast<int>(image.objects.size());
    for (int k = 0; k < n; ++k) {
      const auto& obj = image.objects[k];
      if (!obj.box.valid()) {
        throw DataError(where(image.image_id, "objects[" + std::to_string(k) + "].box is invalid"));
      }
      if (obj.label < 0 || obj.label >= num_classes) {
        throw DataError(where(image.image_id, "objects[" + std::to_string(k) +
                                                  "].class out of range: " + std::to_string(obj.label)));
      }
    }
    for (std::size_t r = 0; r < image.relations.size(); ++r) {
      const auto& rel = image.relations[r];
      const std::string field = "relations[" + std::to_string(r) + "]";
      if (rel.subject < 0 || rel.subject >= n || rel.object < 0 || rel.object >= n) {
        throw DataError(where(image.image_id, field + " object index out of range"));
      }
      if (rel.subject == rel.object) {
        throw DataError(where(image.image_id, field + " has subj == obj"));
      }
      if (rel.predicate < 0 || rel.predicate >= num_predicates) {
        throw DataError(where(image.image_id, field + ".predicate out of range: " +
                                                  std::to_string(rel.predicate)));
      }
    }
  }
}

json dataset_to_json(const Dataset& dataset) {
  json meta = {{"num_object_classes", dataset.meta.num_object_classes},
               {"num_predicates", dataset.meta.num_predicates}};
  if (!dataset.meta.generator.is_null()) meta["generator"] = dataset.meta.generator;
  json images = json::array();
  for (const auto& image : dataset.images) {
    json objects = json::array();
    for (const auto& obj : image.objects) {
      objects.push_back({{"box", {obj.box.x1, obj.box.y1, obj.box.x2, obj.box.y2}},
                         {"class", obj.label}});
    }
    json relations = json::array();
    for (const auto& rel : image.relations) {
      relations.push_back({{"subj", rel.subject}, {"obj", rel.object}, {"predicate", rel.predicate}});
    }
    images.push_back({{"id", image.image_id},
                      {"width", image.width},
                      {"height", image.height},
                      {"objects", std::move(objects)},
                      {"relations", std::move(relations)}});
  }
  return {{"meta", std::move(meta)}, {"images", std::move(images)}};
}

Dataset dataset_from_json(const json& doc) {
  Dataset out;
  if (!doc.is_object()) throw DataError("dataset: top level must be an object");
  const json meta = required<json>(doc, "meta", "dataset");
  out.meta.num_object_classes = required<int>(meta, "num_object_classes", "meta");
  out.meta.num_predicates = required<int>(meta, "num_predicates", "meta");
  if (meta.contains("generator")) out.meta.generator = meta.at("generator");

  const json images = required<json>(doc, "images", "dataset");
  if (!images.is_array()) throw DataError("dataset: 'images' must be an array");
  for (std::size_t idx = 0; idx < images.size(); ++idx) {
    const json& img = images[idx];
    SceneAnnotation scene;
    scene.image_id = required<std::string>(img, "id", "images[" + std::to_string(idx) + "]");
    const std::string& id = scene.image_id;
    scene.width = required<int>(img, "width", where(id, "width"));
    scene.height = required<int>(img, "height", where(id, "height"));
    const json objects = required<json>(img, "objects", where(id, "objects"));
    const json relations = required<json>(img, "relations", where(id, "relations"));
    if (!objects.is_array() || !relations.is_array()) {
      throw DataError(where(id, "objects/relations must be arrays"));
    }
    for (std::size_t k = 0; k < objects.size(); ++k) {
      const std::string ctx = where(id, "objects[" + std::to_string(k) + "]");
      const auto box = required<std::vector<double>>(objects[k], "box", ctx);
      if (box.size() != 4) throw DataError(ctx + ".box must have 4 coordinates");
      scene.objects.push_back({{box[0], box[1], box[2], box[3]}, required<int>(objects[k], "class", ctx)});
    }
    for (std::size_t r = 0; r < relations.size(); ++r) {
      const std::string ctx = where(id, "relations[" + std::to_string(r) + "]");
      scene.relations.push_back({required<int>(relations[r], "subj", ctx),
                                 required<int>(relations[r], "obj", ctx),
                                 required<int>(relations[r], "predicate", ctx)});
    }
    out.images.push_back(std::move(scene));
  }
  validate_dataset(out);
  return out;
}

std::string serialize_dataset(const Dataset& dataset) { return dataset_to_json(dataset).dump(1) + "\n"; }

Dataset parse_dataset(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("dataset: JSON parse error: ") + e.what());
  }
  return dataset_from_json(doc);
}

Dataset load_dataset(const std::filesystem::path& path) { return parse_dataset(read_text_file(path)); }

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  validate_dataset(dataset);
  write_text_file(path, serialize_dataset(dataset));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace dualres
