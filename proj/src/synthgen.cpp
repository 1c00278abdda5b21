#include "dualres/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace dualres {

using nlohmann::json;

namespace {

enum StreamTag : std::uint64_t {
  kWorldObjects = 1,
  kWorldPredicates,
  kWorldPairs,
  kImage,
  kAppearance,
  kUnion,
  kDetector,
  kDetections,
};

std::vector<double> gaussian(Rng& rng, int n, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = dist(rng);
  return v;
}

int sample_discrete(Rng& rng, const double* probs, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    acc += probs[k];
    if (r < acc) return k;
  }
  for (int k = n - 1; k >= 0; --k) {
    if (probs[k] > 0.0) return k;
  }
  return 0;
}

}  // namespace

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("generator config: " + msg); };
  if (num_train_images < 0 || num_test_images < 0) fail("image counts must be non-negative");
  if (min_objects < 2 || max_objects < min_objects) fail("need 2 <= min_objects <= max_objects");
  if (relations_per_image < 0) fail("relations_per_image must be non-negative");
  if (num_object_classes < 1) fail("num_object_classes must be positive");
  if (num_predicates < 2) fail("num_predicates must be at least 2");
  if (!(zipf_exponent > 0.0)) fail("zipf_exponent must be > 0");
  if (!(confusability >= 0.0 && confusability <= 1.0)) fail("confusability must lie in [0,1]");
  if (appearance_dim < 1 || union_dim < 1) fail("feature dims must be positive");
  if (!(noise > 0.0)) fail("noise must be > 0");
  if (num_head_predicates < 1 || num_head_predicates > num_predicates - 1) {
    fail("num_head_predicates must lie in [1, num_predicates-1]");
  }
  if (!(pair_dominance >= 0.0 && pair_dominance < 1.0)) fail("pair_dominance must lie in [0,1)");
  if (!(prototype_scale > 0.0)) fail("prototype_scale must be > 0");
  if (image_width < 1 || image_height < 1) fail("image size must be positive");
  if (!(box_jitter >= 0.0) || !(duplicate_rate >= 0.0 && duplicate_rate <= 1.0)) {
    fail("box_jitter must be >= 0 and duplicate_rate in [0,1]");
  }
}

GeneratorConfig GeneratorConfig::from_config(KeyValueConfig& kv) {
  GeneratorConfig c;
  c.seed = static_cast<std::uint64_t>(kv.require_int("seed"));
  c.num_train_images = static_cast<int>(kv.get_int("num_train_images", c.num_train_images));
  c.num_test_images = static_cast<int>(kv.get_int("num_test_images", c.num_test_images));
  c.min_objects = static_cast<int>(kv.get_int("min_objects", c.min_objects));
  c.max_objects = static_cast<int>(kv.get_int("max_objects", c.max_objects));
  c.relations_per_image = static_cast<int>(kv.get_int("relations_per_image", c.relations_per_image));
  c.num_object_classes = static_cast<int>(kv.get_int("num_object_classes", c.num_object_classes));
  c.num_predicates = static_cast<int>(kv.get_int("num_predicates", c.num_predicates));
  c.zipf_exponent = kv.get_double("zipf_exponent", c.zipf_exponent);
  c.confusability = kv.get_double("confusability", c.confusability);
  c.appearance_dim = static_cast<int>(kv.get_int("appearance_dim", c.appearance_dim));
  c.union_dim = static_cast<int>(kv.get_int("union_dim", c.union_dim));
  c.noise = kv.get_double("noise", c.noise);
  c.num_head_predicates = static_cast<int>(kv.get_int("num_head_predicates", c.num_head_predicates));
  c.pair_dominance = kv.get_double("pair_dominance", c.pair_dominance);
  c.prototype_scale = kv.get_double("prototype_scale", c.prototype_scale);
  c.detector_strength = kv.get_double("detector_strength", c.detector_strength);
  c.image_width = static_cast<int>(kv.get_int("image_width", c.image_width));
  c.image_height = static_cast<int>(kv.get_int("image_height", c.image_height));
  c.box_jitter = kv.get_double("box_jitter", c.box_jitter);
  c.duplicate_rate = kv.get_double("duplicate_rate", c.duplicate_rate);
  kv.ensure_consumed();
  c.validate();
  return c;
}

json GeneratorConfig::to_json() const {
  return {{"seed", seed},
          {"num_train_images", num_train_images},
          {"num_test_images", num_test_images},
          {"min_objects", min_objects},
          {"max_objects", max_objects},
          {"relations_per_image", relations_per_image},
          {"num_object_classes", num_object_classes},
          {"num_predicates", num_predicates},
          {"zipf_exponent", zipf_exponent},
          {"confusability", confusability},
          {"appearance_dim", appearance_dim},
          {"union_dim", union_dim},
          {"noise", noise},
          {"num_head_predicates", num_head_predicates},
          {"pair_dominance", pair_dominance},
          {"prototype_scale", prototype_scale},
          {"detector_strength", detector_strength},
          {"image_width", image_width},
          {"image_height", image_height},
          {"box_jitter", box_jitter},
          {"duplicate_rate", duplicate_rate}};
}

GeneratorConfig GeneratorConfig::from_json(const json& doc) {
  GeneratorConfig c;
  try {
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.num_train_images = doc.at("num_train_images").get<int>();
    c.num_test_images = doc.at("num_test_images").get<int>();
    c.min_objects = doc.at("min_objects").get<int>();
    c.max_objects = doc.at("max_objects").get<int>();
    c.relations_per_image = doc.at("relations_per_image").get<int>();
    c.num_object_classes = doc.at("num_object_classes").get<int>();
    c.num_predicates = doc.at("num_predicates").get<int>();
    c.zipf_exponent = doc.at("zipf_exponent").get<double>();
    c.confusability = doc.at("confusability").get<double>();
    c.appearance_dim = doc.at("appearance_dim").get<int>();
    c.union_dim = doc.at("union_dim").get<int>();
    c.noise = doc.at("noise").get<double>();
    c.num_head_predicates = doc.at("num_head_predicates").get<int>();
    c.pair_dominance = doc.at("pair_dominance").get<double>();
    c.prototype_scale = doc.at("prototype_scale").get<double>();
    c.detector_strength = doc.at("detector_strength").get<double>();
    c.image_width = doc.at("image_width").get<int>();
    c.image_height = doc.at("image_height").get<int>();
    c.box_jitter = doc.at("box_jitter").get<double>();
    c.duplicate_rate = doc.at("duplicate_rate").get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("meta.generator: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<double> zipf_pmf(int count, double exponent) {
  std::vector<double> pmf(static_cast<std::size_t>(count));
  double total = 0.0;
  for (int k = 1; k <= count; ++k) {
    pmf[static_cast<std::size_t>(k - 1)] = std::pow(static_cast<double>(k), -exponent);
    total += pmf[static_cast<std::size_t>(k - 1)];
  }
  for (auto& p : pmf) p /= total;
  return pmf;
}

WorldModel build_world(const GeneratorConfig& config) {
  config.validate();
  const int C_o = config.num_object_classes;
  const int C_r = config.num_predicates;
  const int num_real = C_r - 1;
  const int num_heads = config.num_head_predicates;
  WorldModel w;

  Rng obj_rng = make_rng(config.seed, {kWorldObjects});
  const double obj_std = config.prototype_scale / std::sqrt(static_cast<double>(config.appearance_dim));
  w.object_prototypes.resize(C_o, config.appearance_dim);
  for (int c = 0; c < C_o; ++c) {
    const auto v = gaussian(obj_rng, config.appearance_dim, obj_std);
    for (int k = 0; k < config.appearance_dim; ++k) w.object_prototypes(c, k) = v[static_cast<std::size_t>(k)];
  }

  // Independent draws first, then tails are pulled towards their head.
  Rng pred_rng = make_rng(config.seed, {kWorldPredicates});
  const double pred_std = config.prototype_scale / std::sqrt(static_cast<double>(config.union_dim));
  Mat raw = Mat::Zero(C_r, config.union_dim);
  for (int p = 1; p < C_r; ++p) {
    const auto v = gaussian(pred_rng, config.union_dim, pred_std);
    for (int k = 0; k < config.union_dim; ++k) raw(p, k) = v[static_cast<std::size_t>(k)];
  }
  w.head_of.assign(static_cast<std::size_t>(C_r), -1);
  w.predicate_prototypes = raw;
  for (int t = num_heads + 1; t < C_r; ++t) {
    const int h = 1 + (t - num_heads - 1) % num_heads;
    w.head_of[static_cast<std::size_t>(t)] = h;
    w.predicate_prototypes.row(t) = (1.0 - config.confusability) * raw.row(t) + config.confusability * raw.row(h);
  }

  // Pair table: each class pair puts `lambda` on a dominant head and the rest on
  // a residual distribution chosen so the marginal over uniform pairs is Zipf.
  const auto pmf = zipf_pmf(num_real, config.zipf_exponent);
  w.zipf_pmf.assign(static_cast<std::size_t>(C_r), 0.0);
  for (int k = 1; k < C_r; ++k) w.zipf_pmf[static_cast<std::size_t>(k)] = pmf[static_cast<std::size_t>(k - 1)];

  const int num_pairs = C_o * C_o;
  double head_mass = 0.0;
  for (int h = 1; h <= num_heads; ++h) head_mass += w.zipf_pmf[static_cast<std::size_t>(h)];
  // Largest-remainder allocation of class pairs to heads, proportional to Zipf mass.
  std::vector<int> counts(static_cast<std::size_t>(num_heads + 1), 0);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int h = 1; h <= num_heads; ++h) {
    const double exact = num_pairs * w.zipf_pmf[static_cast<std::size_t>(h)] / head_mass;
    counts[static_cast<std::size_t>(h)] = static_cast<int>(std::floor(exact));
    assigned += counts[static_cast<std::size_t>(h)];
    remainders.emplace_back(exact - std::floor(exact), h);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; assigned < num_pairs; ++k, ++assigned) {
    ++counts[static_cast<std::size_t>(remainders[static_cast<std::size_t>(k) % remainders.size()].second)];
  }
  std::vector<int> dominant;
  for (int h = 1; h <= num_heads; ++h) dominant.insert(dominant.end(), static_cast<std::size_t>(counts[static_cast<std::size_t>(h)]), h);
  Rng pair_rng = make_rng(config.seed, {kWorldPairs});
  std::shuffle(dominant.begin(), dominant.end(), pair_rng);

  double lambda = config.pair_dominance;
  for (int h = 1; h <= num_heads; ++h) {
    const double share = static_cast<double>(counts[static_cast<std::size_t>(h)]) / num_pairs;
    if (share > 0.0) lambda = std::min(lambda, w.zipf_pmf[static_cast<std::size_t>(h)] / share);
  }
  std::vector<double> residual(static_cast<std::size_t>(C_r), 0.0);
  for (int k = 1; k < C_r; ++k) {
    const double share = k <= num_heads ? static_cast<double>(counts[static_cast<std::size_t>(k)]) / num_pairs : 0.0;
    residual[static_cast<std::size_t>(k)] =
        std::max(0.0, (w.zipf_pmf[static_cast<std::size_t>(k)] - lambda * share) / (1.0 - lambda));
  }
  const double rsum = std::accumulate(residual.begin(), residual.end(), 0.0);
  for (auto& r : residual) r /= rsum;

  w.pair_table = Mat::Zero(num_pairs, C_r);
  for (int p = 0; p < num_pairs; ++p) {
    for (int k = 1; k < C_r; ++k) w.pair_table(p, k) = (1.0 - lambda) * residual[static_cast<std::size_t>(k)];
    w.pair_table(p, dominant[static_cast<std::size_t>(p)]) += lambda;
  }
  return w;
}

FeatureOracle::FeatureOracle(GeneratorConfig config, WorldModel world)
    : config_(std::move(config)), world_(std::move(world)) {}

FeatureOracle::FeatureOracle(const GeneratorConfig& config) : FeatureOracle(config, build_world(config)) {}

std::vector<double> FeatureOracle::appearance(const std::string& image_id, int object_index, int label) const {
  Rng rng = make_rng(config_.seed, {kAppearance, hash_string(image_id), static_cast<std::uint64_t>(object_index)});
  auto v = gaussian(rng, config_.appearance_dim, config_.noise);
  for (int k = 0; k < config_.appearance_dim; ++k) v[static_cast<std::size_t>(k)] += world_.object_prototypes(label, k);
  return v;
}

std::vector<double> FeatureOracle::union_features(const std::string& image_id, int subject, int object,
                                                  int predicate) const {
  Rng rng = make_rng(config_.seed, {kUnion, hash_string(image_id), static_cast<std::uint64_t>(subject),
                                    static_cast<std::uint64_t>(object)});
  auto v = gaussian(rng, config_.union_dim, config_.noise);
  if (predicate != kNoRelation) {
    for (int k = 0; k < config_.union_dim; ++k) v[static_cast<std::size_t>(k)] += world_.predicate_prototypes(predicate, k);
  }
  return v;
}

std::vector<double> FeatureOracle::detector_scores(const std::string& image_id, int slot, int label) const {
  Rng rng = make_rng(config_.seed, {kDetector, hash_string(image_id), static_cast<std::uint64_t>(slot)});
  auto logits = gaussian(rng, config_.num_object_classes, 1.0);
  logits[static_cast<std::size_t>(label)] += config_.detector_strength;
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (auto& l : logits) {
    l = std::exp(l - m);
    total += l;
  }
  for (auto& l : logits) l /= total;
  return logits;
}

std::vector<FeatureOracle::Detection> FeatureOracle::detections(const SceneAnnotation& scene) const {
  Rng rng = make_rng(config_.seed, {kDetections, hash_string(scene.image_id)});
  std::normal_distribution<double> jitter(0.0, config_.box_jitter);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double W = scene.width;
  const double H = scene.height;
  auto perturb = [&](const BoundingBox& b, double amount) {
    const double w = b.width();
    const double h = b.height();
    BoundingBox out{b.x1 + amount * jitter(rng) * w, b.y1 + amount * jitter(rng) * h,
                    b.x2 + amount * jitter(rng) * w, b.y2 + amount * jitter(rng) * h};
    out.x1 = std::clamp(out.x1, 0.0, W);
    out.x2 = std::clamp(out.x2, 0.0, W);
    out.y1 = std::clamp(out.y1, 0.0, H);
    out.y2 = std::clamp(out.y2, 0.0, H);
    if (out.x2 < out.x1) std::swap(out.x1, out.x2);
    if (out.y2 < out.y1) std::swap(out.y1, out.y2);
    return out;
  };
  std::vector<Detection> out;
  for (int i = 0; i < static_cast<int>(scene.objects.size()); ++i) {
    out.push_back({perturb(scene.objects[static_cast<std::size_t>(i)].box, 1.0), i});
    if (coin(rng) < config_.duplicate_rate) {
      out.push_back({perturb(scene.objects[static_cast<std::size_t>(i)].box, 1.5), i});
    }
  }
  return out;
}

std::string split_prefix(Split split) { return split == Split::Train ? "train" : "test"; }

Dataset generate_dataset(const GeneratorConfig& config, Split split) {
  config.validate();
  const WorldModel world = build_world(config);
  const int C_o = config.num_object_classes;
  const int C_r = config.num_predicates;
  Dataset ds;
  ds.meta.num_object_classes = C_o;
  ds.meta.num_predicates = C_r;
  ds.meta.generator = config.to_json();
  ds.meta.generator["split"] = split_prefix(split);

  const int count = split == Split::Train ? config.num_train_images : config.num_test_images;
  const double W = config.image_width;
  const double H = config.image_height;
  for (int idx = 0; idx < count; ++idx) {
    char id[32];
    std::snprintf(id, sizeof(id), "%s-%05d", split_prefix(split).c_str(), idx);
    SceneAnnotation scene;
    scene.image_id = id;
    scene.width = config.image_width;
    scene.height = config.image_height;
    Rng rng = make_rng(config.seed, {kImage, static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(idx)});
    std::uniform_int_distribution<int> count_dist(config.min_objects, config.max_objects);
    std::uniform_int_distribution<int> class_dist(0, C_o - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = count_dist(rng);

    // Disjoint grid cells, then each box grows past its cell so neighbours overlap.
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    const int rows = (n + cols - 1) / cols;
    std::vector<int> cells(static_cast<std::size_t>(rows * cols));
    std::iota(cells.begin(), cells.end(), 0);
    std::shuffle(cells.begin(), cells.end(), rng);
    const double cw = W / cols;
    const double ch = H / rows;
    for (int i = 0; i < n; ++i) {
      const int cell = cells[static_cast<std::size_t>(i)];
      const double cx = (cell % cols + 0.5) * cw;
      const double cy = (cell / cols + 0.5) * ch;
      const double hw = 0.5 * cw * (0.6 + 0.8 * unit(rng));
      const double hh = 0.5 * ch * (0.6 + 0.8 * unit(rng));
      BoundingBox b{std::round(std::max(0.0, cx - hw)), std::round(std::max(0.0, cy - hh)),
                    std::round(std::min(W, cx + hw)), std::round(std::min(H, cy + hh))};
      scene.objects.push_back({b, class_dist(rng)});
    }

    // Relations prefer overlapping pairs, then fall back to the rest.
    std::vector<ObjectPair> overlapping, separate;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const bool ov = compute_iou(scene.objects[static_cast<std::size_t>(i)].box,
                                    scene.objects[static_cast<std::size_t>(j)].box) > 0.0;
        (ov ? overlapping : separate).push_back({i, j});
      }
    }
    std::shuffle(overlapping.begin(), overlapping.end(), rng);
    std::shuffle(separate.begin(), separate.end(), rng);
    overlapping.insert(overlapping.end(), separate.begin(), separate.end());
    const int num_rel = std::min<int>(config.relations_per_image, static_cast<int>(overlapping.size()));
    for (int r = 0; r < num_rel; ++r) {
      const ObjectPair pr = overlapping[static_cast<std::size_t>(r)];
      const int cs = scene.objects[static_cast<std::size_t>(pr.subject)].label;
      const int co = scene.objects[static_cast<std::size_t>(pr.object)].label;
      const int predicate = sample_discrete(rng, world.pair_table.row(cs * C_o + co).data(), C_r);
      scene.relations.push_back({pr.subject, pr.object, predicate});
    }
    ds.images.push_back(std::move(scene));
  }
  return ds;
}

FeatureOracle oracle_from_dataset(const Dataset& dataset) {
  if (dataset.meta.generator.is_null()) {
    throw DataError("dataset has no meta.generator record; features cannot be regenerated");
  }
  json gen = dataset.meta.generator;
  gen.erase("split");
  return FeatureOracle(GeneratorConfig::from_json(gen));
}

}  // namespace dualres
