#include "rs2g/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "rs2g/random.hpp"

namespace rs2g {

namespace {

constexpr double kPi = 3.14159265358979323846;

const char* kCategoryNames[kNumCategories] = {
    "ego",     "car",     "truck",        "motorcycle",
    "pedestrian", "cyclist", "lane-marking", "traffic-light"};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

std::string to_string(ObjectCategory category) {
  return kCategoryNames[static_cast<int>(category)];
}

ObjectCategory category_from_string(const std::string& name) {
  for (int i = 0; i < kNumCategories; ++i) {
    if (name == kCategoryNames[i]) return static_cast<ObjectCategory>(i);
  }
  throw std::invalid_argument("unknown object category '" + name + "'");
}

bool is_vehicle(ObjectCategory category) {
  return category == ObjectCategory::kCar ||
         category == ObjectCategory::kTruck ||
         category == ObjectCategory::kMotorcycle;
}

void DetectedObject::validate() const {
  for (double v : {bbox.x, bbox.y, bbox.w, bbox.h}) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("DetectedObject: bbox component " +
                                  std::to_string(v) + " outside [0,1]");
    }
  }
  if (!(range_m >= 0.0)) {
    throw std::invalid_argument("DetectedObject: negative range");
  }
  if (!(bearing_deg >= -180.0 && bearing_deg <= 180.0)) {
    throw std::invalid_argument("DetectedObject: bearing " +
                                std::to_string(bearing_deg) +
                                " outside [-180,180]");
  }
}

AttributeVector encode_attributes(const DetectedObject& obj) {
  AttributeVector v{};
  v[static_cast<int>(obj.category)] = 1.0;
  v[8] = obj.bbox.x;
  v[9] = obj.bbox.y;
  v[10] = obj.bbox.w;
  v[11] = obj.bbox.h;
  v[12] = clamp01(obj.range_m / 100.0);
  v[13] = obj.bearing_deg / 180.0;
  v[14] = 1.0;
  return v;
}

Tensor attribute_matrix(const std::vector<DetectedObject>& objects) {
  if (objects.empty()) {
    throw std::invalid_argument("attribute_matrix: no objects");
  }
  std::vector<double> data;
  data.reserve(objects.size() * kAttributeWidth);
  for (const auto& obj : objects) {
    const AttributeVector v = encode_attributes(obj);
    data.insert(data.end(), v.begin(), v.end());
  }
  return Tensor::matrix(static_cast<int>(objects.size()), kAttributeWidth,
                        std::move(data));
}

void Frame::validate() const {
  int egos = 0;
  for (const auto& obj : objects) {
    obj.validate();
    if (obj.category == ObjectCategory::kEgo) ++egos;
  }
  if (egos != 1) {
    throw std::invalid_argument("Frame: expected exactly one ego, got " +
                                std::to_string(egos));
  }
}

void SceneSequence::validate() const {
  if (frames.size() < 2) {
    throw std::invalid_argument("SceneSequence '" + id +
                                "': needs at least 2 frames");
  }
  if (label != 0 && label != 1) {
    throw std::invalid_argument("SceneSequence '" + id + "': label must be 0/1");
  }
  double prev = -1e300;
  for (const auto& frame : frames) {
    frame.validate();
    if (!(frame.timestamp_s > prev)) {
      throw std::invalid_argument("SceneSequence '" + id +
                                  "': timestamps not strictly increasing");
    }
    prev = frame.timestamp_s;
  }
}

void Dataset::validate() const {
  std::set<std::string> ids;
  for (const auto& seq : sequences) {
    seq.validate();
    if (!ids.insert(seq.id).second) {
      throw std::invalid_argument("Dataset: duplicate sequence id '" + seq.id +
                                  "'");
    }
  }
}

bool same_sequences(const Dataset& a, const Dataset& b) {
  return a.sequences == b.sequences;
}

DomainConfig DomainConfig::domain_a() { return DomainConfig{}; }

DomainConfig DomainConfig::domain_b() {
  DomainConfig cfg;
  cfg.tag = "B";
  cfg.lane_width_m = 3.9;
  cfg.position_noise_m = 0.225;  // +50% over domain A
  cfg.min_vehicles = 4;
  cfg.max_vehicles = 8;
  return cfg;
}

void DomainConfig::validate() const {
  if (frames_per_sequence < 2) {
    throw std::invalid_argument("DomainConfig: frames_per_sequence < 2");
  }
  if (!(frame_interval_s > 0.0)) {
    throw std::invalid_argument("DomainConfig: frame interval must be > 0");
  }
  if (!(lane_width_m > 0.0)) {
    throw std::invalid_argument("DomainConfig: lane width must be > 0");
  }
  if (!(position_noise_m >= 0.0)) {
    throw std::invalid_argument("DomainConfig: negative position noise");
  }
  if (min_vehicles < 1 || max_vehicles < min_vehicles) {
    throw std::invalid_argument("DomainConfig: bad vehicle count range");
  }
  if (!(risk_threshold_m > 0.0) ||
      risk_threshold_m >= placement_range_m / 4.0) {
    throw std::invalid_argument(
        "DomainConfig: risk threshold infeasible for placement range");
  }
}

namespace {

struct MovingVehicle {
  ObjectCategory category;
  int lane;          // 0, 1, 2
  double x0;         // longitudinal offset from ego at t=0, meters
  double speed_rel;  // longitudinal speed relative to ego, m/s
};

double smoothstep(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * (3.0 - 2.0 * s);
}

ObjectCategory sample_vehicle_category(Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.7) return ObjectCategory::kCar;
  if (u < 0.85) return ObjectCategory::kTruck;
  return ObjectCategory::kMotorcycle;
}

BBox synth_bbox(ObjectCategory category, double range_m, double bearing_deg) {
  const double size_scale = category == ObjectCategory::kTruck    ? 1.6
                            : category == ObjectCategory::kMotorcycle ? 0.5
                                                                      : 1.0;
  const double h =
      std::clamp(2.5 * size_scale / std::max(range_m, 2.5), 0.01, 0.9);
  const double w = std::clamp(h * 0.8, 0.01, 0.9);
  const double x = clamp01(0.5 + 0.45 * std::sin(bearing_deg * kPi / 180.0));
  const double y = clamp01(0.45 + 0.4 / (1.0 + range_m / 10.0));
  return BBox{x, y, w, h};
}

// One lane-change clip. The ego starts in the center lane and merges into
// an adjacent lane; a designated vehicle in the target lane controls the
// minimum gap, so `want_risky` picks its clearance band.
SceneSequence synth_sequence(const DomainConfig& cfg, bool want_risky,
                             Rng& rng) {
  const int frames = cfg.frames_per_sequence;
  const double duration = (frames - 1) * cfg.frame_interval_s;
  const double lane_w = cfg.lane_width_m;
  const double thr = cfg.risk_threshold_m;

  const int dir = rng.bernoulli(0.5) ? 1 : -1;
  const double merge_start = rng.uniform(0.15, 0.35) * duration;
  const double merge_end =
      std::min(merge_start + rng.uniform(0.3, 0.45) * duration,
               duration * 0.95);

  const int n_vehicles = rng.uniform_int(cfg.min_vehicles, cfg.max_vehicles);
  std::vector<MovingVehicle> vehicles;

  // Gap-controlling vehicle in the target lane. Its longitudinal offset is
  // pinned at merge completion so the realized minimum gap lands in the
  // intended band; near-zero relative speed keeps it there.
  {
    const double gap = want_risky ? rng.uniform(1.0, 0.7 * thr)
                                  : rng.uniform(1.9 * thr, 4.0 * thr);
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    const double speed_rel = rng.uniform(-0.2, 0.2);
    const double x0 = sign * gap - speed_rel * merge_end;
    vehicles.push_back(
        {sample_vehicle_category(rng), 1 + dir, x0, speed_rel});
  }

  // Background traffic, kept clear of the threshold band: the longitudinal
  // offset never shrinks below a safety buffer.
  const double buffer = thr + 3.0;
  for (int i = 1; i < n_vehicles; ++i) {
    const int lane = rng.uniform_int(0, 2);
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    const double mag = rng.uniform(buffer + 4.0, cfg.placement_range_m * 0.4);
    const double max_approach = std::max(0.0, (mag - buffer) / duration);
    const double speed_rel =
        rng.uniform(-std::min(2.0, max_approach), 2.0) * sign;
    vehicles.push_back(
        {sample_vehicle_category(rng), lane, sign * mag, speed_rel});
  }

  SceneSequence seq;
  seq.domain_tag = cfg.tag;
  seq.frames.reserve(frames);
  for (int f = 0; f < frames; ++f) {
    const double t = f * cfg.frame_interval_s;
    const double ego_y =
        dir * lane_w *
        smoothstep((t - merge_start) / std::max(merge_end - merge_start, 1e-9));

    Frame frame;
    frame.timestamp_s = t;
    DetectedObject ego;
    ego.category = ObjectCategory::kEgo;
    ego.bbox = BBox{0.5, 0.85, 0.3, 0.12};
    ego.range_m = 0.0;
    ego.bearing_deg = 0.0;
    frame.objects.push_back(ego);

    for (const auto& v : vehicles) {
      const double vx = v.x0 + v.speed_rel * t +
                        rng.normal(0.0, cfg.position_noise_m);
      const double vy = (v.lane - 1) * lane_w - ego_y +
                        rng.normal(0.0, cfg.position_noise_m);
      DetectedObject obj;
      obj.category = v.category;
      obj.range_m = std::hypot(vx, vy);
      obj.bearing_deg = std::atan2(vy, vx) * 180.0 / kPi;
      obj.bbox = synth_bbox(v.category, obj.range_m, obj.bearing_deg);
      frame.objects.push_back(obj);
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace

int recompute_label(const SceneSequence& seq, double risk_threshold_m) {
  double min_gap = 1e300;
  for (const auto& frame : seq.frames) {
    for (const auto& obj : frame.objects) {
      if (is_vehicle(obj.category)) {
        min_gap = std::min(min_gap, obj.range_m);
      }
    }
  }
  return min_gap < risk_threshold_m ? 1 : 0;
}

Dataset generate_synthetic(const DomainConfig& config, int n_sequences,
                           double risky_ratio, std::uint64_t seed) {
  config.validate();
  if (n_sequences < 2) {
    throw std::invalid_argument("generate_synthetic: need at least 2 sequences");
  }
  if (!(risky_ratio > 0.0 && risky_ratio < 1.0)) {
    throw std::invalid_argument("generate_synthetic: risky_ratio outside (0,1)");
  }

  const Rng base(seed);
  const int n_risky =
      static_cast<int>(std::llround(risky_ratio * n_sequences));
  std::vector<int> wanted(static_cast<std::size_t>(n_sequences), 0);
  for (int i = 0; i < n_risky; ++i) wanted[static_cast<std::size_t>(i)] = 1;
  {
    Rng shuffler = base.child(7);
    shuffler.shuffle(wanted);
  }

  Dataset dataset;
  dataset.sequences.reserve(static_cast<std::size_t>(n_sequences));
  for (int i = 0; i < n_sequences; ++i) {
    const bool want = wanted[static_cast<std::size_t>(i)] == 1;
    const Rng seq_base = base.child(1000 + static_cast<std::uint64_t>(i));
    SceneSequence seq;
    bool ok = false;
    for (int attempt = 0; attempt < 200; ++attempt) {
      Rng rng = seq_base.child(static_cast<std::uint64_t>(attempt));
      seq = synth_sequence(config, want, rng);
      if (recompute_label(seq, config.risk_threshold_m) == (want ? 1 : 0)) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw std::runtime_error(
          "generate_synthetic: could not realize intended label for sequence " +
          std::to_string(i));
    }
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "%s-%06d", config.tag.c_str(), i);
    seq.id = idbuf;
    seq.label = want ? 1 : 0;
    dataset.sequences.push_back(std::move(seq));
  }

  nlohmann::json meta = {{"generator", "lane-change-v1"},
                         {"domain", config.tag},
                         {"n_sequences", n_sequences},
                         {"risky_ratio", risky_ratio},
                         {"risk_threshold_m", config.risk_threshold_m},
                         {"seed", seed}};
  dataset.metadata_json = meta.dump();
  dataset.validate();
  return dataset;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset,
                                  double train_fraction, std::uint64_t seed) {
  const auto n = dataset.sequences.size();
  if (n < 2) throw std::invalid_argument("split: need at least 2 sequences");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split: train_fraction outside (0,1)");
  }
  std::vector<std::size_t> risky, safe;
  for (std::size_t i = 0; i < n; ++i) {
    (dataset.sequences[i].label == 1 ? risky : safe).push_back(i);
  }
  if (risky.empty() || safe.empty()) {
    throw std::invalid_argument(
        "split: stratification impossible, a class has 0 sequences");
  }
  Rng rng(seed);
  {
    Rng r1 = rng.child(1);
    r1.shuffle(risky);
  }
  {
    Rng r2 = rng.child(2);
    r2.shuffle(safe);
  }

  const long total_train =
      std::llround(train_fraction * static_cast<double>(n));
  long train_r = std::llround(train_fraction * static_cast<double>(risky.size()));
  train_r = std::clamp(train_r, 0L, static_cast<long>(risky.size()));
  long train_s = total_train - train_r;
  if (train_s < 0) {
    train_r += train_s;
    train_s = 0;
  }
  if (train_s > static_cast<long>(safe.size())) {
    train_r += train_s - static_cast<long>(safe.size());
    train_s = static_cast<long>(safe.size());
  }
  train_r = std::clamp(train_r, 0L, static_cast<long>(risky.size()));

  Dataset train, test;
  train.metadata_json = dataset.metadata_json;
  test.metadata_json = dataset.metadata_json;
  for (std::size_t i = 0; i < risky.size(); ++i) {
    auto& target = static_cast<long>(i) < train_r ? train : test;
    target.sequences.push_back(dataset.sequences[risky[i]]);
  }
  for (std::size_t i = 0; i < safe.size(); ++i) {
    auto& target = static_cast<long>(i) < train_s ? train : test;
    target.sequences.push_back(dataset.sequences[safe[i]]);
  }
  return {std::move(train), std::move(test)};
}

namespace {

nlohmann::json object_to_json(const DetectedObject& obj) {
  return {{"category", to_string(obj.category)},
          {"bbox", {obj.bbox.x, obj.bbox.y, obj.bbox.w, obj.bbox.h}},
          {"range_m", obj.range_m},
          {"bearing_deg", obj.bearing_deg}};
}

DetectedObject object_from_json(const nlohmann::json& j) {
  DetectedObject obj;
  obj.category = category_from_string(j.at("category").get<std::string>());
  const auto& bb = j.at("bbox");
  if (!bb.is_array() || bb.size() != 4) {
    throw std::invalid_argument("bbox must be an array of 4 numbers");
  }
  obj.bbox = BBox{bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(),
                  bb[3].get<double>()};
  obj.range_m = j.at("range_m").get<double>();
  obj.bearing_deg = j.at("bearing_deg").get<double>();
  return obj;
}

}  // namespace

std::string sequence_to_json(const SceneSequence& seq) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& frame : seq.frames) {
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& obj : frame.objects) objects.push_back(object_to_json(obj));
    frames.push_back(
        {{"timestamp_s", frame.timestamp_s}, {"objects", std::move(objects)}});
  }
  nlohmann::json j = {{"id", seq.id},
                      {"domain_tag", seq.domain_tag},
                      {"label", seq.label},
                      {"frames", std::move(frames)}};
  return j.dump();
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const auto& seq : dataset.sequences) {
    out << sequence_to_json(seq) << "\n";
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  Dataset dataset;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      SceneSequence seq;
      seq.id = j.at("id").get<std::string>();
      seq.domain_tag = j.at("domain_tag").get<std::string>();
      seq.label = j.at("label").get<int>();
      for (const auto& jf : j.at("frames")) {
        Frame frame;
        frame.timestamp_s = jf.at("timestamp_s").get<double>();
        for (const auto& jo : jf.at("objects")) {
          frame.objects.push_back(object_from_json(jo));
        }
        seq.frames.push_back(std::move(frame));
      }
      seq.validate();
      dataset.sequences.push_back(std::move(seq));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": bad sequence record: " + e.what());
    }
  }
  dataset.validate();
  return dataset;
}

}  // namespace rs2g
