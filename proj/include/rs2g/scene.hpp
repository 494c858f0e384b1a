#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rs2g/tensor.hpp"

namespace rs2g {

enum class ObjectCategory {
  kEgo,
  kCar,
  kTruck,
  kMotorcycle,
  kPedestrian,
  kCyclist,
  kLaneMarking,
  kTrafficLight,
};

inline constexpr int kNumCategories = 8;
inline constexpr int kAttributeWidth = 15;

std::string to_string(ObjectCategory category);
ObjectCategory category_from_string(const std::string& name);
bool is_vehicle(ObjectCategory category);

// Normalized image-space box: center x/y, width, height, all in [0,1].
struct BBox {
  double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
  bool operator==(const BBox&) const = default;
};

// One detected object as an upstream detector would report it. This struct
// is the ingestion boundary: the pipeline never sees raw sensor data.
struct DetectedObject {
  ObjectCategory category = ObjectCategory::kCar;
  BBox bbox;
  double range_m = 0.0;
  double bearing_deg = 0.0;

  void validate() const;
  bool operator==(const DetectedObject&) const = default;
};

using AttributeVector = std::array<double, kAttributeWidth>;

// 8-way category one-hot, 4 bbox components, range normalized by 100 m
// (clamped), bearing normalized by 180, constant bias 1.
AttributeVector encode_attributes(const DetectedObject& obj);

// Stacks encoded attributes into an n-by-15 constant tensor.
Tensor attribute_matrix(const std::vector<DetectedObject>& objects);

struct Frame {
  double timestamp_s = 0.0;
  std::vector<DetectedObject> objects;

  void validate() const;  // exactly one ego
  bool operator==(const Frame&) const = default;
};

struct SceneSequence {
  std::string id;
  std::string domain_tag;
  int label = 0;  // 0 safe, 1 risky
  std::vector<Frame> frames;

  void validate() const;
  bool operator==(const SceneSequence&) const = default;
};

struct Dataset {
  std::vector<SceneSequence> sequences;
  std::string metadata_json;  // generator config + seed; not serialized

  void validate() const;  // unique ids
  std::size_t size() const { return sequences.size(); }
};

bool same_sequences(const Dataset& a, const Dataset& b);

// Scenario generator domain. Domain B shifts geometry, noise, and traffic
// density relative to A to emulate a Sim2Real-style distribution shift.
struct DomainConfig {
  std::string tag = "A";
  double lane_width_m = 3.5;
  double position_noise_m = 0.15;
  int min_vehicles = 2;
  int max_vehicles = 6;
  double risk_threshold_m = 4.0;
  int frames_per_sequence = 20;
  double frame_interval_s = 0.5;
  double placement_range_m = 200.0;  // longitudinal envelope around ego

  static DomainConfig domain_a();
  static DomainConfig domain_b();
  void validate() const;
};

// Kinematic lane-change scenarios on a straight 3-lane road; a sequence is
// risky iff the minimum ego-to-vehicle gap falls below the risk threshold.
// Fully reproducible from the seed.
Dataset generate_synthetic(const DomainConfig& config, int n_sequences,
                           double risky_ratio, std::uint64_t seed);

// Brute-force label from stored ranges: 1 iff any vehicle gets closer than
// the threshold in any frame.
int recompute_label(const SceneSequence& seq, double risk_threshold_m);

// Stratified split; |train| = round(train_fraction * N).
std::pair<Dataset, Dataset> split(const Dataset& dataset,
                                  double train_fraction, std::uint64_t seed);

// JSON-lines, one sequence per line.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

std::string sequence_to_json(const SceneSequence& seq);

}  // namespace rs2g
