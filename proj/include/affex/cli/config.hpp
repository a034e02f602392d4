#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "affex/core/error.hpp"
#include "affex/eval/protocols.hpp"
#include "affex/labeling/annotate.hpp"
#include "affex/labeling/dataset.hpp"
#include "affex/policy/episode.hpp"
#include "affex/policy/ppo.hpp"
#include "affex/predictor/trainer.hpp"

namespace affex {

struct SceneSetConfig {
  std::uint64_t seed = 1;
  int train = 10;
  int val = 2;
  int test = 3;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  Arm arm = Arm::kFull;
  long budget_steps = 100000;
  int checkpoint_every = 5;  // episodes; 0 disables checkpoints
  int eval_every = 5;        // episodes between frame-wise validation passes
  long confidence_warmup_steps = 20000;
  double binarize_threshold = kBinarizeThreshold;

  SceneSetConfig scenes;
  EpisodeConfig episode;
  ConfidenceThresholds confidence;
  double sphere_radius = 0.2;
  int sphere_window = 10;
  SplitRatios split;
  TrainConfig predictor;
  std::vector<int> predictor_hidden = {32, 16};
  int max_stored_frames = 48;  // per split of an episode dataset, train split; val/test get a quarter
  PpoConfig ppo;
  TourConfig tour;
  ObjectwiseConfig objectwise;
  std::vector<int> ablation_seeds = {1, 2};
  int final_window = 5;  // trailing episodes averaged for "final" training metrics

  std::string scenes_dir = "scenes";
};

namespace config_detail {

using FieldRef = std::variant<int*, long*, double*, bool*, std::uint64_t*, Arm*, std::vector<int>*, std::string*>;

struct Field {
  std::string section;
  std::string key;
  FieldRef ref;
};

// Every configurable field, in file order.
inline std::vector<Field> Fields(ExperimentConfig& c) {
  EpisodeConfig& e = c.episode;
  return {
      {"experiment", "seed", &c.seed},
      {"experiment", "arm", &c.arm},
      {"experiment", "budget_steps", &c.budget_steps},
      {"experiment", "episode_steps", &e.max_steps},
      {"experiment", "checkpoint_every", &c.checkpoint_every},
      {"experiment", "eval_every", &c.eval_every},
      {"scenes", "seed", &c.scenes.seed},
      {"scenes", "train", &c.scenes.train},
      {"scenes", "val", &c.scenes.val},
      {"scenes", "test", &c.scenes.test},
      {"scenes", "room_width", &e.scene.room_width},
      {"scenes", "room_depth", &e.scene.room_depth},
      {"scenes", "room_height", &e.scene.room_height},
      {"scenes", "min_objects", &e.scene.min_objects},
      {"scenes", "max_objects", &e.scene.max_objects},
      {"scenes", "two_rooms", &e.scene.two_rooms},
      {"scenes", "door_width", &e.scene.door_width},
      {"scenes", "randomize_per_episode", &e.randomize_scene},
      {"world", "lattice", &e.world.lattice},
      {"world", "yaw_step_deg", &e.world.yaw_step_deg},
      {"world", "pitch_step_deg", &e.world.pitch_step_deg},
      {"world", "max_pitch_steps", &e.world.max_pitch_steps},
      {"world", "reach", &e.world.reach},
      {"world", "push_distance", &e.world.push_distance},
      {"camera", "width", &e.camera.width},
      {"camera", "height", &e.camera.height},
      {"camera", "vfov_deg", &e.camera.vfov_deg},
      {"camera", "max_range", &e.camera.max_range},
      {"camera", "noise_sigma", &e.camera.noise_sigma},
      {"mapping", "voxel_size", &e.map.resolution},
      {"reward", "alpha_nav", &e.alpha.nav},
      {"reward", "alpha_interaction", &e.alpha.interaction},
      {"reward", "alpha_fail", &e.alpha.fail},
      {"labeling", "xi_true", &c.confidence.positive},
      {"labeling", "xi_false", &c.confidence.negative},
      {"labeling", "upper_percentile", &c.confidence.upper_percentile},
      {"labeling", "lower_percentile", &c.confidence.lower_percentile},
      {"labeling", "confidence_warmup_steps", &c.confidence_warmup_steps},
      {"labeling", "sphere_radius", &c.sphere_radius},
      {"labeling", "sphere_window", &c.sphere_window},
      {"labeling", "split_train", &c.split.train},
      {"labeling", "split_val", &c.split.val},
      {"labeling", "split_test", &c.split.test},
      {"policy", "confidence_floor", &e.targets.confidence_floor},
      {"policy", "center_fraction", &e.targets.center_fraction},
      {"policy", "compact_actions", &e.compact_actions},
      {"policy", "obs_grid", &e.obs.grid},
      {"policy", "history", &e.obs.history},
      {"policy", "ema_decay", &e.obs.ema_decay},
      {"ppo", "gamma", &c.ppo.gamma},
      {"ppo", "lambda", &c.ppo.lambda},
      {"ppo", "clip", &c.ppo.clip},
      {"ppo", "value_coef", &c.ppo.value_coef},
      {"ppo", "entropy_coef", &c.ppo.entropy_coef},
      {"ppo", "epochs", &c.ppo.epochs},
      {"ppo", "minibatch", &c.ppo.minibatch},
      {"ppo", "lr", &c.ppo.lr},
      {"ppo", "max_grad_norm", &c.ppo.max_grad_norm},
      {"predictor", "hidden", &c.predictor_hidden},
      {"predictor", "lr", &c.predictor.optimizer.lr},
      {"predictor", "weight_decay", &c.predictor.optimizer.weight_decay},
      {"predictor", "batch_frames", &c.predictor.batch_frames},
      {"predictor", "epochs_per_episode", &c.predictor.epochs_per_episode},
      {"predictor", "retire_after", &c.predictor.retire_after},
      {"predictor", "max_frames_per_dataset", &c.predictor.max_frames_per_dataset},
      {"predictor", "max_pixels_per_frame", &c.predictor.max_pixels_per_frame},
      {"predictor", "val_max_frames", &c.predictor.val_max_frames},
      {"predictor", "val_max_pixels", &c.predictor.val_max_pixels},
      {"predictor", "max_depth", &c.predictor.features.max_depth},
      {"predictor", "max_stored_frames", &c.max_stored_frames},
      {"eval", "binarize_threshold", &c.binarize_threshold},
      {"eval", "tour_positions", &c.tour.positions},
      {"eval", "tour_pitches", &c.tour.pitches},
      {"eval", "standoff", &c.objectwise.standoff},
      {"ablation", "seeds", &c.ablation_seeds},
      {"ablation", "final_window", &c.final_window},
      {"paths", "scenes", &c.scenes_dir},
  };
}

inline std::string Format(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string ToString(const FieldRef& ref) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) return Format(*p);
        else if constexpr (std::is_same_v<T, bool>) return *p ? "true" : "false";
        else if constexpr (std::is_same_v<T, Arm>) return ArmName(*p);
        else if constexpr (std::is_same_v<T, std::string>) return *p;
        else if constexpr (std::is_same_v<T, std::vector<int>>) {
          std::string s;
          for (std::size_t i = 0; i < p->size(); ++i) s += (i ? "," : "") + std::to_string((*p)[i]);
          return s;
        } else return std::to_string(*p);
      },
      ref);
}

template <typename T>
T ParseNumber(const std::string& text, const std::string& where) {
  T v{};
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size())
    throw FormatError(where + ": cannot parse '" + text + "'");
  return v;
}

inline void FromString(const FieldRef& ref, const std::string& text, const std::string& where) {
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (text == "true" || text == "1") *p = true;
          else if (text == "false" || text == "0") *p = false;
          else throw FormatError(where + ": expected true or false, got '" + text + "'");
        } else if constexpr (std::is_same_v<T, std::string>) {
          *p = text;
        } else if constexpr (std::is_same_v<T, Arm>) {
          const auto a = ParseArm(text);
          if (!a) throw FormatError(where + ": unknown arm '" + text + "'");
          *p = *a;
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
          p->clear();
          std::stringstream ss(text);
          std::string item;
          while (std::getline(ss, item, ',')) p->push_back(ParseNumber<int>(item, where));
          if (p->empty()) throw FormatError(where + ": empty list");
        } else {
          *p = ParseNumber<T>(text, where);
        }
      },
      ref);
}

}  // namespace config_detail

// Checks cross-field constraints; throws FormatError.
inline void ValidateConfig(const ExperimentConfig& c) {
  const auto check = [](bool ok, const std::string& msg) {
    if (!ok) throw FormatError("invalid config: " + msg);
  };
  check(c.budget_steps > 0, "budget_steps must be positive");
  check(c.episode.max_steps > 0, "episode_steps must be positive");
  check(c.scenes.train > 0 && c.scenes.val >= 0 && c.scenes.test >= 0, "scene counts");
  check(c.episode.camera.width == c.episode.camera.height, "camera must be square");
  check(c.episode.obs.grid > 0 && c.episode.camera.width % c.episode.obs.grid == 0,
        "camera side must be a multiple of obs_grid");
  check(c.episode.obs.grid % 4 == 0, "obs_grid must be a multiple of 4");
  check(std::abs(c.split.train + c.split.val + c.split.test - 1.0) < 1e-9, "split ratios must sum to 1");
  check(c.confidence.negative < c.confidence.positive, "xi_false must be below xi_true");
  check(c.checkpoint_every >= 0 && c.eval_every > 0, "checkpoint_every must be >= 0 and eval_every positive");
  check(c.max_stored_frames > 0 && c.final_window > 0, "max_stored_frames and final_window must be positive");
  check(c.tour.positions > 0 && !c.tour.pitches.empty(), "tour needs positions and pitches");
  check(c.ppo.minibatch > 0 && c.ppo.epochs > 0, "ppo minibatch and epochs must be positive");
  check(c.predictor.batch_frames > 0, "batch_frames must be positive");
  check(c.episode.scene.min_objects <= c.episode.scene.max_objects, "min_objects exceeds max_objects");
}

// INI text with every field, grouped by section. Parsing it back yields an
// identical config.
inline std::string ConfigToIni(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  std::string out, section;
  for (const auto& f : config_detail::Fields(c)) {
    if (f.section != section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + config_detail::ToString(f.ref) + "\n";
  }
  return out;
}

// Starts from the defaults; unknown sections or keys are rejected.
inline ExperimentConfig ParseConfigIni(const std::string& text, const std::string& origin = "config") {
  ExperimentConfig c;
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw FormatError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  std::map<std::string, config_detail::FieldRef> known;
  for (const auto& f : config_detail::Fields(c)) known.emplace(f.section + "." + f.key, f.ref);
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty())
      throw FormatError(origin + ": key '" + section + "' outside a section");
    for (const auto& [key, value] : keys) {
      const std::string name = section + "." + key;
      const auto it = known.find(name);
      if (it == known.end()) throw FormatError(origin + ": unknown key '" + name + "'");
      std::string v = value.data();
      const auto semi = v.find_first_of(";#");
      if (semi != std::string::npos) v.resize(semi);
      while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.pop_back();
      config_detail::FromString(it->second, v, origin + ": " + name);
    }
  }
  ValidateConfig(c);
  return c;
}

inline ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfigIni(ss.str(), path);
}

// FNV-1a of the canonical INI text, as 16 hex digits.
inline std::string ConfigHash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : ConfigToIni(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::vector<int> PredictorDims(const ExperimentConfig& c) {
  std::vector<int> d = {kNumPixelFeatures};
  d.insert(d.end(), c.predictor_hidden.begin(), c.predictor_hidden.end());
  d.push_back(kNumAffordances);
  return d;
}

}  // namespace affex
