#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "affex/cli/config.hpp"
#include "affex/core/error.hpp"
#include "affex/labeling/dataset.hpp"
#include "affex/policy/network.hpp"
#include "affex/policy/ppo.hpp"
#include "affex/world/scene_io.hpp"

namespace affex {

namespace fs = std::filesystem;

inline constexpr std::array<const char*, 3> kSceneSplits = {"train", "val", "test"};

struct SceneSets {
  std::vector<Scene> train, val, test;
};

// Refuses to touch a non-empty directory unless `force`, in which case it
// is cleared.
inline void PrepareOutputDir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
    if (!force) throw RefusedOverwrite(dir.string() + " exists (use --force to overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

inline std::uint64_t SceneSeed(std::uint64_t seed, int split, int index) {
  return MixSeed(seed, 0x5ce7e000ULL + static_cast<std::uint64_t>(split) * 100000 + static_cast<std::uint64_t>(index));
}

inline void WriteText(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

inline std::string ReadText(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw MissingArtifact("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// <dir>/{train,val,test}/scene_NNN.json plus the config used.
inline void GenerateSceneSets(const ExperimentConfig& c, const fs::path& dir, bool force) {
  PrepareOutputDir(dir, force);
  const std::array<int, 3> counts = {c.scenes.train, c.scenes.val, c.scenes.test};
  for (int s = 0; s < 3; ++s) {
    fs::create_directories(dir / kSceneSplits[s]);
    for (int i = 0; i < counts[s]; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "scene_%03d.json", i);
      WriteScene(GenerateScene(SceneSeed(c.scenes.seed, s, i), c.episode.scene), (dir / kSceneSplits[s] / name).string());
    }
  }
  WriteText(dir / "config.ini", ConfigToIni(c));
}

inline std::vector<Scene> LoadSceneSplit(const fs::path& dir, const char* split) {
  const fs::path d = dir / split;
  if (!fs::is_directory(d)) throw MissingArtifact("missing scene directory " + d.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(d))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Scene> out;
  for (const auto& f : files) out.push_back(ReadScene(f.string()));
  return out;
}

// Loads all three splits and checks that no test scene is also a training
// or validation scene.
inline SceneSets LoadSceneSets(const fs::path& dir) {
  SceneSets s{LoadSceneSplit(dir, "train"), LoadSceneSplit(dir, "val"), LoadSceneSplit(dir, "test")};
  if (s.train.empty()) throw MissingArtifact("no training scenes in " + dir.string());
  for (const auto& t : s.test) {
    for (const auto* other : {&s.train, &s.val})
      for (const auto& o : *other)
        if (o.seed == t.seed) throw FormatError("test scene seed " + std::to_string(t.seed) + " also used for training");
  }
  return s;
}

// Policy weights: <stem>.json header and <stem>.bin float32 parameters.
inline void WritePolicy(const PolicyNet<float>& net, Arm arm, const fs::path& stem) {
  const PolicyNetConfig& c = net.config();
  const nlohmann::json h = {{"schema", "affex.policy"}, {"version", 1},          {"arm", ArmName(arm)},
                            {"channels", c.channels},   {"grid", c.grid},         {"patch", c.patch},
                            {"filters", c.filters},     {"flat_dim", c.flat_dim}, {"flat_hidden", c.flat_hidden},
                            {"num_actions", c.num_actions}, {"head_hidden", c.head_hidden},
                            {"num_params", net.num_params()}};
  WriteText(stem.string() + ".json", h.dump(1) + "\n");
  std::ofstream bin(stem.string() + ".bin", std::ios::binary | std::ios::trunc);
  for (const auto* b : net.blocks())
    bin.write(reinterpret_cast<const char*>(b->params().data()),
              static_cast<std::streamsize>(b->params().size() * sizeof(float)));
  if (!bin) throw std::runtime_error("cannot write " + stem.string() + ".bin");
}

inline PolicyNet<float> ReadPolicy(const fs::path& stem, Arm* arm = nullptr) {
  std::ifstream in(stem.string() + ".json");
  if (!in) throw MissingArtifact("missing policy header " + stem.string() + ".json");
  try {
    nlohmann::json h;
    in >> h;
    if (h.at("schema") != "affex.policy" || h.at("version") != 1) throw FormatError("unsupported policy schema");
    PolicyNetConfig c;
    c.channels = h.at("channels");
    c.grid = h.at("grid");
    c.patch = h.at("patch");
    c.filters = h.at("filters");
    c.flat_dim = h.at("flat_dim");
    c.flat_hidden = h.at("flat_hidden");
    c.num_actions = h.at("num_actions");
    c.head_hidden = h.at("head_hidden").get<std::vector<int>>();
    if (arm) {
      const auto a = ParseArm(h.at("arm").get<std::string>());
      if (!a) throw FormatError("unknown arm in policy header");
      *arm = *a;
    }
    PolicyNet<float> net(c);
    std::ifstream bin(stem.string() + ".bin", std::ios::binary | std::ios::ate);
    if (!bin) throw MissingArtifact("missing policy weights " + stem.string() + ".bin");
    if (static_cast<std::size_t>(bin.tellg()) != net.num_params() * sizeof(float))
      throw FormatError("policy weight count mismatch");
    bin.seekg(0);
    for (auto* b : net.blocks())
      bin.read(reinterpret_cast<char*>(b->params().data()),
               static_cast<std::streamsize>(b->params().size() * sizeof(float)));
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed policy header: ") + e.what());
  }
}

// Optimiser moments as raw float64 arrays, m then v.
template <typename T>
void WriteOptimizer(const nn::AdamW<T>& opt, const fs::path& path) {
  std::vector<double> both = opt.first_moment();
  both.insert(both.end(), opt.second_moment().begin(), opt.second_moment().end());
  detail::WriteRaw(path, both);
}

template <typename T>
void ReadOptimizer(nn::AdamW<T>& opt, long steps, const fs::path& path) {
  const std::size_t n = opt.first_moment().size();
  std::vector<double> both(2 * n);
  detail::ReadRaw(path, both);
  opt.Restore(steps, std::vector<double>(both.begin(), both.begin() + static_cast<std::ptrdiff_t>(n)),
              std::vector<double>(both.begin() + static_cast<std::ptrdiff_t>(n), both.end()));
}

}  // namespace affex
