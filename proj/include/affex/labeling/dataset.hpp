#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "affex/core/error.hpp"
#include "affex/core/random.hpp"
#include "affex/labeling/masks.hpp"
#include "affex/world/scene_io.hpp"

namespace affex {

struct LabeledSample {
  std::shared_ptr<const Frame> frame;
  PixelLabelMask labels;
};

struct SplitRatios {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

struct EpisodeDataset {
  int episode_id = 0;
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> val;
  std::vector<LabeledSample> test;
  int usage_count = 0;

  std::size_t size() const { return train.size() + val.size() + test.size(); }
  bool empty() const { return size() == 0; }
};

// Sizes for val and test are rounded; train takes the remainder.
inline std::array<std::size_t, 3> SplitSizes(std::size_t n, const SplitRatios& r) {
  AFFEX_REQUIRE(r.train >= 0 && r.val >= 0 && r.test >= 0, "split ratios must be non-negative");
  AFFEX_REQUIRE(std::abs(r.train + r.val + r.test - 1.0) < 1e-9, "split ratios must sum to 1");
  const auto val = static_cast<std::size_t>(std::llround(r.val * static_cast<double>(n)));
  const auto test = std::min(n - std::min(n, val), static_cast<std::size_t>(std::llround(r.test * static_cast<double>(n))));
  return {n - std::min(n, val) - test, std::min(n, val), test};
}

// Keeps frames where some affordance has both classes, then shuffles them
// into train/val/test with a seeded permutation.
inline EpisodeDataset ExtractDataset(const std::vector<AnnotatedFrame>& frames, const SplitRatios& ratios,
                                     std::uint64_t seed, int episode_id = 0) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (IsBalanced(frames[i].labels)) keep.push_back(i);
  const auto sizes = SplitSizes(keep.size(), ratios);
  Rng rng(seed);
  rng.Shuffle(keep);
  EpisodeDataset ds;
  ds.episode_id = episode_id;
  std::vector<LabeledSample>* parts[3] = {&ds.train, &ds.val, &ds.test};
  std::size_t k = 0;
  for (int p = 0; p < 3; ++p)
    for (std::size_t j = 0; j < sizes[p]; ++j, ++k) parts[p]->push_back({frames[keep[k]].frame, frames[keep[k]].labels});
  return ds;
}

namespace detail {

template <typename T>
void WriteRaw(const std::filesystem::path& p, const std::vector<T>& v) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void ReadRaw(const std::filesystem::path& p, std::vector<T>& v) {
  std::ifstream in(p, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("missing dataset file " + p.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != v.size() * sizeof(T)) throw FormatError("size mismatch in " + p.string());
  in.seekg(0);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
}

}  // namespace detail

inline constexpr int kDatasetSchemaVersion = 1;

// Layout: <dir>/index.json plus four little-endian raw arrays per sample
// (depth float32, ids int32, rgb float32 HxWx3, labels int8 HxWxA).
inline void WriteDataset(const EpisodeDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json samples = nlohmann::json::array();
  int index = 0;
  const auto emit = [&](const std::vector<LabeledSample>& part, const char* split) {
    for (const auto& s : part) {
      const Frame& f = *s.frame;
      char stem[32];
      std::snprintf(stem, sizeof(stem), "sample_%05d", index++);
      detail::WriteRaw(dir / (std::string(stem) + ".depth.bin"), f.depth.raw());
      detail::WriteRaw(dir / (std::string(stem) + ".ids.bin"), f.instance_ids.raw());
      detail::WriteRaw(dir / (std::string(stem) + ".rgb.bin"), f.appearance.raw());
      detail::WriteRaw(dir / (std::string(stem) + ".labels.bin"), s.labels.raw());
      samples.push_back({{"stem", stem},
                         {"split", split},
                         {"step_index", f.step_index},
                         {"camera", {{"position", detail::ToJson(f.camera.position)},
                                     {"yaw", f.camera.yaw},
                                     {"pitch", f.camera.pitch}}},
                         {"focal", f.intrinsics.focal},
                         {"height", f.height()},
                         {"width", f.width()}});
    }
  };
  emit(ds.train, "train");
  emit(ds.val, "val");
  emit(ds.test, "test");
  nlohmann::json affs = nlohmann::json::array();
  for (const auto* n : kAffordanceNames) affs.push_back(n);
  const nlohmann::json index_json = {
      {"schema", "affex.dataset"},
      {"version", kDatasetSchemaVersion},
      {"episode_id", ds.episode_id},
      {"usage_count", ds.usage_count},
      {"affordances", affs},
      {"dtypes", {{"depth", "float32"}, {"ids", "int32"}, {"rgb", "float32"}, {"labels", "int8"}}},
      {"samples", samples}};
  std::ofstream(dir / "index.json") << index_json.dump(1) << "\n";
}

inline EpisodeDataset ReadDataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) throw FormatError("missing " + (dir / "index.json").string());
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("schema") != "affex.dataset" || j.at("version") != kDatasetSchemaVersion)
      throw FormatError("unsupported dataset schema in " + dir.string());
    if (j.at("affordances").size() != static_cast<std::size_t>(kNumAffordances))
      throw FormatError("affordance list mismatch in " + dir.string());
    EpisodeDataset ds;
    ds.episode_id = j.at("episode_id").get<int>();
    ds.usage_count = j.at("usage_count").get<int>();
    for (const auto& s : j.at("samples")) {
      const int h = s.at("height").get<int>(), w = s.at("width").get<int>();
      auto f = std::make_shared<Frame>();
      f->depth = Image<float>(h, w);
      f->instance_ids = Image<std::int32_t>(h, w);
      f->appearance = Image<float>(h, w, 3);
      f->step_index = s.at("step_index").get<int>();
      f->camera.position = detail::Vec3FromJson(s.at("camera").at("position"));
      f->camera.yaw = s.at("camera").at("yaw").get<double>();
      f->camera.pitch = s.at("camera").at("pitch").get<double>();
      f->intrinsics = {w, h, s.at("focal").get<double>()};
      PixelLabelMask labels(h, w, kNumAffordances);
      const std::string stem = s.at("stem").get<std::string>();
      detail::ReadRaw(dir / (stem + ".depth.bin"), f->depth.raw());
      detail::ReadRaw(dir / (stem + ".ids.bin"), f->instance_ids.raw());
      detail::ReadRaw(dir / (stem + ".rgb.bin"), f->appearance.raw());
      detail::ReadRaw(dir / (stem + ".labels.bin"), labels.raw());
      const std::string split = s.at("split").get<std::string>();
      auto& part = split == "train" ? ds.train : split == "val" ? ds.val : split == "test" ? ds.test
                 : throw FormatError("bad split '" + split + "'");
      part.push_back({std::move(f), std::move(labels)});
    }
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset index: ") + e.what());
  }
}

}  // namespace affex
