#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>

#include <json.hpp>

#include "affex/core/error.hpp"
#include "affex/predictor/model.hpp"

namespace affex {

inline constexpr int kModelSchemaVersion = 1;

template <typename T>
const char* DtypeName() {
  return std::is_same_v<T, float> ? "float32" : "float64";
}

// <stem>.json holds the header, <stem>.bin the raw little-endian weights.
template <typename T>
void WriteModel(const AffordanceModel<T>& m, const std::filesystem::path& stem) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  nlohmann::json affs = nlohmann::json::array();
  for (const auto* n : kAffordanceNames) affs.push_back(n);
  const nlohmann::json header = {{"schema", "affex.model"},
                                 {"version", kModelSchemaVersion},
                                 {"dims", m.net.dims()},
                                 {"hidden_activation", nn::ActivationName(m.net.hidden_activation())},
                                 {"affordances", affs},
                                 {"dtype", DtypeName<T>()},
                                 {"num_params", m.net.num_params()},
                                 {"model_version", m.version},
                                 {"val_score", m.val_score}};
  std::ofstream(stem.string() + ".json") << header.dump(1) << "\n";
  std::ofstream bin(stem.string() + ".bin", std::ios::binary);
  bin.write(reinterpret_cast<const char*>(m.net.params().data()),
            static_cast<std::streamsize>(m.net.num_params() * sizeof(T)));
  if (!bin) throw std::runtime_error("cannot write " + stem.string() + ".bin");
}

template <typename T>
AffordanceModel<T> ReadModel(const std::filesystem::path& stem) {
  std::ifstream in(stem.string() + ".json");
  if (!in) throw FormatError("missing checkpoint header " + stem.string() + ".json");
  try {
    nlohmann::json h;
    in >> h;
    if (h.at("schema") != "affex.model" || h.at("version") != kModelSchemaVersion)
      throw FormatError("unsupported checkpoint schema");
    if (h.at("dtype") != DtypeName<T>()) throw FormatError("checkpoint dtype mismatch");
    if (h.at("hidden_activation") != "tanh") throw FormatError("unsupported activation");
    AffordanceModel<T> m{nn::Mlp<T>(h.at("dims").get<std::vector<int>>(), nn::Activation::kTanh),
                         h.at("model_version").get<int>(), h.at("val_score").get<double>()};
    if (m.net.in_dim() != kNumPixelFeatures || m.net.out_dim() != kNumAffordances)
      throw FormatError("checkpoint dims do not match the feature/affordance layout");
    std::ifstream bin(stem.string() + ".bin", std::ios::binary | std::ios::ate);
    if (!bin) throw FormatError("missing checkpoint weights " + stem.string() + ".bin");
    if (static_cast<std::size_t>(bin.tellg()) != m.net.num_params() * sizeof(T))
      throw FormatError("checkpoint weight count mismatch");
    bin.seekg(0);
    bin.read(reinterpret_cast<char*>(m.net.params().data()),
             static_cast<std::streamsize>(m.net.num_params() * sizeof(T)));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint header: ") + e.what());
  }
}

}  // namespace affex
