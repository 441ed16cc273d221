#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "sectorcast/committee.hpp"
#include "sectorcast/errors.hpp"
#include "sectorcast/forest.hpp"
#include "sectorcast/knn.hpp"
#include "sectorcast/rvm.hpp"
#include "sectorcast/svm.hpp"

namespace sectorcast {

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const SvmModel& model) {
  nlohmann::json svs = nlohmann::json::array();
  for (const auto& sv : model.support_vectors)
    svs.push_back({{"x", sv.x}, {"y", sv.y}, {"alpha", sv.alpha}});
  return {{"format_version", kModelFormatVersion},
          {"type", "svm"},
          {"gamma", model.kernel.gamma},
          {"C", model.C},
          {"bias", model.bias},
          {"converged", model.converged},
          {"dimension", model.dimension},
          {"support_vectors", std::move(svs)}};
}

inline SvmModel svm_from_json(const nlohmann::json& j) {
  if (j.value("format_version", -1) != kModelFormatVersion ||
      j.value("type", "") != "svm")
    throw ConfigError("svm_from_json: not a version-1 svm document");
  SvmModel model;
  model.kernel.gamma = j.at("gamma").get<double>();
  model.C = j.at("C").get<double>();
  model.bias = j.at("bias").get<double>();
  model.converged = j.at("converged").get<bool>();
  model.dimension = j.at("dimension").get<std::size_t>();
  for (const auto& sv : j.at("support_vectors"))
    model.support_vectors.push_back({sv.at("x").get<std::vector<double>>(),
                                     sv.at("y").get<int>(),
                                     sv.at("alpha").get<double>()});
  return model;
}

inline nlohmann::json to_json(const RvmModel& model) {
  nlohmann::json rvs = nlohmann::json::array();
  for (const auto& rv : model.relevance_vectors)
    rvs.push_back(
        {{"x", rv.x}, {"weight", rv.weight}, {"precision", rv.precision}});
  return {{"format_version", kModelFormatVersion},
          {"type", "rvm"},
          {"gamma", model.kernel.gamma},
          {"bias", model.bias},
          {"bias_precision", model.bias_precision},
          {"threshold", model.threshold},
          {"converged", model.converged},
          {"dimension", model.dimension},
          {"relevance_vectors", std::move(rvs)}};
}

inline RvmModel rvm_from_json(const nlohmann::json& j) {
  if (j.value("format_version", -1) != kModelFormatVersion ||
      j.value("type", "") != "rvm")
    throw ConfigError("rvm_from_json: not a version-1 rvm document");
  RvmModel model;
  model.kernel.gamma = j.at("gamma").get<double>();
  model.bias = j.at("bias").get<double>();
  model.bias_precision = j.at("bias_precision").get<double>();
  model.threshold = j.at("threshold").get<double>();
  model.converged = j.at("converged").get<bool>();
  model.dimension = j.at("dimension").get<std::size_t>();
  for (const auto& rv : j.at("relevance_vectors"))
    model.relevance_vectors.push_back({rv.at("x").get<std::vector<double>>(),
                                       rv.at("weight").get<double>(),
                                       rv.at("precision").get<double>()});
  return model;
}

// Structural dumps used for model fingerprints.

inline nlohmann::json to_json(const ForestModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : tree.nodes)
      nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.decision});
    trees.push_back({{"features", tree.feature_subset}, {"nodes", std::move(nodes)}});
  }
  return {{"type", "forest"}, {"dimension", model.dimension}, {"trees", std::move(trees)}};
}

inline nlohmann::json to_json(const KnnCommittee& committee) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& member : committee.members)
    members.push_back({{"k", member.k}, {"reference", member.reference}});
  return {{"type", "knn_committee"},
          {"k_star", committee.k_star},
          {"members", std::move(members)}};
}

inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

/// Order-sensitive hash of the canonical JSON dumps of a model set.
inline std::uint64_t fingerprint(const std::vector<nlohmann::json>& models) {
  std::string text;
  for (const auto& j : models) text += j.dump();
  return fnv1a(text);
}

}  // namespace sectorcast
