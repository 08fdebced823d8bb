#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dynamo/policies.hpp"

namespace dynamo {

/// Policy weights plus free-form metadata and any auxiliary arrays (for
/// example optimizer moments).
struct Checkpoint {
  PolicyWeights weights;
  /// JSON object text stored verbatim in the header.
  std::string info = "{}";
  std::vector<std::pair<std::string, Eigen::VectorXd>> extra;

  const Eigen::VectorXd* find_extra(const std::string& name) const;
};

/// File layout: 8-byte magic "DYNAMOCK", uint32 format version, uint64
/// header length, JSON header, then every array as little-endian float64.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dynamo
