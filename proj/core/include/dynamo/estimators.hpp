#pragma once

#include <map>
#include <memory>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "dynamo/dg.hpp"
#include "dynamo/mesh.hpp"

namespace dynamo {

/// Element-wise non-negative error indicator of one solution component.
struct ErrorField {
  std::vector<double> values;
  int component = 0;
};

/// ||u - Pi_{p-1} u||_{L2(element)} using each element's current order.
ErrorField p_projection_estimate(const SolutionState& state, int component);

/// Operators of the edge-patch least-squares reconstruction, keyed by the
/// geometric configuration of the two neighbours. Not thread-safe; give each
/// estimator user its own cache.
class ReconstructionCache {
 public:
  using Key = std::tuple<int, int, int, int, int, int, int, long long, long long>;
  const Eigen::MatrixXd* find(const Key& key) const;
  const Eigen::MatrixXd& insert(const Key& key, Eigen::MatrixXd op);
  std::size_t size() const { return ops_.size(); }

 private:
  std::map<Key, Eigen::MatrixXd> ops_;
};

struct JumpEstimatorOptions {
  /// Fit in the total-degree space P_r instead of the tensor space Q_r.
  bool total_degree = false;
};

/// Edge-patch reconstruction estimator: for every interior edge, the
/// least-squares polynomial of degree max(p+, p-) over the bounding rectangle
/// of the two neighbours; e_i is the RMS over the element's edges of the
/// misfit on that element.
ErrorField jump_reconstruction_estimate(const SolutionState& state, int component,
                                        JumpEstimatorOptions options = {},
                                        ReconstructionCache* cache = nullptr);

/// Error channel: L2 combination of the children's values.
std::vector<double> aggregate_errors(std::span<const double> element_values, const Mesh& mesh);
/// Averaged channels: area-weighted mean over the children.
std::vector<double> aggregate_averages(std::span<const double> element_values, const Mesh& mesh);

/// Per-agent maximum of the instantaneous estimate over one remesh interval.
struct RunningMaxError {
  std::vector<double> values;
};

RunningMaxError running_max_update(RunningMaxError acc, std::span<const double> sample);

enum class EstimatorKind { projection, jump };

/// Estimator bound to a refinement mode: p-refinement uses the projection
/// estimator, h-refinement the reconstruction estimator.
class ErrorEstimator {
 public:
  ErrorEstimator(EstimatorKind kind, int component, JumpEstimatorOptions options = {});
  static ErrorEstimator for_mode(RefineMode mode, int component,
                                 JumpEstimatorOptions options = {});

  // Copies start with an empty reconstruction cache.
  ErrorEstimator(const ErrorEstimator& other);
  ErrorEstimator& operator=(const ErrorEstimator& other);
  ErrorEstimator(ErrorEstimator&&) noexcept = default;
  ErrorEstimator& operator=(ErrorEstimator&&) noexcept = default;

  EstimatorKind kind() const { return kind_; }
  int component() const { return component_; }

  ErrorField estimate(const SolutionState& state) const;
  std::vector<double> agent_errors(const SolutionState& state) const;

 private:
  EstimatorKind kind_;
  int component_;
  JumpEstimatorOptions options_;
  std::unique_ptr<ReconstructionCache> cache_;
};

}  // namespace dynamo
