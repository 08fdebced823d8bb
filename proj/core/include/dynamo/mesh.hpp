#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace dynamo {

using Vec2 = Eigen::Vector2d;

enum class RefineMode { h, p };

/// Absolute refinement action of one agent.
enum class Action : std::uint8_t { coarse = 0, fine = 1 };

/// Position of an h-refined child inside its parent (z-order).
enum class Child : std::int8_t { none = -1, sw = 0, se = 1, nw = 2, ne = 3 };

struct Box {
  Vec2 min;
  Vec2 size;

  Vec2 center() const { return min + 0.5 * size; }
  double area() const { return size.x() * size.y(); }
};

struct Element {
  int agent = 0;
  Child child = Child::none;
  int order = 1;
  Box box;
};

enum class Axis { x, y };

/// Portion of an element face covered by an interface segment.
enum class FacePart : std::uint8_t { full = 0, lower = 1, upper = 2 };

/// One interface segment between two elements. The unit normal is +x or +y
/// and points from `left` into `right`. `right_shift` moves the right
/// element's geometry across the periodic seam so that it touches `left`.
struct FaceSegment {
  int left = 0;
  int right = 0;
  Axis axis = Axis::x;
  FacePart left_part = FacePart::full;
  FacePart right_part = FacePart::full;
  double length = 0.0;
  Vec2 right_shift = Vec2::Zero();
};

struct Displacement {
  Vec2 r = Vec2::Zero();
};

/// Periodic Cartesian grid of agents. Every agent is one initial coarse cell
/// that is either unrefined or refined by exactly one level (four congruent
/// children in h mode, order base+1 in p mode). Values are immutable; every
/// change produces a new mesh.
class Mesh {
 public:
  static Mesh cartesian(int agents_x, int agents_y, const Vec2& domain_min,
                        const Vec2& domain_max, RefineMode mode, int base_order);

  int agents_x() const { return nx_; }
  int agents_y() const { return ny_; }
  int agent_count() const { return nx_ * ny_; }
  const Vec2& domain_min() const { return lo_; }
  const Vec2& domain_max() const { return hi_; }
  Vec2 extent() const { return hi_ - lo_; }
  Vec2 agent_size() const;
  RefineMode mode() const { return mode_; }
  int base_order() const { return base_order_; }

  /// Per-agent refinement state of the active mode.
  std::vector<Action> refinement() const;
  bool is_fine(int agent) const;
  int fine_count() const;

  /// Absolute semantics: the result's refinement equals `actions`.
  Mesh apply_actions(std::span<const Action> actions) const;

  /// General one-level hp state. Used to exercise the discretization on
  /// meshes that mix both kinds of nonconformity.
  Mesh with_refinement(std::span<const Action> h_levels,
                       std::span<const Action> p_levels) const;
  bool h_refined(int agent) const { return h_[agent] == Action::fine; }
  bool p_refined(int agent) const { return p_[agent] == Action::fine; }

  int agent_index(int ix, int iy) const;
  int agent_ix(int agent) const { return agent % nx_; }
  int agent_iy(int agent) const { return agent / nx_; }
  Vec2 agent_centroid(int agent) const;
  Box agent_box(int agent) const;

  /// Minimal-image periodic difference x_i - x_j of agent centroids.
  Displacement displacement(int i, int j) const;

  /// Agents of the (2 nx + 1) x (2 ny + 1) window centered on `agent`.
  /// Rows run bottom to top (dy = -ny..ny), columns left to right.
  std::vector<int> observation_window(int agent, int half_x, int half_y) const;

  const std::vector<Element>& elements() const { return elements_; }
  int element_count() const { return static_cast<int>(elements_.size()); }
  int first_element(int agent) const { return agent_offset_[agent]; }
  int element_count(int agent) const {
    return agent_offset_[agent + 1] - agent_offset_[agent];
  }
  const std::vector<FaceSegment>& faces() const { return faces_; }

  /// Number of interface segments touching each element.
  const std::vector<int>& faces_per_element() const { return faces_per_element_; }

  std::size_t dof_count(int components) const;

  /// Wrap a point into the periodic domain.
  Vec2 wrap(const Vec2& x) const;
  /// Agent and element containing a point (after periodic wrap).
  int locate_agent(const Vec2& x) const;
  int locate_element(const Vec2& x) const;

 private:
  Mesh() = default;
  void rebuild();
  void add_faces_from(int element);

  int nx_ = 1;
  int ny_ = 1;
  Vec2 lo_ = Vec2::Zero();
  Vec2 hi_ = Vec2::Ones();
  RefineMode mode_ = RefineMode::p;
  int base_order_ = 1;
  std::vector<Action> h_;
  std::vector<Action> p_;

  std::vector<Element> elements_;
  std::vector<int> agent_offset_;
  std::vector<FaceSegment> faces_;
  std::vector<int> faces_per_element_;
};

}  // namespace dynamo
