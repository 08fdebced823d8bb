#include "dynamo/mesh.hpp"

#include <algorithm>
#include <cmath>

#include "dynamo/error.hpp"

namespace dynamo {

namespace {

int child_index(Child c) { return static_cast<int>(c); }

bool is_east_child(Child c) { return c == Child::se || c == Child::ne; }
bool is_north_child(Child c) { return c == Child::nw || c == Child::ne; }

}  // namespace

Mesh Mesh::cartesian(int agents_x, int agents_y, const Vec2& domain_min,
                     const Vec2& domain_max, RefineMode mode, int base_order) {
  if (agents_x < 1 || agents_y < 1) {
    throw InvalidArgument("mesh needs at least one agent per direction");
  }
  if (!(domain_max.x() > domain_min.x()) || !(domain_max.y() > domain_min.y())) {
    throw InvalidArgument("degenerate mesh bounds");
  }
  if (base_order < 1) {
    throw InvalidArgument("base polynomial order must be >= 1");
  }
  Mesh m;
  m.nx_ = agents_x;
  m.ny_ = agents_y;
  m.lo_ = domain_min;
  m.hi_ = domain_max;
  m.mode_ = mode;
  m.base_order_ = base_order;
  m.h_.assign(static_cast<std::size_t>(agents_x) * agents_y, Action::coarse);
  m.p_ = m.h_;
  m.rebuild();
  return m;
}

Vec2 Mesh::agent_size() const {
  return Vec2(extent().x() / nx_, extent().y() / ny_);
}

std::vector<Action> Mesh::refinement() const {
  return mode_ == RefineMode::h ? h_ : p_;
}

bool Mesh::is_fine(int agent) const {
  return (mode_ == RefineMode::h ? h_ : p_)[agent] == Action::fine;
}

int Mesh::fine_count() const {
  const auto& flags = mode_ == RefineMode::h ? h_ : p_;
  return static_cast<int>(std::count(flags.begin(), flags.end(), Action::fine));
}

Mesh Mesh::apply_actions(std::span<const Action> actions) const {
  if (static_cast<int>(actions.size()) != agent_count()) {
    throw InvalidArgument("action count does not match agent count");
  }
  Mesh m = *this;
  auto& flags = mode_ == RefineMode::h ? m.h_ : m.p_;
  flags.assign(actions.begin(), actions.end());
  m.rebuild();
  return m;
}

Mesh Mesh::with_refinement(std::span<const Action> h_levels,
                           std::span<const Action> p_levels) const {
  if (static_cast<int>(h_levels.size()) != agent_count() ||
      static_cast<int>(p_levels.size()) != agent_count()) {
    throw InvalidArgument("refinement level count does not match agent count");
  }
  Mesh m = *this;
  m.h_.assign(h_levels.begin(), h_levels.end());
  m.p_.assign(p_levels.begin(), p_levels.end());
  m.rebuild();
  return m;
}

int Mesh::agent_index(int ix, int iy) const {
  ix = ((ix % nx_) + nx_) % nx_;
  iy = ((iy % ny_) + ny_) % ny_;
  return iy * nx_ + ix;
}

Box Mesh::agent_box(int agent) const {
  const Vec2 d = agent_size();
  return Box{lo_ + Vec2(agent_ix(agent) * d.x(), agent_iy(agent) * d.y()), d};
}

Vec2 Mesh::agent_centroid(int agent) const { return agent_box(agent).center(); }

Displacement Mesh::displacement(int i, int j) const {
  Vec2 r = agent_centroid(i) - agent_centroid(j);
  const Vec2 ext = extent();
  for (int k = 0; k < 2; ++k) {
    r[k] -= ext[k] * std::round(r[k] / ext[k]);
  }
  return Displacement{r};
}

std::vector<int> Mesh::observation_window(int agent, int half_x, int half_y) const {
  std::vector<int> window;
  window.reserve(static_cast<std::size_t>(2 * half_x + 1) * (2 * half_y + 1));
  const int ix = agent_ix(agent);
  const int iy = agent_iy(agent);
  for (int dy = -half_y; dy <= half_y; ++dy) {
    for (int dx = -half_x; dx <= half_x; ++dx) {
      window.push_back(agent_index(ix + dx, iy + dy));
    }
  }
  return window;
}

std::size_t Mesh::dof_count(int components) const {
  std::size_t n = 0;
  for (const auto& e : elements_) {
    n += static_cast<std::size_t>(e.order + 1) * (e.order + 1);
  }
  return n * static_cast<std::size_t>(components);
}

Vec2 Mesh::wrap(const Vec2& x) const {
  Vec2 w;
  const Vec2 ext = extent();
  for (int k = 0; k < 2; ++k) {
    double s = std::fmod(x[k] - lo_[k], ext[k]);
    if (s < 0.0) s += ext[k];
    w[k] = lo_[k] + s;
  }
  return w;
}

int Mesh::locate_agent(const Vec2& x) const {
  const Vec2 w = wrap(x);
  const Vec2 d = agent_size();
  const int ix = std::clamp(static_cast<int>(std::floor((w.x() - lo_.x()) / d.x())), 0, nx_ - 1);
  const int iy = std::clamp(static_cast<int>(std::floor((w.y() - lo_.y()) / d.y())), 0, ny_ - 1);
  return iy * nx_ + ix;
}

int Mesh::locate_element(const Vec2& x) const {
  const int agent = locate_agent(x);
  const int first = first_element(agent);
  if (element_count(agent) == 1) return first;
  const Vec2 c = agent_centroid(agent);
  const Vec2 w = wrap(x);
  const int east = w.x() >= c.x() ? 1 : 0;
  const int north = w.y() >= c.y() ? 2 : 0;
  return first + east + north;
}

void Mesh::rebuild() {
  elements_.clear();
  agent_offset_.assign(static_cast<std::size_t>(agent_count()) + 1, 0);
  for (int a = 0; a < agent_count(); ++a) {
    agent_offset_[a] = static_cast<int>(elements_.size());
    const int order = base_order_ + (p_[a] == Action::fine ? 1 : 0);
    const Box box = agent_box(a);
    if (h_[a] == Action::fine) {
      const Vec2 half = 0.5 * box.size;
      for (int c = 0; c < 4; ++c) {
        const Vec2 off((c & 1) ? half.x() : 0.0, (c & 2) ? half.y() : 0.0);
        elements_.push_back(Element{a, static_cast<Child>(c), order, Box{box.min + off, half}});
      }
    } else {
      elements_.push_back(Element{a, Child::none, order, box});
    }
  }
  agent_offset_[agent_count()] = static_cast<int>(elements_.size());

  faces_.clear();
  for (int e = 0; e < element_count(); ++e) add_faces_from(e);
  faces_per_element_.assign(elements_.size(), 0);
  for (const auto& f : faces_) {
    ++faces_per_element_[f.left];
    ++faces_per_element_[f.right];
  }
}

void Mesh::add_faces_from(int element) {
  const Element& e = elements_[element];
  const int ix = agent_ix(e.agent);
  const int iy = agent_iy(e.agent);
  const Vec2 ext = extent();

  auto child_of = [&](int agent, Child c) { return first_element(agent) + child_index(c); };

  // East face.
  {
    const double len = e.box.size.y();
    if (e.child != Child::none && !is_east_child(e.child)) {
      const Child sib = e.child == Child::sw ? Child::se : Child::ne;
      faces_.push_back({element, child_of(e.agent, sib), Axis::x, FacePart::full,
                        FacePart::full, len, Vec2::Zero()});
    } else {
      const int b = agent_index(ix + 1, iy);
      const Vec2 shift = ix + 1 == nx_ ? Vec2(ext.x(), 0.0) : Vec2::Zero();
      if (e.child == Child::none) {
        if (h_[b] == Action::fine) {
          faces_.push_back({element, child_of(b, Child::sw), Axis::x, FacePart::lower,
                            FacePart::full, 0.5 * len, shift});
          faces_.push_back({element, child_of(b, Child::nw), Axis::x, FacePart::upper,
                            FacePart::full, 0.5 * len, shift});
        } else {
          faces_.push_back({element, first_element(b), Axis::x, FacePart::full,
                            FacePart::full, len, shift});
        }
      } else {
        const bool north = is_north_child(e.child);
        if (h_[b] == Action::fine) {
          faces_.push_back({element, child_of(b, north ? Child::nw : Child::sw), Axis::x,
                            FacePart::full, FacePart::full, len, shift});
        } else {
          faces_.push_back({element, first_element(b), Axis::x, FacePart::full,
                            north ? FacePart::upper : FacePart::lower, len, shift});
        }
      }
    }
  }

  // North face.
  {
    const double len = e.box.size.x();
    if (e.child != Child::none && !is_north_child(e.child)) {
      const Child sib = e.child == Child::sw ? Child::nw : Child::ne;
      faces_.push_back({element, child_of(e.agent, sib), Axis::y, FacePart::full,
                        FacePart::full, len, Vec2::Zero()});
    } else {
      const int b = agent_index(ix, iy + 1);
      const Vec2 shift = iy + 1 == ny_ ? Vec2(0.0, ext.y()) : Vec2::Zero();
      if (e.child == Child::none) {
        if (h_[b] == Action::fine) {
          faces_.push_back({element, child_of(b, Child::sw), Axis::y, FacePart::lower,
                            FacePart::full, 0.5 * len, shift});
          faces_.push_back({element, child_of(b, Child::se), Axis::y, FacePart::upper,
                            FacePart::full, 0.5 * len, shift});
        } else {
          faces_.push_back({element, first_element(b), Axis::y, FacePart::full,
                            FacePart::full, len, shift});
        }
      } else {
        const bool east = is_east_child(e.child);
        if (h_[b] == Action::fine) {
          faces_.push_back({element, child_of(b, east ? Child::se : Child::sw), Axis::y,
                            FacePart::full, FacePart::full, len, shift});
        } else {
          faces_.push_back({element, first_element(b), Axis::y, FacePart::full,
                            east ? FacePart::upper : FacePart::lower, len, shift});
        }
      }
    }
  }
}

}  // namespace dynamo
