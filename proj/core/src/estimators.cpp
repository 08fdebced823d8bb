#include "dynamo/estimators.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/QR>

#include "dynamo/basis.hpp"
#include "dynamo/error.hpp"

namespace dynamo {

ErrorField p_projection_estimate(const SolutionState& state, int component) {
  if (component < 0 || component >= state.components()) {
    throw InvalidArgument("estimator component out of range");
  }
  const Mesh& mesh = state.mesh();
  ErrorField field;
  field.component = component;
  field.values.resize(mesh.elements().size());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const Element& el = mesh.elements()[e];
    const int p = el.order;
    const Eigen::VectorXd u = state.element(e).col(component);
    const Eigen::VectorXd lower = order_transfer(p - 1, p) * (order_transfer(p, p - 1) * u);
    const Eigen::VectorXd r = u - lower;
    const double norm2 = r.dot(reference_element(p).mass * r) * 0.25 * el.box.area();
    field.values[e] = std::sqrt(std::max(norm2, 0.0));
  }
  return field;
}

const Eigen::MatrixXd* ReconstructionCache::find(const Key& key) const {
  auto it = ops_.find(key);
  return it == ops_.end() ? nullptr : &it->second;
}

const Eigen::MatrixXd& ReconstructionCache::insert(const Key& key, Eigen::MatrixXd op) {
  return ops_.insert_or_assign(key, std::move(op)).first->second;
}

namespace {

struct Patch {
  Box left;
  Box right;
  int left_order;
  int right_order;
};

// Samples of an element's nodal basis at a tensor Gauss rule on its box.
struct Sampling {
  Eigen::MatrixXd basis;         // Q x n
  Eigen::VectorXd sqrt_weights;  // Q, physical measure
  std::vector<Vec2> points;
};

Sampling sample_element(const Box& box, int order, int q) {
  const auto rule = gauss_legendre(q);
  const auto nodes = gauss_lobatto_nodes(order);
  const Eigen::MatrixXd v = lagrange_values(nodes, rule.points);
  Sampling s;
  s.basis = kron(v, v);
  s.sqrt_weights.resize(q * q);
  s.points.resize(q * q);
  for (int qy = 0; qy < q; ++qy) {
    for (int qx = 0; qx < q; ++qx) {
      const int k = qy * q + qx;
      s.sqrt_weights[k] = std::sqrt(rule.weights[qx] * rule.weights[qy] * 0.25 * box.area());
      s.points[k] = Vec2(box.min.x() + 0.5 * (rule.points[qx] + 1.0) * box.size.x(),
                         box.min.y() + 0.5 * (rule.points[qy] + 1.0) * box.size.y());
    }
  }
  return s;
}

// Weighted residual operator (I - Psi Psi^+) S of the patch least-squares fit.
// Rows: left quadrature points, then right; columns: left nodes, then right.
Eigen::MatrixXd build_patch_operator(const Patch& patch, bool total_degree) {
  const int r = std::max(patch.left_order, patch.right_order);
  const int q = r + 2;
  const Sampling sl = sample_element(patch.left, patch.left_order, q);
  const Sampling sr = sample_element(patch.right, patch.right_order, q);

  Vec2 lo = patch.left.min.cwiseMin(patch.right.min);
  Vec2 hi = (patch.left.min + patch.left.size).cwiseMax(patch.right.min + patch.right.size);
  const Vec2 center = 0.5 * (lo + hi);
  const Vec2 half = 0.5 * (hi - lo);

  std::vector<std::pair<int, int>> powers;
  for (int j = 0; j <= r; ++j) {
    for (int i = 0; i <= r; ++i) {
      if (!total_degree || i + j <= r) powers.emplace_back(i, j);
    }
  }

  const Eigen::Index ql = sl.basis.rows();
  const Eigen::Index qr = sr.basis.rows();
  const Eigen::Index nl = sl.basis.cols();
  const Eigen::Index nr = sr.basis.cols();
  Eigen::MatrixXd psi(ql + qr, static_cast<Eigen::Index>(powers.size()));
  Eigen::MatrixXd sample = Eigen::MatrixXd::Zero(ql + qr, nl + nr);
  auto fill = [&](const Sampling& s, Eigen::Index row0, Eigen::Index col0) {
    for (Eigen::Index k = 0; k < s.basis.rows(); ++k) {
      const Vec2 xn = (s.points[k] - center).cwiseQuotient(half);
      for (std::size_t b = 0; b < powers.size(); ++b) {
        psi(row0 + k, static_cast<Eigen::Index>(b)) =
            s.sqrt_weights[k] * std::pow(xn.x(), powers[b].first) *
            std::pow(xn.y(), powers[b].second);
      }
      sample.block(row0 + k, col0, 1, s.basis.cols()) = s.sqrt_weights[k] * s.basis.row(k);
    }
  };
  fill(sl, 0, 0);
  fill(sr, ql, nl);

  // Rank-revealing least squares; the minimum-norm fit if psi is deficient.
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(psi);
  const Eigen::MatrixXd fit = cod.solve(sample);
  return sample - psi * fit;
}

}  // namespace

ErrorField jump_reconstruction_estimate(const SolutionState& state, int component,
                                        JumpEstimatorOptions options,
                                        ReconstructionCache* cache) {
  if (component < 0 || component >= state.components()) {
    throw InvalidArgument("estimator component out of range");
  }
  ReconstructionCache local;
  if (!cache) cache = &local;
  const Mesh& mesh = state.mesh();
  const auto& elements = mesh.elements();
  const Vec2 agent = mesh.agent_size();
  std::vector<double> misfit(elements.size(), 0.0);

  for (const FaceSegment& f : mesh.faces()) {
    const Element& l = elements[f.left];
    const Element& r = elements[f.right];
    const ReconstructionCache::Key key{
        static_cast<int>(f.axis),
        static_cast<int>(l.child),
        static_cast<int>(r.child),
        static_cast<int>(f.left_part),
        static_cast<int>(f.right_part),
        l.order,
        r.order,
        std::llround(agent.x() * 1e12),
        std::llround(agent.y() * 1e12)};
    const Eigen::MatrixXd* op = cache->find(key);
    if (!op) {
      Box right = r.box;
      right.min += f.right_shift;
      op = &cache->insert(key, build_patch_operator(Patch{l.box, right, l.order, r.order},
                                                    options.total_degree));
    }
    const Eigen::Index nl = state.element(f.left).rows();
    const Eigen::Index nr = state.element(f.right).rows();
    Eigen::VectorXd u(nl + nr);
    u.head(nl) = state.element(f.left).col(component);
    u.tail(nr) = state.element(f.right).col(component);
    const Eigen::VectorXd res = *op * u;
    const Eigen::Index ql = res.size() / 2;
    misfit[f.left] += res.head(ql).squaredNorm();
    misfit[f.right] += res.tail(res.size() - ql).squaredNorm();
  }

  ErrorField field;
  field.component = component;
  field.values.resize(elements.size());
  const auto& count = mesh.faces_per_element();
  for (std::size_t e = 0; e < elements.size(); ++e) {
    field.values[e] = count[e] > 0 ? std::sqrt(misfit[e] / count[e]) : 0.0;
  }
  return field;
}

std::vector<double> aggregate_errors(std::span<const double> element_values, const Mesh& mesh) {
  if (static_cast<int>(element_values.size()) != mesh.element_count()) {
    throw InvalidArgument("error field length does not match element count");
  }
  std::vector<double> out(mesh.agent_count());
  for (int a = 0; a < mesh.agent_count(); ++a) {
    const int first = mesh.first_element(a);
    const int n = mesh.element_count(a);
    if (n == 1) {
      out[a] = element_values[first];
      continue;
    }
    double sum = 0.0;
    for (int k = 0; k < n; ++k) sum += element_values[first + k] * element_values[first + k];
    out[a] = std::sqrt(sum);
  }
  return out;
}

std::vector<double> aggregate_averages(std::span<const double> element_values, const Mesh& mesh) {
  if (static_cast<int>(element_values.size()) != mesh.element_count()) {
    throw InvalidArgument("field length does not match element count");
  }
  std::vector<double> out(mesh.agent_count());
  for (int a = 0; a < mesh.agent_count(); ++a) {
    const int first = mesh.first_element(a);
    const int n = mesh.element_count(a);
    double sum = 0.0;
    double area = 0.0;
    for (int k = 0; k < n; ++k) {
      const double w = mesh.elements()[first + k].box.area();
      sum += w * element_values[first + k];
      area += w;
    }
    out[a] = sum / area;
  }
  return out;
}

RunningMaxError running_max_update(RunningMaxError acc, std::span<const double> sample) {
  if (acc.values.empty()) acc.values.assign(sample.size(), 0.0);
  if (acc.values.size() != sample.size()) {
    throw InvalidArgument("running max length mismatch");
  }
  for (std::size_t i = 0; i < sample.size(); ++i) {
    acc.values[i] = std::max(acc.values[i], sample[i]);
  }
  return acc;
}

ErrorEstimator::ErrorEstimator(EstimatorKind kind, int component, JumpEstimatorOptions options)
    : kind_(kind),
      component_(component),
      options_(options),
      cache_(std::make_unique<ReconstructionCache>()) {}

ErrorEstimator::ErrorEstimator(const ErrorEstimator& other)
    : kind_(other.kind_),
      component_(other.component_),
      options_(other.options_),
      cache_(std::make_unique<ReconstructionCache>()) {}

ErrorEstimator& ErrorEstimator::operator=(const ErrorEstimator& other) {
  if (this != &other) {
    kind_ = other.kind_;
    component_ = other.component_;
    options_ = other.options_;
    cache_ = std::make_unique<ReconstructionCache>();
  }
  return *this;
}

ErrorEstimator ErrorEstimator::for_mode(RefineMode mode, int component,
                                        JumpEstimatorOptions options) {
  return ErrorEstimator(mode == RefineMode::p ? EstimatorKind::projection : EstimatorKind::jump,
                        component, options);
}

ErrorField ErrorEstimator::estimate(const SolutionState& state) const {
  if (kind_ == EstimatorKind::projection) return p_projection_estimate(state, component_);
  return jump_reconstruction_estimate(state, component_, options_, cache_.get());
}

std::vector<double> ErrorEstimator::agent_errors(const SolutionState& state) const {
  return aggregate_errors(estimate(state).values, state.mesh());
}

}  // namespace dynamo
