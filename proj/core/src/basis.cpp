#include "dynamo/basis.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <tuple>

#include <Eigen/LU>

#include "dynamo/error.hpp"

namespace dynamo {

namespace {

// Legendre polynomial P_n and its derivative at x.
void legendre(int n, double x, double* p, double* dp) {
  double p0 = 1.0;
  double p1 = x;
  if (n == 0) {
    *p = 1.0;
    *dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  *p = p1;
  *dp = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace

Quadrature1D gauss_legendre(int npoints) {
  if (npoints < 1) throw InvalidArgument("quadrature needs at least one point");
  Quadrature1D q;
  q.points.resize(npoints);
  q.weights.resize(npoints);
  for (int i = 0; i < npoints; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (npoints + 0.5));
    double p = 0.0;
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      legendre(npoints, x, &p, &dp);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    legendre(npoints, x, &p, &dp);
    q.points[npoints - 1 - i] = x;
    q.weights[npoints - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return q;
}

Quadrature1D gauss_lobatto(int npoints) {
  if (npoints < 2) throw InvalidArgument("Gauss-Lobatto needs at least two points");
  const int n = npoints - 1;
  Quadrature1D q;
  q.points.resize(npoints);
  q.weights.resize(npoints);
  // Newton iteration on the Legendre-Vandermonde recurrence.
  std::vector<double> x(npoints);
  std::vector<double> xold(npoints, 2.0);
  for (int i = 0; i < npoints; ++i) x[i] = -std::cos(std::numbers::pi * i / n);
  Eigen::MatrixXd P(npoints, npoints);
  for (int it = 0; it < 200; ++it) {
    double change = 0.0;
    for (int i = 0; i < npoints; ++i) {
      xold[i] = x[i];
      P(i, 0) = 1.0;
      P(i, 1) = x[i];
      for (int k = 2; k <= n; ++k) {
        P(i, k) = ((2.0 * k - 1.0) * x[i] * P(i, k - 1) - (k - 1.0) * P(i, k - 2)) / k;
      }
      x[i] = xold[i] - (x[i] * P(i, n) - P(i, n - 1)) / (npoints * P(i, n));
      change = std::max(change, std::abs(x[i] - xold[i]));
    }
    if (change < 1e-16) break;
  }
  for (int i = 0; i < npoints; ++i) {
    double p = 0.0;
    double dp = 0.0;
    legendre(n, x[i], &p, &dp);
    q.points[i] = x[i];
    q.weights[i] = 2.0 / (n * npoints * p * p);
  }
  q.points.front() = -1.0;
  q.points.back() = 1.0;
  return q;
}

std::vector<double> gauss_lobatto_nodes(int order) {
  if (order < 0) throw InvalidArgument("negative polynomial order");
  if (order == 0) return {0.0};
  return gauss_lobatto(order + 1).points;
}

Eigen::MatrixXd lagrange_values(const std::vector<double>& nodes,
                                const std::vector<double>& points) {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd v(static_cast<Eigen::Index>(points.size()), n);
  for (Eigen::Index k = 0; k < v.rows(); ++k) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double l = 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i != j) l *= (points[k] - nodes[i]) / (nodes[j] - nodes[i]);
      }
      v(k, j) = l;
    }
  }
  return v;
}

Eigen::MatrixXd lagrange_derivatives(const std::vector<double>& nodes,
                                     const std::vector<double>& points) {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd d(static_cast<Eigen::Index>(points.size()), n);
  for (Eigen::Index k = 0; k < d.rows(); ++k) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double sum = 0.0;
      for (Eigen::Index m = 0; m < n; ++m) {
        if (m == j) continue;
        double term = 1.0 / (nodes[j] - nodes[m]);
        for (Eigen::Index i = 0; i < n; ++i) {
          if (i != j && i != m) term *= (points[k] - nodes[i]) / (nodes[j] - nodes[i]);
        }
        sum += term;
      }
      d(k, j) = sum;
    }
  }
  return d;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& slow, const Eigen::MatrixXd& fast) {
  Eigen::MatrixXd out(slow.rows() * fast.rows(), slow.cols() * fast.cols());
  for (Eigen::Index i = 0; i < slow.rows(); ++i) {
    for (Eigen::Index j = 0; j < slow.cols(); ++j) {
      out.block(i * fast.rows(), j * fast.cols(), fast.rows(), fast.cols()) = slow(i, j) * fast;
    }
  }
  return out;
}

namespace {

std::unique_ptr<ReferenceElement> build_reference(int order) {
  auto ref = std::make_unique<ReferenceElement>();
  ref->order = order;
  ref->nodes = gauss_lobatto_nodes(order);
  ref->nodes_1d = order + 1;
  ref->quad_1d = order + 2;
  ref->rule = gauss_legendre(ref->quad_1d);
  ref->values_1d = lagrange_values(ref->nodes, ref->rule.points);
  ref->derivatives_1d = lagrange_derivatives(ref->nodes, ref->rule.points);
  const Eigen::Map<const Eigen::VectorXd> w1(ref->rule.weights.data(), ref->quad_1d);
  ref->mass_1d = ref->values_1d.transpose() * w1.asDiagonal() * ref->values_1d;
  ref->mass_1d_inv = ref->mass_1d.inverse();

  ref->interp = kron(ref->values_1d, ref->values_1d);
  const Eigen::MatrixXd dxi = kron(ref->values_1d, ref->derivatives_1d);
  const Eigen::MatrixXd deta = kron(ref->derivatives_1d, ref->values_1d);
  ref->weights.resize(ref->quad_count());
  for (int qy = 0; qy < ref->quad_1d; ++qy) {
    for (int qx = 0; qx < ref->quad_1d; ++qx) {
      ref->weights[qy * ref->quad_1d + qx] = w1[qy] * w1[qx];
    }
  }
  ref->grad_x_t = dxi.transpose() * ref->weights.asDiagonal();
  ref->grad_y_t = deta.transpose() * ref->weights.asDiagonal();
  ref->mass = kron(ref->mass_1d, ref->mass_1d);
  ref->mass_inv = kron(ref->mass_1d_inv, ref->mass_1d_inv);
  ref->mean = 0.25 * ref->mass.colwise().sum();
  return ref;
}

template <typename Key, typename Value>
class Cache {
 public:
  template <typename Builder>
  const Value& get(const Key& key, Builder&& build) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      it = entries_.emplace(key, std::make_unique<Value>(build())).first;
    }
    return *it->second;
  }

 private:
  std::mutex mutex_;
  std::map<Key, std::unique_ptr<Value>> entries_;
};

// Maps a reference coordinate of a half interval into the parent interval.
std::vector<double> to_half(const std::vector<double>& s, int half) {
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = half == 0 ? 0.5 * (s[i] - 1.0) : 0.5 * (s[i] + 1.0);
  }
  return out;
}

}  // namespace

const ReferenceElement& reference_element(int order) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<ReferenceElement>> cache;
  if (order < 0 || order > 12) throw InvalidArgument("unsupported polynomial order");
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = build_reference(order);
  return *slot;
}

const Eigen::MatrixXd& face_trace(int order, FaceSide side, int npoints, int part) {
  static Cache<std::tuple<int, int, int, int>, Eigen::MatrixXd> cache;
  return cache.get({order, static_cast<int>(side), npoints, part}, [&] {
    const auto nodes = gauss_lobatto_nodes(order);
    const auto rule = gauss_legendre(npoints);
    std::vector<double> t = rule.points;
    if (part == 1) t = to_half(rule.points, 0);
    if (part == 2) t = to_half(rule.points, 1);
    const double fixed = (side == FaceSide::west || side == FaceSide::south) ? -1.0 : 1.0;
    const Eigen::MatrixXd along = lagrange_values(nodes, t);
    const Eigen::MatrixXd across = lagrange_values(nodes, {fixed});
    if (side == FaceSide::west || side == FaceSide::east) {
      return kron(along, across);  // varies in eta (slow), fixed xi (fast)
    }
    return kron(across, along);
  });
}

const Eigen::MatrixXd& order_transfer(int from, int to) {
  static Cache<std::pair<int, int>, Eigen::MatrixXd> cache;
  return cache.get({from, to}, [&] {
    const auto rule = gauss_legendre(std::max(from, to) + 2);
    const auto nf = gauss_lobatto_nodes(from);
    const auto nt = gauss_lobatto_nodes(to);
    const Eigen::MatrixXd bf = lagrange_values(nf, rule.points);
    const Eigen::MatrixXd bt = lagrange_values(nt, rule.points);
    const Eigen::Map<const Eigen::VectorXd> w(rule.weights.data(),
                                              static_cast<Eigen::Index>(rule.weights.size()));
    const Eigen::MatrixXd m = bt.transpose() * w.asDiagonal() * bt;
    const Eigen::MatrixXd p1 = m.inverse() * (bt.transpose() * w.asDiagonal() * bf);
    return kron(p1, p1);
  });
}

const Eigen::MatrixXd& child_prolongation(int order, int child) {
  static Cache<std::pair<int, int>, Eigen::MatrixXd> cache;
  return cache.get({order, child}, [&] {
    const auto nodes = gauss_lobatto_nodes(order);
    const Eigen::MatrixXd ex = lagrange_values(nodes, to_half(nodes, child & 1));
    const Eigen::MatrixXd ey = lagrange_values(nodes, to_half(nodes, (child >> 1) & 1));
    return kron(ey, ex);
  });
}

const Eigen::MatrixXd& child_restriction(int order, int child) {
  static Cache<std::pair<int, int>, Eigen::MatrixXd> cache;
  return cache.get({order, child}, [&] {
    const ReferenceElement& ref = reference_element(order);
    const auto& g = ref.rule.points;
    const Eigen::Map<const Eigen::VectorXd> w(ref.rule.weights.data(), ref.quad_1d);
    auto restrict_1d = [&](int half) {
      const Eigen::MatrixXd parent_at = lagrange_values(ref.nodes, to_half(g, half));
      return Eigen::MatrixXd(ref.mass_1d_inv *
                             (0.5 * parent_at.transpose() * w.asDiagonal() * ref.values_1d));
    };
    return kron(restrict_1d((child >> 1) & 1), restrict_1d(child & 1));
  });
}

Eigen::MatrixXd evaluation_matrix(int order, const std::vector<double>& xi,
                                  const std::vector<double>& eta) {
  const auto nodes = gauss_lobatto_nodes(order);
  const Eigen::MatrixXd vx = lagrange_values(nodes, xi);
  const Eigen::MatrixXd vy = lagrange_values(nodes, eta);
  const int n1 = order + 1;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(xi.size()), n1 * n1);
  for (Eigen::Index k = 0; k < out.rows(); ++k) {
    for (int iy = 0; iy < n1; ++iy) {
      for (int ix = 0; ix < n1; ++ix) out(k, iy * n1 + ix) = vy(k, iy) * vx(k, ix);
    }
  }
  return out;
}

}  // namespace dynamo
