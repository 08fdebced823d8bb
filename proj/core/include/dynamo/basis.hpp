#pragma once

#include <vector>

#include <Eigen/Core>

namespace dynamo {

struct Quadrature1D {
  std::vector<double> points;
  std::vector<double> weights;
};

/// Gauss-Lobatto points on [-1, 1] for a degree-`order` nodal basis. Order 0
/// degenerates to the midpoint so that piecewise constants share the API.
std::vector<double> gauss_lobatto_nodes(int order);
Quadrature1D gauss_lobatto(int npoints);
Quadrature1D gauss_legendre(int npoints);

/// values(k, j) = l_j(points[k]) for the Lagrange basis on `nodes`.
Eigen::MatrixXd lagrange_values(const std::vector<double>& nodes,
                                const std::vector<double>& points);
Eigen::MatrixXd lagrange_derivatives(const std::vector<double>& nodes,
                                     const std::vector<double>& points);

/// Kronecker product with the first factor acting on the slow (y) index.
Eigen::MatrixXd kron(const Eigen::MatrixXd& slow, const Eigen::MatrixXd& fast);

enum class FaceSide { west = 0, east = 1, south = 2, north = 3 };

/// Tensor-product nodal element of one order with its Gauss-Legendre
/// (order + 2 points per direction) volume rule. Node index = iy * (p+1) + ix;
/// quadrature index = qy * q + qx.
struct ReferenceElement {
  int order = 0;
  int nodes_1d = 0;
  int quad_1d = 0;
  std::vector<double> nodes;
  Quadrature1D rule;
  Eigen::MatrixXd values_1d;       // quad_1d x nodes_1d
  Eigen::MatrixXd derivatives_1d;  // quad_1d x nodes_1d
  Eigen::MatrixXd mass_1d;
  Eigen::MatrixXd mass_1d_inv;

  Eigen::MatrixXd interp;      // Q x n
  Eigen::VectorXd weights;     // Q, reference measure (sums to 4)
  Eigen::MatrixXd grad_x_t;    // n x Q, D_xi^T diag(w)
  Eigen::MatrixXd grad_y_t;    // n x Q, D_eta^T diag(w)
  Eigen::MatrixXd mass;        // n x n, reference measure
  Eigen::MatrixXd mass_inv;
  Eigen::RowVectorXd mean;     // cell average = mean * U

  int node_count() const { return nodes_1d * nodes_1d; }
  int quad_count() const { return quad_1d * quad_1d; }
};

/// Shared, lazily built reference data. Returned references stay valid for
/// the lifetime of the program. Safe to call from several threads.
const ReferenceElement& reference_element(int order);

/// Trace of a degree-`order` element on one face, sampled at `npoints`
/// Gauss-Legendre points of the full face or of its lower/upper half.
/// Returned matrix is npoints x node_count.
const Eigen::MatrixXd& face_trace(int order, FaceSide side, int npoints, int part);

/// L2 projection between polynomial orders on one element (n_to x n_from).
const Eigen::MatrixXd& order_transfer(int from, int to);

/// Exact evaluation of a parent polynomial at the nodes of child `child`.
const Eigen::MatrixXd& child_prolongation(int order, int child);

/// L2 projection of child `child`'s polynomial onto the parent space; the four
/// child contributions sum to the parent's coefficients.
const Eigen::MatrixXd& child_restriction(int order, int child);

/// Evaluation matrix of the nodal basis at arbitrary reference points.
Eigen::MatrixXd evaluation_matrix(int order, const std::vector<double>& xi,
                                  const std::vector<double>& eta);

}  // namespace dynamo
