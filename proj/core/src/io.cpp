#include "dynamo/io.hpp"

#include <fstream>

#include "dynamo/error.hpp"

namespace dynamo {

namespace {

std::ofstream open_for_write(const std::string& path, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream out(path, std::ios::out | mode);
  if (!out) throw IoError("cannot open " + path);
  out.precision(17);
  return out;
}

void write_geometry(std::ostream& out, const Mesh& mesh) {
  const auto& elements = mesh.elements();
  const std::size_t n = elements.size();
  out << "# vtk DataFile Version 3.0\n";
  out << "dynamo mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << 4 * n << " double\n";
  for (const Element& e : elements) {
    const Vec2 a = e.box.min;
    const Vec2 b = e.box.min + e.box.size;
    out << a.x() << ' ' << a.y() << " 0\n";
    out << b.x() << ' ' << a.y() << " 0\n";
    out << b.x() << ' ' << b.y() << " 0\n";
    out << a.x() << ' ' << b.y() << " 0\n";
  }
  out << "CELLS " << n << ' ' << 5 * n << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << "4 " << 4 * i << ' ' << 4 * i + 1 << ' ' << 4 * i + 2 << ' ' << 4 * i + 3 << '\n';
  }
  out << "CELL_TYPES " << n << '\n';
  for (std::size_t i = 0; i < n; ++i) out << "9\n";

  out << "CELL_DATA " << n << '\n';
  out << "SCALARS refinement int 1\nLOOKUP_TABLE default\n";
  for (const Element& e : elements) out << (mesh.is_fine(e.agent) ? 1 : 0) << '\n';
  out << "SCALARS agent int 1\nLOOKUP_TABLE default\n";
  for (const Element& e : elements) out << e.agent << '\n';
  out << "SCALARS order int 1\nLOOKUP_TABLE default\n";
  for (const Element& e : elements) out << e.order << '\n';
}

}  // namespace

void write_mesh_vtk(const std::string& path, const Mesh& mesh) {
  auto out = open_for_write(path);
  write_geometry(out, mesh);
  if (!out) throw IoError("failed writing " + path);
}

void write_solution_vtk(const std::string& path, const SolutionState& state,
                        const ConservationLaw& law) {
  auto out = open_for_write(path);
  const Mesh& mesh = state.mesh();
  write_geometry(out, mesh);
  const int m = state.components();
  std::vector<StateVec> avg;
  avg.reserve(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) avg.push_back(state.cell_average(e));
  const char* euler_names[] = {"density", "momentum_x", "momentum_y", "energy"};
  for (int c = 0; c < m; ++c) {
    out << "SCALARS " << (law.kind() == LawKind::euler ? euler_names[c] : "u")
        << " double 1\nLOOKUP_TABLE default\n";
    for (const auto& a : avg) out << a[c] << '\n';
  }
  if (law.kind() == LawKind::euler) {
    out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
    for (const auto& a : avg) out << pressure(law, a) << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

IntegralLog::IntegralLog(std::string path, int components) : path_(std::move(path)) {
  auto out = open_for_write(path_);
  out << "time";
  for (int c = 0; c < components; ++c) out << ",integral_" << c;
  out << '\n';
  if (!out) throw IoError("failed writing " + path_);
}

void IntegralLog::record(const SolutionState& state) {
  auto out = open_for_write(path_, std::ios::app);
  const Eigen::VectorXd total = state.integral();
  out << state.time();
  for (Eigen::Index c = 0; c < total.size(); ++c) out << ',' << total[c];
  out << '\n';
  if (!out) throw IoError("failed writing " + path_);
}

void write_agent_errors_csv(const std::string& path, const Mesh& mesh,
                            std::span<const double> errors) {
  if (static_cast<int>(errors.size()) != mesh.agent_count()) {
    throw InvalidArgument("error list does not match agent count");
  }
  auto out = open_for_write(path);
  out << "agent,ix,iy,x,y,fine,error\n";
  for (int a = 0; a < mesh.agent_count(); ++a) {
    const Vec2 c = mesh.agent_centroid(a);
    out << a << ',' << mesh.agent_ix(a) << ',' << mesh.agent_iy(a) << ',' << c.x() << ','
        << c.y() << ',' << (mesh.is_fine(a) ? 1 : 0) << ',' << errors[a] << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace dynamo
