#pragma once

#include <span>
#include <string>
#include <vector>

#include "dynamo/dg.hpp"
#include "dynamo/equations.hpp"
#include "dynamo/mesh.hpp"

namespace dynamo {

/// Legacy ASCII VTK unstructured grid of the mesh: one quad per element in
/// agent row-major, children z-order, with refinement level, agent id and
/// polynomial order as cell data.
void write_mesh_vtk(const std::string& path, const Mesh& mesh);

/// Mesh plus cell averages of every conserved component (and pressure for
/// Euler).
void write_solution_vtk(const std::string& path, const SolutionState& state,
                        const ConservationLaw& law);

/// Appends rows of time and domain integrals of every component.
class IntegralLog {
 public:
  IntegralLog(std::string path, int components);
  void record(const SolutionState& state);

 private:
  std::string path_;
};

void write_agent_errors_csv(const std::string& path, const Mesh& mesh,
                            std::span<const double> errors);

}  // namespace dynamo
