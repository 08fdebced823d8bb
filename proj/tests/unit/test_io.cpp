#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dynamo/error.hpp"
#include "dynamo/io.hpp"
#include "dynamo/problems.hpp"

using namespace dynamo;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

int find_line(const std::vector<std::string>& lines, const std::string& s) {
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (lines[i] == s) return static_cast<int>(i);
  return -1;
}

}  // namespace

TEST_CASE("mesh vtk") {
  const Mesh mesh = Mesh::cartesian(2, 1, Vec2(0, 0), Vec2(2, 1), RefineMode::h, 1)
                        .apply_actions(std::vector<Action>{Action::fine, Action::coarse});
  const fs::path p = fs::temp_directory_path() / "dynamo_mesh_test.vtk";
  write_mesh_vtk(p.string(), mesh);
  const auto l = lines_of(p);
  CHECK(l[0] == "# vtk DataFile Version 3.0");
  CHECK(find_line(l, "POINTS 20 double") >= 0);
  CHECK(find_line(l, "CELLS 5 25") >= 0);
  CHECK(find_line(l, "CELL_TYPES 5") >= 0);
  const int ref = find_line(l, "SCALARS refinement int 1");
  REQUIRE(ref >= 0);
  CHECK(l[ref + 2] == "1");
  CHECK(l[ref + 6] == "0");
  const int agent = find_line(l, "SCALARS agent int 1");
  CHECK(l[agent + 6] == "1");
  fs::remove(p);
  CHECK_THROWS_AS(write_mesh_vtk("/nonexistent_dir/x.vtk", mesh), IoError);
}

TEST_CASE("solution vtk and integral log") {
  const ProblemSpec s = example_problem(Family::euler_density_pulse);
  auto mesh = std::make_shared<const Mesh>(
      Mesh::cartesian(3, 3, s.domain_min, s.domain_max, RefineMode::p, 2));
  const auto state = interpolate_ic(initial_condition(s), mesh, 4);
  const fs::path p = fs::temp_directory_path() / "dynamo_solution_test.vtk";
  write_solution_vtk(p.string(), state, law_for(s));
  const auto l = lines_of(p);
  const int rho = find_line(l, "SCALARS density double 1");
  const int pr = find_line(l, "SCALARS pressure double 1");
  REQUIRE(rho >= 0);
  REQUIRE(pr > rho);
  CHECK(std::stod(l[rho + 2]) == doctest::Approx(state.cell_average(0)[0]));
  fs::remove(p);

  const fs::path q = fs::temp_directory_path() / "dynamo_integrals_test.csv";
  IntegralLog log(q.string(), 4);
  log.record(state);
  log.record(state);
  const auto r = lines_of(q);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == "time,integral_0,integral_1,integral_2,integral_3");
  CHECK(r[1] == r[2]);
  std::stringstream row(r[1]);
  std::string cell;
  std::getline(row, cell, ',');
  CHECK(std::stod(cell) == 0.0);
  std::getline(row, cell, ',');
  CHECK(std::stod(cell) == doctest::Approx(state.integral()[0]));
  fs::remove(q);
}

TEST_CASE("agent error csv") {
  const Mesh mesh = Mesh::cartesian(2, 2, Vec2(0, 0), Vec2(1, 1), RefineMode::p, 2)
                        .apply_actions(std::vector<Action>{Action::coarse, Action::fine,
                                                           Action::coarse, Action::coarse});
  const std::vector<double> e{0.1, 0.2, 0.3, 0.4};
  const fs::path p = fs::temp_directory_path() / "dynamo_agents_test.csv";
  write_agent_errors_csv(p.string(), mesh, e);
  const auto l = lines_of(p);
  REQUIRE(l.size() == 5);
  CHECK(l[0] == "agent,ix,iy,x,y,fine,error");
  CHECK(l[2] == "1,1,0,0.75,0.25,1,0.20000000000000001");
  CHECK_THROWS_AS(write_agent_errors_csv(p.string(), mesh, std::vector<double>{1.0}), InvalidArgument);
  fs::remove(p);
}
