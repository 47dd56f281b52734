#pragma once

#include <array>
#include <optional>
#include <set>

#include "hilcert/complex.hpp"

namespace hilcert {

// Axis-aligned box mesh with lowest-order staggered placement: scalars on
// nodes, vector components on edges (weighted by epsilon) and faces, scalars
// on cells. gamma_t names the outer box faces carrying the essential boundary
// condition; degrees of freedom contained in those faces are removed. An
// optional hole removes all entities strictly inside a cell-index box; the
// hole surface is left natural.
struct GridSpec {
  int dimension = 3;
  std::array<std::size_t, 3> cells{2, 2, 2};
  double spacing = 0.0;  // 0 = 1/cells[0]
  std::optional<std::array<std::size_t, 6>> hole;  // {x0,x1, y0,y1, z0,z1} cell ranges
  std::set<std::string> gamma_t;  // of {x,y,z}-{min,max}; empty = natural everywhere
  Vec epsilon;                    // per cell (lexicographic, x fastest) or one value

  void validate() const;  // throws std::invalid_argument
};

enum class PathDirichlet { None, Left, Both };

HilbertComplex build_path(std::size_t n, PathDirichlet dirichlet);
HilbertComplex build_cycle(std::size_t n);
HilbertComplex build_grid2d(const GridSpec& spec);
HilbertComplex build_grid3d(const GridSpec& spec);
HilbertComplex build_grid(const GridSpec& spec);  // dispatch on dimension

enum class Recipe { SmoothPotential, RangePair, KernelShift };

Recipe recipe_from_string(const std::string& s);
std::string to_string(Recipe r);

struct ManufacturedScenario {
  std::string name;
  std::size_t level = 0;
  Vec exact_x;
  Vec f, g, k;
  std::string description;
};

// Deterministic test-data generator: exact_x is known by construction and the
// data (f, g, k) are exactly compatible images under the complex operators.
// RangePair draws the data first and recovers exact_x through the dense
// oracle, so it is limited to instances under the oracle cap.
ManufacturedScenario manufacture(const HilbertComplex& cx, std::size_t level,
                                 Recipe recipe, unsigned seed);

}  // namespace hilcert
