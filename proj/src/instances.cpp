#include "hilcert/instances.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hilcert/dense_oracle.hpp"

namespace hilcert {

void GridSpec::validate() const {
  if (dimension < 1 || dimension > 3)
    throw std::invalid_argument("GridSpec: dimension must be 1, 2 or 3");
  for (int a = 0; a < dimension; ++a)
    if (cells[static_cast<std::size_t>(a)] < 2)
      throw std::invalid_argument("GridSpec: need at least 2 cells per axis");
  if (spacing < 0.0) throw std::invalid_argument("GridSpec: negative spacing");
  static const std::set<std::string> axes3 = {"x-min", "x-max", "y-min",
                                              "y-max", "z-min", "z-max"};
  for (const auto& face : gamma_t) {
    if (!axes3.count(face)) throw std::invalid_argument("GridSpec: unknown face " + face);
    const char axis = face[0];
    const int ai = axis == 'x' ? 0 : axis == 'y' ? 1 : 2;
    if (ai >= dimension)
      throw std::invalid_argument("GridSpec: face " + face + " invalid for dimension");
  }
  if (hole) {
    const auto& b = *hole;
    for (int a = 0; a < dimension; ++a) {
      const std::size_t lo = b[2 * static_cast<std::size_t>(a)];
      const std::size_t hi = b[2 * static_cast<std::size_t>(a) + 1];
      if (lo >= hi || lo == 0 || hi >= cells[static_cast<std::size_t>(a)])
        throw std::invalid_argument("GridSpec: hole must be strictly interior");
    }
  }
  if (!epsilon.empty()) {
    std::size_t ncells = 1;
    for (int a = 0; a < dimension; ++a) ncells *= cells[static_cast<std::size_t>(a)];
    if (epsilon.size() != 1 && epsilon.size() != ncells)
      throw std::invalid_argument("GridSpec: epsilon must have one value or one per cell");
    for (double e : epsilon)
      if (!(e > 0.0)) throw std::invalid_argument("GridSpec: epsilon must be positive");
  }
}

namespace {

// Staggered cochain spaces on a box: a level-l entity extends along the axes
// in its direction set (cell positions there, node positions elsewhere). The
// operators are the cubical exterior derivatives scaled by 1/h; consecutive
// ones cancel exactly.
struct StaggeredMesh {
  int dim;
  std::array<std::size_t, 3> cells;
  double h;
  const GridSpec* spec;

  explicit StaggeredMesh(const GridSpec& s) : dim(s.dimension), cells(s.cells), spec(&s) {
    h = s.spacing > 0.0 ? s.spacing : 1.0 / static_cast<double>(cells[0]);
  }

  // direction sets per level, lexicographic
  std::vector<std::vector<int>> dir_sets(int level) const {
    std::vector<std::vector<int>> sets;
    for (unsigned mask = 0; mask < (1u << dim); ++mask) {
      if (static_cast<int>(__builtin_popcount(mask)) != level) continue;
      std::vector<int> s;
      for (int a = 0; a < dim; ++a)
        if (mask & (1u << a)) s.push_back(a);
      sets.push_back(std::move(s));
    }
    return sets;
  }

  std::size_t axis_count(int axis, bool extends) const {
    return extends ? cells[static_cast<std::size_t>(axis)]
                   : cells[static_cast<std::size_t>(axis)] + 1;
  }

  bool extends(const std::vector<int>& dirs, int axis) const {
    return std::find(dirs.begin(), dirs.end(), axis) != dirs.end();
  }

  bool removed_by_gamma_t(const std::vector<int>& dirs,
                          const std::array<std::size_t, 3>& pos) const {
    for (const auto& face : spec->gamma_t) {
      const int axis = face[0] == 'x' ? 0 : face[0] == 'y' ? 1 : 2;
      if (extends(dirs, axis)) continue;  // extent crosses the plane
      const bool is_min = face.find("min") != std::string::npos;
      const std::size_t boundary = is_min ? 0 : cells[static_cast<std::size_t>(axis)];
      if (pos[static_cast<std::size_t>(axis)] == boundary) return true;
    }
    return false;
  }

  bool removed_by_hole(const std::vector<int>& dirs,
                       const std::array<std::size_t, 3>& pos) const {
    if (!spec->hole) return false;
    const auto& b = *spec->hole;
    for (int a = 0; a < dim; ++a) {
      const std::size_t lo = b[2 * static_cast<std::size_t>(a)];
      const std::size_t hi = b[2 * static_cast<std::size_t>(a) + 1];
      const std::size_t p = pos[static_cast<std::size_t>(a)];
      if (extends(dirs, a)) {
        if (p < lo || p >= hi) return false;  // extent [p, p+1] not inside [lo, hi]
      } else {
        if (p <= lo || p >= hi) return false;  // node position not strictly inside
      }
    }
    return true;
  }

  bool cell_in_hole(const std::array<std::size_t, 3>& c) const {
    if (!spec->hole) return false;
    const auto& b = *spec->hole;
    for (int a = 0; a < dim; ++a) {
      const std::size_t p = c[static_cast<std::size_t>(a)];
      if (p < b[2 * static_cast<std::size_t>(a)] || p >= b[2 * static_cast<std::size_t>(a) + 1])
        return false;
    }
    return true;
  }

  double cell_epsilon(const std::array<std::size_t, 3>& c) const {
    if (spec->epsilon.empty()) return 1.0;
    if (spec->epsilon.size() == 1) return spec->epsilon[0];
    std::size_t idx = 0, stride = 1;
    for (int a = 0; a < dim; ++a) {
      idx += c[static_cast<std::size_t>(a)] * stride;
      stride *= cells[static_cast<std::size_t>(a)];
    }
    return spec->epsilon[idx];
  }

  // Arithmetic mean of epsilon over the live cells adjacent to an entity.
  double epsilon_average(const std::vector<int>& dirs,
                         const std::array<std::size_t, 3>& pos) const {
    std::vector<int> free_axes;
    for (int a = 0; a < dim; ++a)
      if (!extends(dirs, a)) free_axes.push_back(a);
    double sum = 0.0;
    std::size_t count = 0;
    const std::size_t combos = std::size_t{1} << free_axes.size();
    for (std::size_t m = 0; m < combos; ++m) {
      std::array<std::size_t, 3> c = pos;
      bool ok = true;
      for (std::size_t i = 0; i < free_axes.size(); ++i) {
        const int a = free_axes[i];
        std::size_t p = pos[static_cast<std::size_t>(a)];
        if (m & (std::size_t{1} << i)) {
          if (p == 0) { ok = false; break; }
          p -= 1;
        } else {
          if (p >= cells[static_cast<std::size_t>(a)]) { ok = false; break; }
        }
        c[static_cast<std::size_t>(a)] = p;
      }
      if (!ok || cell_in_hole(c)) continue;
      sum += cell_epsilon(c);
      ++count;
    }
    return count ? sum / static_cast<double>(count) : 1.0;
  }

  double lumped_weight(const std::vector<int>& dirs,
                       const std::array<std::size_t, 3>& pos) const {
    double w = 1.0;
    for (int a = 0; a < dim; ++a) {
      if (extends(dirs, a)) {
        w *= h;
      } else {
        const std::size_t p = pos[static_cast<std::size_t>(a)];
        w *= (p == 0 || p == cells[static_cast<std::size_t>(a)]) ? 0.5 * h : h;
      }
    }
    return w;
  }
};

HilbertComplex build_staggered(const GridSpec& spec) {
  spec.validate();
  StaggeredMesh mesh(spec);
  const int dim = mesh.dim;

  // Enumerate live entities level by level.
  std::vector<std::vector<std::vector<std::size_t>>> dof;  // [level][type][flat pos]
  std::vector<std::size_t> level_dims(static_cast<std::size_t>(dim) + 1, 0);
  std::vector<Vec> grams(static_cast<std::size_t>(dim) + 1);

  auto flat_size = [&](const std::vector<int>& dirs) {
    std::size_t n = 1;
    for (int a = 0; a < dim; ++a) n *= mesh.axis_count(a, mesh.extends(dirs, a));
    return n;
  };
  auto flat_index = [&](const std::vector<int>& dirs, const std::array<std::size_t, 3>& pos) {
    std::size_t idx = 0, stride = 1;
    for (int a = 0; a < dim; ++a) {
      idx += pos[static_cast<std::size_t>(a)] * stride;
      stride *= mesh.axis_count(a, mesh.extends(dirs, a));
    }
    return idx;
  };

  for (int level = 0; level <= dim; ++level) {
    const auto sets = mesh.dir_sets(level);
    dof.emplace_back();
    for (const auto& dirs : sets) {
      std::vector<std::size_t> table(flat_size(dirs), static_cast<std::size_t>(-1));
      std::array<std::size_t, 3> pos{0, 0, 0};
      std::array<std::size_t, 3> limit{1, 1, 1};
      for (int a = 0; a < dim; ++a)
        limit[static_cast<std::size_t>(a)] = mesh.axis_count(a, mesh.extends(dirs, a));
      for (pos[2] = 0; pos[2] < limit[2]; ++pos[2])
        for (pos[1] = 0; pos[1] < limit[1]; ++pos[1])
          for (pos[0] = 0; pos[0] < limit[0]; ++pos[0]) {
            if (mesh.removed_by_gamma_t(dirs, pos)) continue;
            if (mesh.removed_by_hole(dirs, pos)) continue;
            table[flat_index(dirs, pos)] = level_dims[static_cast<std::size_t>(level)]++;
            double w = mesh.lumped_weight(dirs, pos);
            if (level == 1) w *= mesh.epsilon_average(dirs, pos);
            grams[static_cast<std::size_t>(level)].push_back(w);
          }
      dof.back().push_back(std::move(table));
    }
  }

  // Exterior derivatives: entity with directions D collects its D\{a}
  // sub-entities at the two positions along each a in D, with the usual
  // alternating sign.
  std::vector<SparseOperator> ops;
  for (int level = 0; level < dim; ++level) {
    SparseOperator a_op(level_dims[static_cast<std::size_t>(level) + 1],
                        level_dims[static_cast<std::size_t>(level)]);
    const auto hi_sets = mesh.dir_sets(level + 1);
    const auto lo_sets = mesh.dir_sets(level);
    auto lo_type_index = [&](const std::vector<int>& dirs) {
      for (std::size_t t = 0; t < lo_sets.size(); ++t)
        if (lo_sets[t] == dirs) return t;
      throw std::logic_error("staggered: missing direction set");
    };
    for (std::size_t thi = 0; thi < hi_sets.size(); ++thi) {
      const auto& dirs = hi_sets[thi];
      std::array<std::size_t, 3> pos{0, 0, 0};
      std::array<std::size_t, 3> limit{1, 1, 1};
      for (int a = 0; a < dim; ++a)
        limit[static_cast<std::size_t>(a)] = mesh.axis_count(a, mesh.extends(dirs, a));
      for (pos[2] = 0; pos[2] < limit[2]; ++pos[2])
        for (pos[1] = 0; pos[1] < limit[1]; ++pos[1])
          for (pos[0] = 0; pos[0] < limit[0]; ++pos[0]) {
            const std::size_t row =
                dof[static_cast<std::size_t>(level) + 1][thi][flat_index(dirs, pos)];
            if (row == static_cast<std::size_t>(-1)) continue;
            int parity = 0;
            for (int a : dirs) {
              std::vector<int> sub;
              for (int b : dirs)
                if (b != a) sub.push_back(b);
              const std::size_t tlo = lo_type_index(sub);
              const double sign = (parity % 2 == 0) ? 1.0 : -1.0;
              ++parity;
              for (int side = 0; side < 2; ++side) {
                std::array<std::size_t, 3> p = pos;
                p[static_cast<std::size_t>(a)] += static_cast<std::size_t>(side);
                const std::size_t col =
                    dof[static_cast<std::size_t>(level)][tlo][flat_index(sub, p)];
                if (col == static_cast<std::size_t>(-1)) continue;  // trace-zero dof
                a_op.add(row, col, sign * (side ? 1.0 : -1.0) / mesh.h);
              }
            }
          }
    }
    a_op.assemble();
    ops.push_back(std::move(a_op));
  }

  std::vector<WeightedSpace> spaces;
  for (int level = 0; level <= dim; ++level)
    spaces.push_back(WeightedSpace{level_dims[static_cast<std::size_t>(level)],
                                   GramOperator::diagonal(grams[static_cast<std::size_t>(level)])});
  std::vector<std::string> names;
  const char* names3[] = {"grad", "curl", "div"};
  for (int level = 0; level < dim; ++level) names.push_back(names3[level]);
  return HilbertComplex(std::move(spaces), std::move(ops), std::move(names));
}

}  // namespace

HilbertComplex build_path(std::size_t n, PathDirichlet dirichlet) {
  if (n < 2) throw std::invalid_argument("build_path: need n >= 2");
  GridSpec spec;
  spec.dimension = 1;
  spec.cells = {n, 1, 1};
  spec.spacing = 1.0 / static_cast<double>(n);
  if (dirichlet == PathDirichlet::Left) spec.gamma_t = {"x-min"};
  if (dirichlet == PathDirichlet::Both) spec.gamma_t = {"x-min", "x-max"};
  return build_staggered(spec);
}

HilbertComplex build_cycle(std::size_t n) {
  if (n < 3) throw std::invalid_argument("build_cycle: need n >= 3");
  const double h = 1.0 / static_cast<double>(n);
  SparseOperator grad(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    grad.add(i, (i + 1) % n, 1.0 / h);
    grad.add(i, i, -1.0 / h);
  }
  grad.assemble();
  std::vector<WeightedSpace> spaces;
  spaces.push_back(WeightedSpace{n, GramOperator::diagonal(Vec(n, h))});
  spaces.push_back(WeightedSpace{n, GramOperator::diagonal(Vec(n, h))});
  std::vector<SparseOperator> ops;
  ops.push_back(std::move(grad));
  return HilbertComplex(std::move(spaces), std::move(ops), {"grad"});
}

HilbertComplex build_grid2d(const GridSpec& spec) {
  if (spec.dimension != 2) throw std::invalid_argument("build_grid2d: dimension must be 2");
  return build_staggered(spec);
}

HilbertComplex build_grid3d(const GridSpec& spec) {
  if (spec.dimension != 3) throw std::invalid_argument("build_grid3d: dimension must be 3");
  return build_staggered(spec);
}

HilbertComplex build_grid(const GridSpec& spec) {
  spec.validate();
  if (spec.dimension == 2) return build_grid2d(spec);
  if (spec.dimension == 3) return build_grid3d(spec);
  return build_staggered(spec);
}

Recipe recipe_from_string(const std::string& s) {
  if (s == "smooth-potential") return Recipe::SmoothPotential;
  if (s == "range-pair") return Recipe::RangePair;
  if (s == "kernel-shift") return Recipe::KernelShift;
  throw std::invalid_argument("unknown recipe: " + s);
}

std::string to_string(Recipe r) {
  switch (r) {
    case Recipe::SmoothPotential: return "smooth-potential";
    case Recipe::RangePair: return "range-pair";
    case Recipe::KernelShift: return "kernel-shift";
  }
  return "?";
}

namespace {

Vec random_vec(std::mt19937& rng, std::size_t n) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vec v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

}  // namespace

ManufacturedScenario manufacture(const HilbertComplex& cx, std::size_t level,
                                 Recipe recipe, unsigned seed) {
  if (level > cx.top_level()) throw std::invalid_argument("manufacture: bad level");
  std::mt19937 rng(seed);
  const bool has_cur = cx.has_op(level);
  const bool has_prev = level > 0 && cx.has_op(level - 1);
  const std::size_t n = cx.dim(level);

  ManufacturedScenario sc;
  sc.level = level;
  sc.name = to_string(recipe) + "-seed" + std::to_string(seed);

  const CohomologyBasis& kb = cx.cohomology(level);

  switch (recipe) {
    case Recipe::SmoothPotential: {
      Vec x(n, 0.0);
      if (has_prev) {
        Vec u = random_vec(rng, cx.dim(level - 1));
        Vec au = cx.op(level - 1).apply(u);
        kernels::axpy(1.0, au.data(), x.data(), n);
      }
      if (has_cur) {
        Vec w = random_vec(rng, cx.dim(level + 1));
        Vec aw = cx.adjoint_action(level).apply(w);
        kernels::axpy(1.0, aw.data(), x.data(), n);
      }
      Vec kc(n, 0.0);
      if (!kb.vectors.empty()) {
        Vec coeff = random_vec(rng, kb.vectors.size());
        for (std::size_t i = 0; i < kb.vectors.size(); ++i)
          kernels::axpy(coeff[i], kb.vectors[i].data(), kc.data(), n);
        kernels::axpy(1.0, kc.data(), x.data(), n);
      }
      sc.exact_x = std::move(x);
      sc.k = std::move(kc);
      sc.description = "potential-built field with known harmonic part";
      break;
    }
    case Recipe::RangePair: {
      Vec x(n, 0.0);
      if (has_cur) {
        Vec w = random_vec(rng, cx.dim(level));
        sc.f = cx.op(level).apply(w);
        DenseSvd svd = dense_svd(cx.op(level), cx.gram(level), cx.gram(level + 1));
        Vec xf = svd.pseudo_apply(sc.f);
        kernels::axpy(1.0, xf.data(), x.data(), n);
      }
      if (has_prev) {
        Vec u = random_vec(rng, cx.dim(level));
        sc.g = cx.adjoint_action(level - 1).apply(u);
        DenseSvd svd = dense_svd(cx.op(level - 1), cx.gram(level - 1), cx.gram(level));
        Vec xg = svd.pseudo_apply_adjoint(sc.g);
        kernels::axpy(1.0, xg.data(), x.data(), n);
      }
      sc.exact_x = std::move(x);
      sc.k = Vec(n, 0.0);
      sc.description = "range data with oracle-recovered exact field";
      break;
    }
    case Recipe::KernelShift: {
      Vec x(n, 0.0);
      if (!kb.vectors.empty()) {
        Vec coeff = random_vec(rng, kb.vectors.size());
        for (std::size_t i = 0; i < kb.vectors.size(); ++i)
          kernels::axpy(coeff[i], kb.vectors[i].data(), x.data(), n);
      }
      sc.exact_x = x;
      sc.k = x;
      sc.f = has_cur ? Vec(cx.dim(level + 1), 0.0) : Vec();
      sc.g = has_prev ? Vec(cx.dim(level - 1), 0.0) : Vec();
      sc.description = "pure harmonic field";
      break;
    }
  }

  if (recipe != Recipe::KernelShift) {
    if (has_cur) sc.f = cx.op(level).apply(sc.exact_x);
    if (has_prev) sc.g = cx.adjoint_action(level - 1).apply(sc.exact_x);
  }
  if (!has_cur) sc.f.clear();
  if (!has_prev) sc.g.clear();
  return sc;
}

}  // namespace hilcert
