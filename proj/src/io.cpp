#include "hilcert/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace hilcert {

void save_complex(const HilbertComplex& cx, const std::string& dir,
                  const std::string& name) {
  fs::create_directories(dir);
  json manifest;
  manifest["name"] = name;
  json spaces = json::array();
  for (std::size_t l = 0; l < cx.num_spaces(); ++l) {
    json sp;
    sp["dim"] = cx.dim(l);
    const GramOperator& g = cx.gram(l);
    const std::string gram_file = name + "_gram" + std::to_string(l) +
                                  (g.is_diagonal() ? ".csv" : ".mtx");
    if (g.is_diagonal()) {
      write_vector_csv_file((fs::path(dir) / gram_file).string(), g.diag());
      sp["gram"] = {{"type", "diagonal"}, {"file", gram_file}};
    } else {
      throw std::invalid_argument("save_complex: general Grams need their defining matrix");
    }
    spaces.push_back(sp);
  }
  manifest["spaces"] = spaces;
  json ops = json::array();
  for (std::size_t l = 0; l < cx.num_ops(); ++l) {
    const std::string op_file = name + "_op" + std::to_string(l) + ".mtx";
    write_matrix_market_file((fs::path(dir) / op_file).string(), cx.op(l));
    ops.push_back({{"label", cx.name(l)}, {"file", op_file}});
  }
  manifest["operators"] = ops;
  write_json_file((fs::path(dir) / (name + ".json")).string(), manifest);
}

HilbertComplex load_complex(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open " + manifest_path);
  json manifest = json::parse(in);
  const fs::path dir = fs::path(manifest_path).parent_path();

  std::vector<WeightedSpace> spaces;
  for (const auto& sp : manifest.at("spaces")) {
    const std::size_t dim = sp.at("dim").get<std::size_t>();
    const auto& gram = sp.at("gram");
    const std::string type = gram.at("type").get<std::string>();
    const std::string file = (dir / gram.at("file").get<std::string>()).string();
    if (type == "diagonal") {
      Vec d = read_vector_csv_file(file);
      if (d.size() != dim) throw std::runtime_error("manifest: Gram size mismatch");
      spaces.push_back(WeightedSpace{dim, GramOperator::diagonal(std::move(d))});
    } else if (type == "spd") {
      spaces.push_back(WeightedSpace{dim, GramOperator::spd(read_matrix_market_file(file))});
    } else {
      throw std::runtime_error("manifest: unknown Gram type " + type);
    }
  }
  std::vector<SparseOperator> ops;
  std::vector<std::string> names;
  for (const auto& op : manifest.at("operators")) {
    ops.push_back(read_matrix_market_file((dir / op.at("file").get<std::string>()).string()));
    names.push_back(op.value("label", "A" + std::to_string(names.size())));
  }
  return HilbertComplex(std::move(spaces), std::move(ops), std::move(names));
}

Config parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  Config cfg;
  std::string line, section;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected key = value, got: " + line);
    cfg[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

GridSpec grid_spec_from_config(const Config& cfg) {
  auto it = cfg.find("instance");
  if (it == cfg.end()) throw std::runtime_error("config: missing [instance] section");
  const auto& sec = it->second;
  auto get = [&](const std::string& key) -> const std::string& {
    auto kit = sec.find(key);
    if (kit == sec.end()) throw std::runtime_error("config: missing key " + key);
    return kit->second;
  };
  GridSpec spec;
  spec.dimension = std::stoi(get("dimension"));
  {
    std::istringstream ss(get("cells"));
    std::size_t v, i = 0;
    while (ss >> v && i < 3) spec.cells[i++] = v;
    for (; i > 0 && i < 3; ++i) spec.cells[i] = spec.cells[0];
  }
  if (sec.count("spacing")) spec.spacing = std::stod(sec.at("spacing"));
  if (sec.count("gamma_t")) {
    std::istringstream ss(sec.at("gamma_t"));
    std::string face;
    while (ss >> face) {
      if (face == "none") continue;
      if (face == "all") {
        const char* axes = "xyz";
        for (int a = 0; a < spec.dimension; ++a) {
          spec.gamma_t.insert(std::string(1, axes[a]) + "-min");
          spec.gamma_t.insert(std::string(1, axes[a]) + "-max");
        }
      } else {
        spec.gamma_t.insert(face);
      }
    }
  }
  if (sec.count("epsilon")) {
    std::istringstream ss(sec.at("epsilon"));
    double v;
    while (ss >> v) spec.epsilon.push_back(v);
  }
  if (sec.count("epsilon_file"))
    spec.epsilon = read_vector_csv_file(sec.at("epsilon_file"));
  if (sec.count("hole")) {
    std::istringstream ss(sec.at("hole"));
    std::array<std::size_t, 6> h{0, 0, 0, 0, 0, 0};
    std::size_t v, i = 0;
    while (ss >> v && i < 6) h[i++] = v;
    if (i != static_cast<std::size_t>(2 * spec.dimension))
      throw std::runtime_error("config: hole needs 2*dimension integers");
    spec.hole = h;
  }
  return spec;
}

json to_json(const IterStats& s) {
  json j;
  j["iterations"] = s.iterations;
  j["final_residual"] = s.final_residual;
  j["converged"] = s.converged;
  if (!s.breakdown_reason.empty()) j["breakdown_reason"] = s.breakdown_reason;
  return j;
}

json to_json(const CompatibilityReport& r) {
  json j;
  j["dist_f"] = r.dist_f;
  j["dist_g"] = r.dist_g;
  j["dist_k"] = r.dist_k;
  j["rel_f"] = r.rel_f;
  j["rel_g"] = r.rel_g;
  j["rel_k"] = r.rel_k;
  j["pass"] = r.pass;
  return j;
}

json to_json(const SolveReport& r) {
  json j;
  j["backend"] = r.backend;
  j["level"] = r.x.level;
  j["residual_f"] = r.res_f;
  j["residual_g"] = r.res_g;
  j["residual_k"] = r.res_k;
  j["norm_identity_gap"] = r.norm_identity_gap;
  j["stats_f"] = to_json(r.stats_f);
  j["stats_g"] = to_json(r.stats_g);
  j["compatibility"] = to_json(r.compat);
  return j;
}

json to_json(const SecondOrderReport& r) {
  json j;
  j["first_order"] = to_json(r.first_order);
  j["residual_second_order"] = r.res_second;
  return j;
}

json to_json(const ConstantsReport& r) {
  json j;
  j["op_index"] = r.op_index;
  if (r.no_nonzero_singular_value) {
    j["c"] = "inf";
    j["c_star"] = "inf";
    j["no_nonzero_singular_value"] = true;
  } else {
    j["c"] = r.c;
    j["c_star"] = r.c_star;
  }
  j["rank_stable"] = r.rank_stable;
  j["method"] = r.method;
  j["tolerance"] = r.tolerance;
  j["deflated_dim"] = r.deflated_dim;
  return j;
}

json to_json(const ComponentBound& c) {
  json j;
  j["name"] = c.name;
  j["active"] = c.active;
  j["exact_zero"] = c.exact_zero;
  j["lower"] = c.lower;
  j["upper"] = c.upper;
  j["converged"] = c.converged;
  j["ok"] = c.ok;
  if (!c.error.empty()) j["error"] = c.error;
  json log = json::array();
  for (const auto& [t, f] : c.log) log.push_back({{"t", t}, {"F", f}});
  j["iterations"] = log;
  return j;
}

json to_json(const BoundReport& r) {
  json j;
  json comps = json::array();
  for (const auto& c : r.components) comps.push_back(to_json(c));
  j["components"] = comps;
  j["lower_total"] = r.lower_total;
  j["upper_total"] = r.upper_total;
  j["all_ok"] = r.all_ok;
  j["all_converged"] = r.all_converged;
  if (r.efficiency_index > 0.0) j["efficiency_index"] = r.efficiency_index;
  return j;
}

json to_json(const SecondOrderBoundReport& r) {
  json j;
  j["e"] = to_json(r.e_report);
  j["h"] = to_json(r.h_report);
  j["e_adj_composite_upper"] = r.e_adj_composite_upper;
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << "\n";
}

void write_trace_csv(const std::string& path,
                     const std::vector<std::pair<double, double>>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "n,t,F\n";
  out.precision(17);
  for (std::size_t i = 0; i < log.size(); ++i)
    out << i + 1 << "," << log[i].first << "," << log[i].second << "\n";
}

}  // namespace hilcert
