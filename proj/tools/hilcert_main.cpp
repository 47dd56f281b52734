#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "hilcert/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace hilcert;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_incompatible = 3;
constexpr int exit_solver = 4;
constexpr int exit_budget = 5;

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

Vec load_optional_csv(const std::string& path) {
  if (path.empty()) return {};
  return read_vector_csv_file(path);
}

int cmd_build(const std::string& config_path, const std::string& out_dir) {
  Config cfg = parse_config(config_path);
  auto inst = cfg.find("instance");
  if (inst == cfg.end()) throw std::runtime_error("config: missing [instance]");
  const std::string kind = inst->second.count("kind") ? inst->second.at("kind") : "grid3d";

  std::string name = kind;
  if (cfg.count("output") && cfg.at("output").count("name")) name = cfg.at("output").at("name");

  HilbertComplex cx = [&]() -> HilbertComplex {
    if (kind == "path") {
      const std::size_t n = std::stoul(inst->second.at("n"));
      const std::string d = inst->second.count("dirichlet") ? inst->second.at("dirichlet") : "both";
      PathDirichlet pd = d == "none"   ? PathDirichlet::None
                         : d == "left" ? PathDirichlet::Left
                                       : PathDirichlet::Both;
      return build_path(n, pd);
    }
    if (kind == "cycle") return build_cycle(std::stoul(inst->second.at("n")));
    GridSpec spec = grid_spec_from_config(cfg);
    if (kind == "grid2d") spec.dimension = 2;
    if (kind == "grid3d") spec.dimension = 3;
    return build_grid(spec);
  }();

  save_complex(cx, out_dir, name);

  if (cfg.count("scenario")) {
    const auto& sc = cfg.at("scenario");
    const std::size_t level = sc.count("level") ? std::stoul(sc.at("level")) : 1;
    const Recipe recipe =
        recipe_from_string(sc.count("recipe") ? sc.at("recipe") : "smooth-potential");
    const unsigned seed = sc.count("seed") ? static_cast<unsigned>(std::stoul(sc.at("seed"))) : 1;
    ManufacturedScenario scen = manufacture(cx, level, recipe, seed);
    write_vector_csv_file((fs::path(out_dir) / (name + "_x_exact.csv")).string(), scen.exact_x);
    if (!scen.f.empty())
      write_vector_csv_file((fs::path(out_dir) / (name + "_f.csv")).string(), scen.f);
    if (!scen.g.empty())
      write_vector_csv_file((fs::path(out_dir) / (name + "_g.csv")).string(), scen.g);
    write_vector_csv_file((fs::path(out_dir) / (name + "_k.csv")).string(), scen.k);
  }

  std::cout << "built " << name << ": " << cx.num_spaces() << " spaces, " << cx.num_ops()
            << " operators -> " << out_dir << "\n";
  return exit_ok;
}

int cmd_solve(const std::string& manifest, std::size_t level, const std::string& f_path,
              const std::string& g_path, const std::string& k_path,
              const std::string& backend, int order, double tol, unsigned seed,
              const std::string& out_path) {
  HilbertComplex cx = load_complex(manifest);
  Vec f = load_optional_csv(f_path);
  Vec g = load_optional_csv(g_path);
  Vec k = load_optional_csv(k_path);
  const SolveBackend be = backend == "saddle" ? SolveBackend::Saddle : SolveBackend::Variational;

  json j;
  j["command"] = "solve";
  j["manifest"] = fs::path(manifest).filename().string();
  j["seed"] = seed;
  try {
    if (order == 2) {
      SecondOrderReport rep = solve_second_order({&cx, level, f, g, k}, tol);
      j["report"] = to_json(rep);
      j["report"]["first_order"]["norm_x"] =
          cx.gram(level).norm(rep.first_order.x.data);
      if (!out_path.empty()) {
        write_vector_csv_file(out_path + ".x.csv", rep.first_order.x.data);
        write_vector_csv_file(out_path + ".y.csv", rep.y);
      }
    } else {
      SolveReport rep = solve_first_order({&cx, level, f, g, k}, be, tol);
      j["report"] = to_json(rep);
      j["report"]["norm_x"] = cx.gram(level).norm(rep.x.data);
      if (!out_path.empty()) write_vector_csv_file(out_path + ".x.csv", rep.x.data);
    }
  } catch (const IncompatibleData& e) {
    j["error"] = e.what();
    j["compatibility"] = to_json(e.report);
    j["timestamp"] = timestamp();
    if (!out_path.empty()) write_json_file(out_path, j);
    std::cout << j.dump(2) << "\n";
    return exit_incompatible;
  } catch (const IterationFailure& e) {
    j["error"] = e.what();
    j["timestamp"] = timestamp();
    if (!out_path.empty()) write_json_file(out_path, j);
    std::cout << j.dump(2) << "\n";
    return exit_solver;
  }
  j["timestamp"] = timestamp();
  if (!out_path.empty()) write_json_file(out_path, j);
  std::cout << j.dump(2) << "\n";
  return exit_ok;
}

int cmd_constants(const std::string& manifest, const std::string& out_path) {
  HilbertComplex cx = load_complex(manifest);
  json j;
  j["command"] = "constants";
  j["manifest"] = fs::path(manifest).filename().string();
  json arr = json::array();
  for (std::size_t l = 0; l < cx.num_ops(); ++l) {
    const ConstantsReport& rep = cx.constants(l);
    json cj = to_json(rep);
    cj["label"] = cx.name(l);
    if (!rep.no_nonzero_singular_value)
      cj["symmetry_gap"] = std::abs(rep.c - rep.c_star) / rep.c;
    arr.push_back(cj);
  }
  j["constants"] = arr;
  j["timestamp"] = timestamp();
  if (!out_path.empty()) write_json_file(out_path, j);
  std::cout << j.dump(2) << "\n";
  return exit_ok;
}

int cmd_estimate(const std::string& manifest, std::size_t level, const std::string& x_path,
                 const std::string& y_path, const std::string& f_path,
                 const std::string& g_path, const std::string& k_path, int order,
                 std::size_t budget, double tol, unsigned seed, const std::string& out_dir) {
  HilbertComplex cx = load_complex(manifest);
  Vec xt = load_optional_csv(x_path);
  Vec f = load_optional_csv(f_path);
  Vec g = load_optional_csv(g_path);
  Vec k = load_optional_csv(k_path);

  json j;
  j["command"] = "estimate";
  j["manifest"] = fs::path(manifest).filename().string();
  j["seed"] = seed;
  j["budget"] = budget;

  bool unconverged = false;
  try {
    if (order == 2) {
      Vec yt = load_optional_csv(y_path);
      SecondOrderBoundReport rep =
          second_order_estimate(cx, level, xt, yt, f, g, k, budget, tol);
      j["report"] = to_json(rep);
      unconverged = !rep.e_report.all_converged || !rep.h_report.all_converged;
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        for (const auto& c : rep.e_report.components)
          if (!c.log.empty())
            write_trace_csv((fs::path(out_dir) / ("trace_e_" + c.name + ".csv")).string(), c.log);
        for (const auto& c : rep.h_report.components)
          if (!c.log.empty())
            write_trace_csv((fs::path(out_dir) / ("trace_h_" + c.name + ".csv")).string(), c.log);
      }
    } else {
      BoundReport rep = two_sided_estimate(cx, level, xt, f, g, k, budget, tol);
      j["report"] = to_json(rep);
      unconverged = !rep.all_converged;
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        for (const auto& c : rep.components)
          if (!c.log.empty())
            write_trace_csv((fs::path(out_dir) / ("trace_" + c.name + ".csv")).string(), c.log);
      }
    }
  } catch (const IterationFailure& e) {
    j["error"] = e.what();
    j["timestamp"] = timestamp();
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      write_json_file((fs::path(out_dir) / "estimate.json").string(), j);
    }
    std::cout << j.dump(2) << "\n";
    return exit_solver;
  }
  j["timestamp"] = timestamp();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_json_file((fs::path(out_dir) / "estimate.json").string(), j);
  }
  std::cout << j.dump(2) << "\n";
  return unconverged ? exit_budget : exit_ok;
}

int cmd_decompose(const std::string& manifest, std::size_t level, const std::string& x_path,
                  double tol, const std::string& out_path) {
  HilbertComplex cx = load_complex(manifest);
  Vec x = read_vector_csv_file(x_path);
  HelmholtzParts parts = helmholtz_decompose(cx, level, x, tol);
  const GramOperator& m = cx.gram(level);
  json j;
  j["command"] = "decompose";
  j["level"] = level;
  j["norm_prev"] = m.norm(parts.prev);
  j["norm_kernel"] = m.norm(parts.kernel);
  j["norm_adj"] = m.norm(parts.adj);
  j["ortho_gap"] = parts.ortho_gap;
  j["pythagoras_gap"] = parts.pythagoras_gap;
  j["timestamp"] = timestamp();
  if (!out_path.empty()) {
    write_json_file(out_path, j);
    write_vector_csv_file(out_path + ".prev.csv", parts.prev);
    write_vector_csv_file(out_path + ".kernel.csv", parts.kernel);
    write_vector_csv_file(out_path + ".adj.csv", parts.adj);
  }
  std::cout << j.dump(2) << "\n";
  return exit_ok;
}

int cmd_report(const std::string& run_dir, const std::string& out_path) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(run_dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::ostringstream csv;
  csv.precision(17);
  csv << "run,command,status,value1,value2\n";
  for (const auto& file : files) {
    std::ifstream in(file);
    json j;
    try {
      j = json::parse(in);
    } catch (...) {
      csv << file.filename().string() << ",unreadable,warning,,\n";
      continue;
    }
    const std::string cmd = j.value("command", "unknown");
    if (j.contains("error")) {
      csv << file.filename().string() << "," << cmd << ",error,,\n";
      continue;
    }
    if (cmd == "solve" && j.contains("report")) {
      const auto& r = j["report"].contains("first_order") ? j["report"]["first_order"] : j["report"];
      csv << file.filename().string() << ",solve,ok," << r.value("residual_f", 0.0) << ","
          << r.value("residual_g", 0.0) << "\n";
    } else if (cmd == "estimate" && j.contains("report")) {
      const auto& r = j["report"].contains("e") ? j["report"]["e"] : j["report"];
      csv << file.filename().string() << ",estimate,ok," << r.value("lower_total", 0.0) << ","
          << r.value("upper_total", 0.0) << "\n";
    } else if (cmd == "constants") {
      double c0 = 0.0;
      if (j.contains("constants") && !j["constants"].empty() && j["constants"][0]["c"].is_number())
        c0 = j["constants"][0]["c"].get<double>();
      csv << file.filename().string() << ",constants,ok," << c0 << ",\n";
    } else {
      csv << file.filename().string() << "," << cmd << ",ok,,\n";
    }
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << csv.str();
  }
  std::cout << csv.str();
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"solver and guaranteed error estimator for discrete Hilbert complexes"};
  app.require_subcommand(1);

  std::string config_path, out, manifest, x_path, y_path, f_path, g_path, k_path;
  std::string backend = "variational", run_dir;
  std::size_t level = 1, budget = 20;
  int order = 1;
  double tol = 1e-10;
  unsigned seed = 1;

  auto* build = app.add_subcommand("build", "build an instance from a config file");
  build->add_option("config", config_path, "config file")->required();
  build->add_option("--out", out, "output directory")->required();

  auto* solve = app.add_subcommand("solve", "solve the first- or second-order system");
  solve->add_option("--manifest", manifest)->required();
  solve->add_option("--level", level);
  solve->add_option("--f", f_path);
  solve->add_option("--g", g_path);
  solve->add_option("--k", k_path);
  solve->add_option("--backend", backend)->check(CLI::IsMember({"variational", "saddle"}));
  solve->add_option("--order", order)->check(CLI::IsMember({1, 2}));
  solve->add_option("--tol", tol);
  solve->add_option("--seed", seed);
  solve->add_option("--out", out, "report path (JSON)");

  auto* constants = app.add_subcommand("constants", "Friedrichs/Poincare constants per operator");
  constants->add_option("--manifest", manifest)->required();
  constants->add_option("--out", out);

  auto* estimate = app.add_subcommand("estimate", "two-sided error bounds for an approximation");
  estimate->add_option("--manifest", manifest)->required();
  estimate->add_option("--level", level);
  estimate->add_option("--x-approx", x_path)->required();
  estimate->add_option("--y-approx", y_path);
  estimate->add_option("--f", f_path);
  estimate->add_option("--g", g_path);
  estimate->add_option("--k", k_path);
  estimate->add_option("--order", order)->check(CLI::IsMember({1, 2}));
  estimate->add_option("--budget", budget);
  estimate->add_option("--tol", tol);
  estimate->add_option("--seed", seed);
  estimate->add_option("--out", out, "output directory");

  auto* decompose = app.add_subcommand("decompose", "orthogonal three-part decomposition of a field");
  decompose->add_option("--manifest", manifest)->required();
  decompose->add_option("--level", level);
  decompose->add_option("--x-approx", x_path)->required();
  decompose->add_option("--tol", tol);
  decompose->add_option("--out", out);

  auto* report = app.add_subcommand("report", "aggregate run reports into a CSV table");
  report->add_option("dir", run_dir, "run directory")->required();
  report->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  try {
    if (build->parsed()) return cmd_build(config_path, out);
    if (solve->parsed())
      return cmd_solve(manifest, level, f_path, g_path, k_path, backend, order, tol, seed, out);
    if (constants->parsed()) return cmd_constants(manifest, out);
    if (estimate->parsed())
      return cmd_estimate(manifest, level, x_path, y_path, f_path, g_path, k_path, order,
                          budget, tol, seed, out);
    if (decompose->parsed()) return cmd_decompose(manifest, level, x_path, tol, out);
    if (report->parsed()) return cmd_report(run_dir, out);
  } catch (const IncompatibleData& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_incompatible;
  } catch (const IterationFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_solver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  }
  return exit_config;
}
