#pragma once

#include <map>
#include <string>

#include "hilcert/estimator.hpp"
#include "hilcert/instances.hpp"

#include <nlohmann/json_fwd.hpp>

namespace hilcert {

// A complex on disk: a JSON manifest naming the space dimensions, Gram files
// (CSV for diagonal, Matrix Market for general SPD) and operator files
// (Matrix Market), all relative to the manifest's directory.
void save_complex(const HilbertComplex& cx, const std::string& dir,
                  const std::string& name);
HilbertComplex load_complex(const std::string& manifest_path);

// Flat key-value config with [section] headers; '#' starts a comment.
using Config = std::map<std::string, std::map<std::string, std::string>>;
Config parse_config(const std::string& path);
GridSpec grid_spec_from_config(const Config& cfg);

nlohmann::ordered_json to_json(const IterStats& s);
nlohmann::ordered_json to_json(const CompatibilityReport& r);
nlohmann::ordered_json to_json(const SolveReport& r);
nlohmann::ordered_json to_json(const SecondOrderReport& r);
nlohmann::ordered_json to_json(const ConstantsReport& r);
nlohmann::ordered_json to_json(const ComponentBound& c);
nlohmann::ordered_json to_json(const BoundReport& r);
nlohmann::ordered_json to_json(const SecondOrderBoundReport& r);

void write_json_file(const std::string& path, const nlohmann::ordered_json& j);

// Per-algorithm convergence trace, one "n,t,F" row per outer step.
void write_trace_csv(const std::string& path,
                     const std::vector<std::pair<double, double>>& log);

}  // namespace hilcert
