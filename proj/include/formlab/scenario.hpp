#pragma once

#include "formlab/solver.hpp"

namespace formlab {

/// Malformed or inconsistent configuration; the cli maps this to exit code 2.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Filesystem trouble (unreadable config, unwritable output); exit code 3.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OpSpec {
  std::string op;          // formbound | solve | riccati | diagnose | gauge | sweep
  nlohmann::json params;   // op-local knobs; may be empty
  nlohmann::json expect;   // scalar expectations: key -> value, key_tol -> tolerance
};

/// A declarative experiment: one potential (catalog reference or inline),
/// mesh and exhaustion settings, and an ordered operation list.
struct Scenario {
  std::string name;
  ExampleSpec example;

  double mesh_a = 0.0, mesh_b = 0.0;  // 0 = take the example's domain
  int elements = 2000;
  double grading = 1.0;  // > 1 grades toward the inner endpoint

  int exhaustion_levels = 5;
  int elements_per_level = 1000;

  double default_tol = 1e-2;
  std::string output;  // record filename; defaults to <name>_record.json

  std::vector<OpSpec> ops;

  double domain_a() const { return mesh_a != 0.0 || mesh_b != 0.0 ? mesh_a : example.domain_a; }
  double domain_b() const { return mesh_a != 0.0 || mesh_b != 0.0 ? mesh_b : example.domain_b; }
  Mesh build_mesh(int refinement = 0) const;

  static Scenario from_json(const nlohmann::json& j);
  /// Reads .toml or .json by extension. Throws io_error when the file cannot
  /// be read, config_error when it cannot be understood.
  static Scenario load(const std::string& path);
};

struct RunRecord {
  std::string scenario;
  std::string version;
  struct Entry {
    std::string op;
    nlohmann::json payload;
    std::string verdict;  // pass | fail | skipped
    double wall_ms = 0.0;
  };
  std::vector<Entry> operations;

  bool any_fail() const;
  /// Timings are the one nondeterministic part; leaving them out yields a
  /// byte-identical document for identical configs.
  nlohmann::json to_json(bool include_timings = true) const;
};

RunRecord run_scenario(const Scenario& sc);

/// Reruns the scenario on meshes h, h/2, ..., tracking one scalar per
/// operation and its Richardson order. Rows accumulated so far survive a
/// failing level.
struct StudyResult {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  bool failed = false;
  std::string error;

  std::string csv() const;
};

StudyResult convergence_study(const Scenario& sc, int refinements);

/// Human-readable catalog dump: every example with parameters and closed
/// forms.
std::string catalog_listing();

}  // namespace formlab
