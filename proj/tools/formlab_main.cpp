#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "formlab/scenario.hpp"

namespace {

namespace fs = std::filesystem;

/// Writes text to out_dir/filename, creating the directory if needed.
void write_file(const std::string& out_dir, const std::string& filename,
                const std::string& text) {
  fs::path dir = out_dir.empty() ? fs::path{"."} : fs::path{out_dir};
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw formlab::io_error("cannot create output directory '" + dir.string() + "'");
  fs::path target = dir / filename;
  std::ofstream out(target, std::ios::binary);
  if (!out) throw formlab::io_error("cannot open '" + target.string() + "' for writing");
  out << text;
  if (!out) throw formlab::io_error("write failure on '" + target.string() + "'");
}

std::string record_name(const formlab::Scenario& sc) {
  if (!sc.output.empty()) return sc.output;
  std::string stem = sc.name.empty() ? "scenario" : sc.name;
  for (char& c : stem)
    if (c == ' ' || c == '/') c = '_';
  return stem + "_record.json";
}

/// Plot-ready per-ball tables for any diagnose payload that carries one.
void write_scan_tables(const formlab::RunRecord& rec, const std::string& out_dir,
                       const std::string& stem) {
  for (std::size_t k = 0; k < rec.operations.size(); ++k) {
    const auto& entry = rec.operations[k];
    if (!entry.payload.is_object() || !entry.payload.contains("scan_table")) continue;
    std::string csv = "stat,center,radius,value\n";
    for (const auto& row : entry.payload["scan_table"]) {
      char line[160];
      std::snprintf(line, sizeof line, "%s,%.12g,%.12g,%.12g\n",
                    row["stat"].get<std::string>().c_str(), row["center"].get<double>(),
                    row["radius"].get<double>(), row["value"].get<double>());
      csv += line;
    }
    write_file(out_dir, stem + "_" + std::to_string(k + 1) + "_scan.csv", csv);
  }
}

int run_command(const std::string& config, const std::string& out_dir) {
  formlab::Scenario sc = formlab::Scenario::load(config);
  formlab::RunRecord rec = formlab::run_scenario(sc);

  std::string name = record_name(sc);
  write_file(out_dir, name, rec.to_json().dump(2) + "\n");
  std::string stem = name.substr(0, name.find_last_of('.'));
  write_scan_tables(rec, out_dir, stem);

  for (const auto& e : rec.operations)
    std::cout << e.op << ": " << e.verdict << " (" << e.wall_ms << " ms)\n";
  std::cout << "record: " << (out_dir.empty() ? "." : out_dir) << "/" << name << "\n";
  return rec.any_fail() ? 1 : 0;
}

int study_command(const std::string& config, int refinements, const std::string& out_dir) {
  formlab::Scenario sc = formlab::Scenario::load(config);
  formlab::StudyResult res = formlab::convergence_study(sc, refinements);

  std::string name = (sc.name.empty() ? "scenario" : sc.name) + "_study.csv";
  for (char& c : name)
    if (c == ' ' || c == '/') c = '_';
  write_file(out_dir, name, res.csv());
  std::cout << res.csv();
  if (res.failed) {
    std::cerr << "study failed after " << res.rows.size() << " level(s): " << res.error
              << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"formlab: form-bounded potential laboratory"};
  app.require_subcommand(1);

  std::string config, out_dir;
  int refinements = 3;

  auto* run = app.add_subcommand("run", "execute a scenario config");
  run->add_option("config", config, "scenario file (.toml or .json)")->required();
  run->add_option("--out", out_dir, "output directory");

  auto* study = app.add_subcommand("study", "convergence study over mesh refinements");
  study->add_option("config", config, "scenario file (.toml or .json)")->required();
  study->add_option("--refinements", refinements, "number of mesh levels (>= 2)");
  study->add_option("--out", out_dir, "output directory");

  auto* cat = app.add_subcommand("catalog", "list the example catalog");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (cat->parsed()) {
      std::cout << formlab::catalog_listing();
      return 0;
    }
    if (run->parsed()) return run_command(config, out_dir);
    return study_command(config, refinements, out_dir);
  } catch (const formlab::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const formlab::io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
