// biopsym: serve the simulator, or run the engine offline (phantoms, slices, scoring).

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "biopsym/api.hpp"
#include "biopsym/error.hpp"
#include "biopsym/json_io.hpp"
#include "biopsym/scenario.hpp"
#include "biopsym/server.hpp"

using namespace biopsym;

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
}

// A scenario file holds either one scenario or {"scenarios": [...]}.
Scenario pick_scenario(const std::filesystem::path& path, const std::string& id) {
  const json j = read_json_file(path);
  const json* chosen = nullptr;
  if (j.contains("scenarios")) {
    for (const auto& s : j.at("scenarios")) {
      if (id.empty() || s.value("id", "") == id) {
        chosen = &s;
        break;
      }
    }
    if (!chosen) throw Error(Errc::not_found, "no scenario " + id + " in " + path.string());
  } else {
    chosen = &j;
  }
  return scenario_from_json(*chosen, path.parent_path());
}

ProbePose parse_pose(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(Errc::invalid_argument, "pose must be \"depth,pitch,yaw,roll\" (mm, degrees)");
    }
  }
  if (v.size() != 4) throw Error(Errc::invalid_argument, "pose must be \"depth,pitch,yaw,roll\" (mm, degrees)");
  return ProbePose{v[0], deg_to_rad(v[1]), deg_to_rad(v[2]), deg_to_rad(v[3])};
}

int cmd_phantom(std::uint64_t seed, int size, const std::string& out, const std::string& mesh_out) {
  const PhantomSpec spec = PhantomSpec::standard(seed, size);
  save_volume(generate_phantom(spec), out);
  if (!mesh_out.empty()) save_obj(generate_ellipsoid_mesh(spec.prostate.center, spec.prostate.semi_axes, 3), mesh_out);
  std::cout << "wrote " << out << " (" << size << "^3, seed " << seed << ")\n";
  return 0;
}

int cmd_slice(const std::string& volume, const std::string& pose_text, const std::string& out,
              const std::string& scenario_file, const std::string& scenario_id, bool no_sector) {
  ProbeSpec probe;
  SliceConfig cfg;
  if (!scenario_file.empty()) {
    const Scenario s = pick_scenario(scenario_file, scenario_id);
    probe = s.probe;
    cfg = s.slice;
  }
  const ProbePose pose = parse_pose(pose_text);
  validate_pose(probe, pose);
  const UsVolume vol = load_volume(volume);
  SliceImage img = extract_slice(vol, image_plane_of(probe, pose, cfg.width_mm, cfg.height_mm, cfg.px_w, cfg.px_h));
  if (!no_sector) img = apply_sector_mask(std::move(img), cfg.sector());
  write_pgm(img, std::filesystem::path(out));
  std::cout << "wrote " << out << " (" << img.px_w << "x" << img.px_h << ")\n";
  return 0;
}

// Each samples line is a fired notch: {"p0": [x,y,z], "p1": [x,y,z]}, with
// optional "timestamp_ms" and "insertion_mm".
int cmd_score(const std::string& mesh_file, const std::string& samples_file, const std::string& scenario_file,
              const std::string& scenario_id, const std::string& out) {
  const Scenario s = pick_scenario(scenario_file, scenario_id);
  const ProstateModel prostate = ProstateModel::from_mesh(load_obj(mesh_file), s.prostate.axes);
  if (!is_closed_manifold(prostate.mesh)) throw Error(Errc::degenerate_geometry, "mesh is not closed: " + mesh_file);

  std::ifstream in(samples_file);
  if (!in) throw Error(Errc::io_failure, "cannot open " + samples_file);
  std::vector<BiopsySample> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    BiopsySample b;
    try {
      const json j = json::parse(line);
      b.segment = Segment{j.at("p0").get<Vec3>(), j.at("p1").get<Vec3>()};
      b.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
      b.insertion_mm = j.value("insertion_mm", 0.0);
    } catch (const std::exception& e) {
      throw Error(Errc::parse_error, samples_file + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const SegmentScore sc = score_segment(prostate, b.segment);
    b.order_index = static_cast<int>(samples.size());
    b.inside_mm = sc.inside.length_mm;
    b.zones = sc.zones;
    b.out_of_gland = sc.inside.length_mm <= 0.0;
    samples.push_back(b);
  }
  const ProtocolResult r = evaluate_protocol(samples, s.canonical_order, s.targets);
  const json report{{"scenario_id", s.id}, {"result", r}, {"score", grade_simulation(r)}};
  if (out.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::ofstream(out) << report.dump(2) << "\n";
  }
  return 0;
}

// Emits the client messages of a planned 12-core run, one JSON per line.
int cmd_script(const std::string& scenario_file, const std::string& scenario_id, bool reverse) {
  LoadedScenario s = load_scenario(pick_scenario(scenario_file, scenario_id));
  std::vector<ZoneId> order(s.def.canonical_order.begin(), s.def.canonical_order.end());
  if (reverse) std::reverse(order.begin(), order.end());
  for (const auto& step : plan_protocol_script(s, order)) {
    json pose = step.pose;
    pose["type"] = "pose";
    std::cout << pose.dump() << "\n";
    std::cout << json{{"type", "fire"}, {"insertion_mm", step.insertion_mm}}.dump() << "\n";
  }
  std::cout << json{{"type", "end"}}.dump() << "\n";
  return 0;
}

int cmd_serve(const std::string& address, int port, std::string data_dir, const std::string& scenarios_file,
              std::string exercises_file, bool no_sync) {
  if (data_dir.empty()) {
    const char* env = std::getenv("BIOPSYM_DATA_DIR");
    data_dir = env && *env ? env : "biopsym-data";
  }
  if (exercises_file.empty()) {
    const auto sibling = std::filesystem::path(scenarios_file).parent_path() / "exercises.json";
    if (std::filesystem::exists(sibling)) exercises_file = sibling.string();
  }
  // Block termination signals before any thread starts so sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  ScenarioCatalog scenarios = ScenarioCatalog::load(scenarios_file);
  ExerciseCatalog exercises = exercises_file.empty() ? ExerciseCatalog{} : load_exercise_catalog(exercises_file);
  std::shared_ptr<SessionStore> store = SessionStore::open(data_dir, !no_sync);
  auto api = std::make_shared<Api>(std::move(scenarios), std::move(exercises), store);

  Server server(api, address, static_cast<std::uint16_t>(port));
  server.start();
  std::cout << "biopsym " << kVersion << " listening on " << address << ":" << server.port() << " (data "
            << data_dir << ")" << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  std::cout << "shutting down" << std::endl;
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"biopsym: TRUS prostate biopsy training simulator"};
  app.require_subcommand(1);

  auto* serve = app.add_subcommand("serve", "Run the HTTP/WebSocket service");
  std::string address = "127.0.0.1", data_dir, scenarios_file, exercises_file;
  int port = 8080;
  bool no_sync = false;
  serve->add_option("--address", address, "Listen address");
  serve->add_option("--port", port, "Listen port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--data-dir", data_dir, "Record directory (default $BIOPSYM_DATA_DIR)");
  serve->add_option("--scenarios", scenarios_file, "Scenario catalog JSON")->required()->check(CLI::ExistingFile);
  serve->add_option("--exercises", exercises_file, "Exercise catalog JSON (default: exercises.json next to scenarios)")
      ->check(CLI::ExistingFile);
  serve->add_flag("--no-sync", no_sync, "Skip fdatasync after each record append");

  auto* phantom = app.add_subcommand("phantom", "Generate a seeded phantom volume");
  std::uint64_t seed = 1;
  int size = 128;
  std::string phantom_out, mesh_out;
  phantom->add_option("--seed", seed, "RNG seed")->required();
  phantom->add_option("--out", phantom_out, "Output USVOL1 file")->required();
  phantom->add_option("--size", size, "Grid size n (n^3 voxels)")->check(CLI::Range(2, 1024));
  phantom->add_option("--mesh-out", mesh_out, "Also write the gland mesh as OBJ");

  auto* slice = app.add_subcommand("slice", "Extract the probe image at a pose");
  std::string volume, pose, slice_out, slice_scenario, scenario_id;
  bool no_sector = false;
  slice->add_option("--volume", volume, "USVOL1 volume")->required()->check(CLI::ExistingFile);
  slice->add_option("--pose", pose, "\"depth,pitch,yaw,roll\" in mm and degrees")->required();
  slice->add_option("--out", slice_out, "Output PGM")->required();
  slice->add_option("--scenario", slice_scenario, "Scenario file for probe and slice settings")
      ->check(CLI::ExistingFile);
  slice->add_option("--scenario-id", scenario_id, "Scenario id inside a catalog file");
  slice->add_flag("--no-sector", no_sector, "Keep the full rectangle");

  auto* score = app.add_subcommand("score", "Score fired segments against a gland mesh");
  std::string mesh, samples, score_scenario, score_out;
  score->add_option("--mesh", mesh, "Gland mesh (OBJ)")->required()->check(CLI::ExistingFile);
  score->add_option("--samples", samples, "JSON lines of {p0, p1}")->required()->check(CLI::ExistingFile);
  score->add_option("--scenario", score_scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  score->add_option("--scenario-id", scenario_id, "Scenario id inside a catalog file");
  score->add_option("--out", score_out, "Report path (default stdout)");

  auto* script = app.add_subcommand("script", "Print a planned 12-core client script");
  std::string script_scenario;
  bool reverse = false;
  script->add_option("--scenario", script_scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  script->add_option("--scenario-id", scenario_id, "Scenario id inside a catalog file");
  script->add_flag("--reverse", reverse, "Fire the zones in reverse canonical order");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return cmd_serve(address, port, data_dir, scenarios_file, exercises_file, no_sync);
    if (*phantom) return cmd_phantom(seed, size, phantom_out, mesh_out);
    if (*slice) return cmd_slice(volume, pose, slice_out, slice_scenario, scenario_id, no_sector);
    if (*score) return cmd_score(mesh, samples, score_scenario, scenario_id, score_out);
    if (*script) return cmd_script(script_scenario, scenario_id, reverse);
  } catch (const Error& e) {
    std::cerr << "biopsym: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "biopsym: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
