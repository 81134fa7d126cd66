#include "endoscan/runner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

using namespace endoscan;

namespace {

struct Common {
  std::string config;
  std::string out = "out";
  std::string mode;
  std::uint64_t seed = 0;
};

ScenarioConfig load_with_overrides(const Common &c, CLI::App *sub) {
  ScenarioConfig cfg = load_scenario(c.config);
  if (sub->count("--seed")) {
    cfg.seed = c.seed;
  }
  if (!c.mode.empty()) {
    cfg.mode = servo_mode_from_string(c.mode);
  }
  return cfg;
}

void add_common(CLI::App *sub, Common &c, bool with_mode) {
  sub->add_option("config", c.config, "scenario JSON")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "override the scenario seed");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  if (with_mode) {
    sub->add_option("--mode", c.mode, "servo mode")->check(CLI::IsMember({"open", "closed"}));
  }
}

void write_json_file(const std::filesystem::path &p, const nlohmann::json &j) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  out << j.dump(2) << '\n';
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"endoscan: simulated robotic endomicroscopy scanner"};
  app.require_subcommand(1);

  Common scan_opts;
  auto *scan = app.add_subcommand("scan", "run a scenario's scan plan");
  add_common(scan, scan_opts, true);

  Common cal_opts;
  bool drag = false;
  auto *cal = app.add_subcommand("calibrate", "measure the image-to-actuator angle, or the tissue drag");
  add_common(cal, cal_opts, false);
  cal->add_flag("--drag", drag, "fit the drag coefficient to the open/closed diameter ratio instead");

  Common abl_opts;
  auto *abl = app.add_subcommand("ablate", "scan, retarget, fire and rescan");
  add_common(abl, abl_opts, true);

  Common sweep_opts;
  auto *sweep = app.add_subcommand("sweep", "workspace repeatability sweep");
  add_common(sweep, sweep_opts, false);

  std::string corpus_dir;
  std::size_t generate = 0;
  int frame_px = 256;
  std::uint64_t bench_seed = 1;
  std::string bench_out = "out";
  auto *bench = app.add_subcommand("bench", "registration throughput over a corpus of frame pairs");
  bench->add_option("corpus-dir", corpus_dir, "directory of pair_NNNNN_a.pgm / _b.pgm files")->required();
  bench->add_option("--generate", generate, "write this many synthetic pairs into the corpus first");
  bench->add_option("--frame-px", frame_px, "frame size for generated pairs")->capture_default_str();
  bench->add_option("--seed", bench_seed, "seed for generated pairs");
  bench->add_option("--out", bench_out, "output directory")->capture_default_str();

  std::string render_in;
  std::string render_out = "out";
  std::uint64_t render_seed = 0;
  auto *render = app.add_subcommand("render", "write the phantom as scene.pgm plus header");
  render->add_option("scene", render_in, "scene header or scenario JSON")->required()->check(CLI::ExistingFile);
  render->add_option("--out", render_out, "output directory")->capture_default_str();
  render->add_option("--seed", render_seed, "override the scenario seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*scan) {
      const ScenarioConfig cfg = load_with_overrides(scan_opts, scan);
      const ScanRun run = run_scan(cfg, scan_opts.out);
      std::cout << metrics_json(run.metrics).dump(2) << '\n';
    } else if (*cal) {
      const ScenarioConfig cfg = load_with_overrides(cal_opts, cal);
      if (drag) {
        const DragCalibration d = calibrate_drag(cfg);
        const nlohmann::json j{{"drag_coefficient", d.drag_coefficient},
                               {"ratio", d.ratio},
                               {"open_diameter_mm", d.open_diameter_mm},
                               {"closed_diameter_mm", d.closed_diameter_mm},
                               {"iterations", d.iterations}};
        write_json_file(std::filesystem::path(cal_opts.out) / "drag_calibration.json", j);
        std::cout << j.dump(2) << '\n';
      } else {
        const PhiCalibrationResult r = run_phi_calibration(cfg);
        const nlohmann::json j{{"phi_deg", rad_to_deg(r.calibration.phi_rad)},
                               {"L_v_per_px", r.calibration.L_v_per_px},
                               {"iterations", r.iterations},
                               {"track_angles_deg", r.track_angles_deg}};
        write_json_file(std::filesystem::path(cal_opts.out) / "calibration.json", j);
        std::cout << j.dump(2) << '\n';
      }
    } else if (*abl) {
      const ScenarioConfig cfg = load_with_overrides(abl_opts, abl);
      const AblationReport r = run_ablation(cfg, abl_opts.out);
      std::cout << ablation_json(r).dump(2) << '\n';
    } else if (*sweep) {
      const ScenarioConfig cfg = load_with_overrides(sweep_opts, sweep);
      const nlohmann::json j = sweep_json(workspace_sweep(cfg));
      write_json_file(std::filesystem::path(sweep_opts.out) / "metrics.json", j);
      std::cout << j.dump(2) << '\n';
    } else if (*bench) {
      if (generate > 0) {
        write_corpus(corpus_dir, generate_corpus(generate, frame_px, bench_seed));
      }
      const BenchResult b = bench_registration(load_corpus(corpus_dir));
      write_json_file(std::filesystem::path(bench_out) / "bench.json", bench_json(b));
      std::cout << bench_json(b).dump(2) << '\n';
    } else if (*render) {
      std::ifstream in(render_in);
      const auto j = nlohmann::json::parse(in);
      Scene scene;
      if (j.value("format", "") == "endoscan-scene") {
        scene = load_scene(render_in);
      } else {
        ScenarioConfig cfg = parse_scenario(j);
        if (render->count("--seed")) {
          cfg.seed = render_seed;
        }
        scene = build_scene(cfg);
      }
      const std::filesystem::path out(render_out);
      std::filesystem::create_directories(out);
      save_scene(scene, out / "scene.pgm", out / "scene.json");
      std::cout << "wrote " << (out / "scene.pgm").string() << '\n';
    }
  } catch (const ConfigError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ServoAbort &e) {
    std::cerr << "aborted at frame " << e.frame() << ": " << e.what() << '\n';
    return 3;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
