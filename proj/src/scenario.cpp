#include "endoscan/scenario.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace endoscan {

using nlohmann::json;

namespace {

using Errors = std::vector<std::string>;

// One JSON object being read. Keys that are read are remembered so that the
// rest can be reported as unknown.
class Section {
public:
  Section(const json *obj, std::string path, Errors &errs) : obj_(obj), path_(std::move(path)), errs_(errs) {
    if (obj_ && !obj_->is_object()) {
      errs_.push_back(path_ + ": expected an object");
      obj_ = nullptr;
    }
  }

  Section sub(const char *key) {
    used_.insert(key);
    const json *child = (obj_ && obj_->contains(key)) ? &obj_->at(key) : nullptr;
    return Section(child, join(key), errs_);
  }

  void get(const char *key, double &out) {
    if (const json *v = find(key)) {
      if (v->is_number()) {
        out = v->get<double>();
      } else {
        errs_.push_back(join(key) + ": expected a number");
      }
    }
  }
  void get(const char *key, int &out) {
    if (const json *v = find(key)) {
      if (v->is_number_integer()) {
        out = v->get<int>();
      } else {
        errs_.push_back(join(key) + ": expected an integer");
      }
    }
  }
  void get(const char *key, std::uint64_t &out) {
    if (const json *v = find(key)) {
      if (v->is_number_integer() && v->get<std::int64_t>() >= 0) {
        out = v->get<std::uint64_t>();
      } else {
        errs_.push_back(join(key) + ": expected a non-negative integer");
      }
    }
  }
  void get(const char *key, bool &out) {
    if (const json *v = find(key)) {
      if (v->is_boolean()) {
        out = v->get<bool>();
      } else {
        errs_.push_back(join(key) + ": expected true or false");
      }
    }
  }
  void get(const char *key, std::string &out) {
    if (const json *v = find(key)) {
      if (v->is_string()) {
        out = v->get<std::string>();
      } else {
        errs_.push_back(join(key) + ": expected a string");
      }
    }
  }
  void get(const char *key, Vec2 &out) {
    if (const json *v = find(key)) {
      if (v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number()) {
        out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
      } else {
        errs_.push_back(join(key) + ": expected [x, y]");
      }
    }
  }
  template <typename E> void get_enum(const char *key, E &out, const std::map<std::string, E> &names) {
    std::string s;
    if (!find(key)) {
      return;
    }
    get(key, s);
    const auto it = names.find(s);
    if (it != names.end()) {
      out = it->second;
      return;
    }
    std::string allowed;
    for (const auto &[n, _] : names) {
      allowed += (allowed.empty() ? "" : ", ") + n;
    }
    errs_.push_back(join(key) + ": '" + s + "' is not one of " + allowed);
  }

  void finish() {
    if (!obj_) {
      return;
    }
    for (const auto &[k, _] : obj_->items()) {
      if (!used_.count(k)) {
        errs_.push_back(join(k.c_str()) + ": unknown key");
      }
    }
  }

private:
  const json *find(const char *key) {
    used_.insert(key);
    return (obj_ && obj_->contains(key)) ? &obj_->at(key) : nullptr;
  }
  std::string join(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

  const json *obj_;
  std::string path_;
  Errors &errs_;
  std::set<std::string> used_;
};

const std::map<std::string, PlanKind> kPlanKinds{
    {"linear", PlanKind::Linear}, {"raster", PlanKind::Raster}, {"spiral", PlanKind::Spiral}};
const std::map<std::string, PhantomKind> kPhantomKinds{
    {"grid", PhantomKind::Grid}, {"texture", PhantomKind::Texture}, {"uniform", PhantomKind::Uniform}};
const std::map<std::string, ServoMode> kModes{{"open", ServoMode::Open}, {"closed", ServoMode::Closed}};
const std::map<std::string, CalibrationSource> kCalSources{{"config", CalibrationSource::Config},
                                                           {"run", CalibrationSource::Run}};

template <typename E> std::string name_of(E v, const std::map<std::string, E> &names) {
  for (const auto &[n, e] : names) {
    if (e == v) {
      return n;
    }
  }
  return "?";
}

void check(Errors &errs, const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    errs.emplace_back(e.what());
  }
}

} // namespace

ScenarioConfig parse_scenario(const json &j) {
  Errors errs;
  ScenarioConfig c;
  Section root(&j, "", errs);

  int version = -1;
  root.get("schema_version", version);
  if (version != kScenarioSchemaVersion) {
    errs.push_back("schema_version: expected " + std::to_string(kScenarioSchemaVersion));
  }
  root.get("name", c.name);
  root.get("seed", c.seed);
  root.get_enum("mode", c.mode, kModes);

  {
    auto s = root.sub("scanner");
    s.get("shaft_length_mm", c.scanner.shaft_length_mm);
    s.get("outer_diameter_mm", c.scanner.outer_diameter_mm);
    s.get("inner_diameter_mm", c.scanner.inner_diameter_mm);
    s.get("elastic_modulus_gpa", c.scanner.elastic_modulus_gpa);
    s.get("cam_position_mm", c.scanner.cam_position_mm);
    s.get("volts_to_degrees", c.scanner.volts_to_degrees);
    s.get("volts_to_tip_um_per_v", c.scanner.volts_to_tip_um_per_v);
    s.get("drive_limit_v", c.scanner.drive_limit_v);
    s.get("workspace_half_width_mm", c.workspace.half_width_mm);
    Vec2 centre = c.workspace.centre.as_vec();
    s.get("workspace_centre_mm", centre);
    c.workspace.centre = TipPose::from_vec(centre);
    s.finish();
  }
  {
    auto s = root.sub("probe");
    s.get("fov_diameter_um", c.probe.fov_diameter_um);
    s.get("resolution_um", c.probe.resolution_um);
    s.get("core_spacing_um", c.probe.core_spacing_um);
    s.get("core_count", c.probe.core_count);
    s.get("frame_rate_hz", c.probe.frame_rate_hz);
    s.get("frame_px", c.probe.frame_px);
    s.get("rotation_deg", c.probe.rotation_deg);
    s.get("noise_sigma", c.probe.noise_sigma);
    s.get("gaussian_sigma_px", c.gaussian_sigma_px);
    s.finish();
  }
  {
    auto s = root.sub("plan");
    s.get_enum("kind", c.plan.kind, kPlanKinds);
    s.get("point_frequency_hz", c.plan.params.point_frequency_hz);
    s.get("speed_mm_per_s", c.plan.params.speed_mm_per_s);
    s.get("length_mm", c.plan.params.length_mm);
    s.get("spiral_pitch_mm", c.plan.params.spiral_pitch_mm);
    s.get("max_radius_mm", c.plan.params.max_radius_mm);
    s.get("centre_mm", c.plan.params.centre_mm);
    s.get("rows", c.plan.rows);
    s.get("row_spacing_mm", c.plan.row_spacing_mm);
    s.finish();
  }
  {
    auto s = root.sub("phantom");
    s.get_enum("kind", c.phantom.kind, kPhantomKinds);
    s.get("extent_mm", c.phantom.extent_mm);
    s.get("resolution_um_per_px", c.phantom.resolution_um_per_px);
    s.get("line_thickness_um", c.phantom.grid.line_thickness_um);
    s.get("square_width_um", c.phantom.grid.square_width_um);
    s.get("feature_scale_um", c.phantom.feature_scale_um);
    s.get("intensity", c.phantom.intensity);
    s.finish();
  }
  {
    auto s = root.sub("disturbance");
    s.get("amplitude_um", c.disturbance.amplitude_um);
    s.get("speed_mm_per_s", c.disturbance.speed_mm_per_s);
    s.finish();
  }
  {
    auto s = root.sub("deformation");
    s.get("drag_coefficient", c.deformation.drag_coefficient);
    s.get("recovery_time_s", c.deformation.recovery_time_s);
    s.finish();
  }
  {
    auto s = root.sub("servo");
    s.get("kp_per_min", c.servo.gains.kp_per_min);
    s.get("ki_per_min2", c.servo.gains.ki_per_min2);
    s.get("windup_limit_v_min", c.servo.gains.windup_limit_v_min);
    s.get("latency_ticks", c.servo.latency_ticks);
    s.get("max_consecutive_failures", c.servo.max_consecutive_failures);
    s.get_enum("calibration", c.servo.calibration, kCalSources);
    s.get("phi_deg", c.servo.phi_deg);
    s.finish();
  }
  {
    auto s = root.sub("mosaic");
    s.get("working_diameter_px", c.mosaic.registration.working_diameter_px);
    s.get("template_px", c.mosaic.registration.template_px);
    s.get("canvas_px", c.mosaic.canvas_px);
    s.get("auto_grow", c.mosaic.auto_grow);
    s.finish();
  }
  {
    auto s = root.sub("ablation");
    s.get("lateral_offset_um", c.ablation.lateral_offset_um);
    s.get("power_w", c.ablation.power_w);
    s.get("duration_ms", c.ablation.duration_ms);
    s.get("mark_diameter_um", c.ablation.mark_diameter_um);
    s.get("thermal_spread_um", c.ablation.thermal_spread_um);
    s.finish();
  }
  {
    auto s = root.sub("sweep");
    s.get("grid_n", c.sweep.grid_n);
    s.get("actuation_noise_um", c.sweep.actuation_noise_um);
    s.finish();
  }
  root.finish();

  // Fields that failed to parse keep their defaults, so range checks still run.
  {
    check(errs, [&] { c.scanner.validate(); });
    if (!(c.workspace.half_width_mm > 0.0)) {
      errs.emplace_back("scanner.workspace_half_width_mm: must be positive");
    }
    check(errs, [&] { c.probe.validate(); });
    if (!(c.gaussian_sigma_px > 0.0)) {
      errs.emplace_back("probe.gaussian_sigma_px: must be positive");
    }
    check(errs, [&] { c.plan.params.validate(c.workspace); });
    if (c.plan.kind == PlanKind::Raster && c.plan.rows < 1) {
      errs.emplace_back("plan.rows: must be at least 1");
    }
    if (!(c.phantom.extent_mm > 0.0) || !(c.phantom.resolution_um_per_px > 0.0)) {
      errs.emplace_back("phantom: extent and resolution must be positive");
    }
    if (c.phantom.kind == PhantomKind::Grid) {
      check(errs, [&] { c.phantom.grid.validate(); });
    }
    if (c.phantom.kind == PhantomKind::Texture && !(c.phantom.feature_scale_um >= 3.0 * c.probe.core_spacing_um)) {
      errs.emplace_back("phantom.feature_scale_um: must be at least 3x the core spacing");
    }
    if (!(c.disturbance.amplitude_um >= 0.0) || !(c.disturbance.speed_mm_per_s >= 0.0)) {
      errs.emplace_back("disturbance: amplitude and speed must be non-negative");
    }
    check(errs, [&] { DeformationModel(c.deformation.drag_coefficient, c.deformation.recovery_time_s); });
    check(errs, [&] { c.servo.gains.validate(); });
    if (c.servo.latency_ticks < 0 || c.servo.latency_ticks > 1) {
      errs.emplace_back("servo.latency_ticks: must be 0 or 1");
    }
    if (c.servo.max_consecutive_failures < 0) {
      errs.emplace_back("servo.max_consecutive_failures: must be non-negative");
    }
    check(errs, [&] { c.mosaic.registration.validate(); });
    if (c.mosaic.canvas_px < c.mosaic.registration.working_diameter_px) {
      errs.emplace_back("mosaic.canvas_px: must be at least the working diameter");
    }
    check(errs, [&] { c.ablation.validate(); });
    if (c.sweep.grid_n < 2 || !(c.sweep.actuation_noise_um >= 0.0)) {
      errs.emplace_back("sweep: grid_n must be at least 2 and noise non-negative");
    }
  }

  if (!errs.empty()) {
    std::ostringstream msg;
    msg << "invalid scenario (" << errs.size() << " problem" << (errs.size() == 1 ? "" : "s") << "):";
    for (const auto &e : errs) {
      msg << "\n  " << e;
    }
    throw ConfigError(msg.str());
  }
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open scenario " + path.string());
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_scenario(j);
}

json scenario_to_json(const ScenarioConfig &c) {
  json j;
  j["schema_version"] = kScenarioSchemaVersion;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["mode"] = name_of(c.mode, kModes);
  j["scanner"] = {{"shaft_length_mm", c.scanner.shaft_length_mm},
                  {"outer_diameter_mm", c.scanner.outer_diameter_mm},
                  {"inner_diameter_mm", c.scanner.inner_diameter_mm},
                  {"elastic_modulus_gpa", c.scanner.elastic_modulus_gpa},
                  {"cam_position_mm", c.scanner.cam_position_mm},
                  {"volts_to_degrees", c.scanner.volts_to_degrees},
                  {"volts_to_tip_um_per_v", c.scanner.volts_to_tip_um_per_v},
                  {"drive_limit_v", c.scanner.drive_limit_v},
                  {"workspace_half_width_mm", c.workspace.half_width_mm},
                  {"workspace_centre_mm", {c.workspace.centre.x_mm, c.workspace.centre.y_mm}}};
  j["probe"] = {{"fov_diameter_um", c.probe.fov_diameter_um},
                {"resolution_um", c.probe.resolution_um},
                {"core_spacing_um", c.probe.core_spacing_um},
                {"core_count", c.probe.core_count},
                {"frame_rate_hz", c.probe.frame_rate_hz},
                {"frame_px", c.probe.frame_px},
                {"rotation_deg", c.probe.rotation_deg},
                {"noise_sigma", c.probe.noise_sigma},
                {"gaussian_sigma_px", c.gaussian_sigma_px}};
  j["plan"] = {{"kind", name_of(c.plan.kind, kPlanKinds)},
               {"point_frequency_hz", c.plan.params.point_frequency_hz},
               {"speed_mm_per_s", c.plan.params.speed_mm_per_s},
               {"length_mm", c.plan.params.length_mm},
               {"spiral_pitch_mm", c.plan.params.spiral_pitch_mm},
               {"max_radius_mm", c.plan.params.max_radius_mm},
               {"centre_mm", {c.plan.params.centre_mm.x, c.plan.params.centre_mm.y}},
               {"rows", c.plan.rows},
               {"row_spacing_mm", c.plan.row_spacing_mm}};
  j["phantom"] = {{"kind", name_of(c.phantom.kind, kPhantomKinds)},
                  {"extent_mm", c.phantom.extent_mm},
                  {"resolution_um_per_px", c.phantom.resolution_um_per_px},
                  {"line_thickness_um", c.phantom.grid.line_thickness_um},
                  {"square_width_um", c.phantom.grid.square_width_um},
                  {"feature_scale_um", c.phantom.feature_scale_um},
                  {"intensity", c.phantom.intensity}};
  j["disturbance"] = {{"amplitude_um", c.disturbance.amplitude_um},
                      {"speed_mm_per_s", c.disturbance.speed_mm_per_s}};
  j["deformation"] = {{"drag_coefficient", c.deformation.drag_coefficient},
                      {"recovery_time_s", c.deformation.recovery_time_s}};
  j["servo"] = {{"kp_per_min", c.servo.gains.kp_per_min},
                {"ki_per_min2", c.servo.gains.ki_per_min2},
                {"windup_limit_v_min", c.servo.gains.windup_limit_v_min},
                {"latency_ticks", c.servo.latency_ticks},
                {"max_consecutive_failures", c.servo.max_consecutive_failures},
                {"calibration", name_of(c.servo.calibration, kCalSources)},
                {"phi_deg", c.servo.phi_deg}};
  j["mosaic"] = {{"working_diameter_px", c.mosaic.registration.working_diameter_px},
                 {"template_px", c.mosaic.registration.template_px},
                 {"canvas_px", c.mosaic.canvas_px},
                 {"auto_grow", c.mosaic.auto_grow}};
  j["ablation"] = {{"lateral_offset_um", {c.ablation.lateral_offset_um.x, c.ablation.lateral_offset_um.y}},
                   {"power_w", c.ablation.power_w},
                   {"duration_ms", c.ablation.duration_ms},
                   {"mark_diameter_um", c.ablation.mark_diameter_um},
                   {"thermal_spread_um", c.ablation.thermal_spread_um}};
  j["sweep"] = {{"grid_n", c.sweep.grid_n}, {"actuation_noise_um", c.sweep.actuation_noise_um}};
  return j;
}

} // namespace endoscan
