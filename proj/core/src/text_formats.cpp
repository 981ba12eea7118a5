#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gom/error.hpp"
#include "gom/io.hpp"

namespace gom {

using nlohmann::json;

namespace {

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string(what) + ": " + e.what(), e.byte);
  }
}

// Field access that turns every shape problem into a FormatError.
const json& field(const json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError(std::string(what) + ": missing field \"" + key + "\"");
  }
  return j.at(key);
}

double number(const json& j, const char* what) {
  if (!j.is_number()) throw FormatError(std::string(what) + ": expected a number");
  return j.get<double>();
}

int integer(const json& j, const char* what) {
  if (!j.is_number_integer()) throw FormatError(std::string(what) + ": expected an integer");
  return j.get<int>();
}

std::vector<double> numbers(const json& j, std::size_t n, const char* what) {
  if (!j.is_array() || j.size() != n) {
    throw FormatError(std::string(what) + ": expected an array of " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (const json& x : j) out.push_back(number(x, what));
  return out;
}

Vec3 vec3(const json& j, const char* what) {
  const auto v = numbers(j, 3, what);
  return {v[0], v[1], v[2]};
}

Mat3 mat3(const json& j, const char* what) {
  const auto v = numbers(j, 9, what);
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = v[3 * r + c];
  }
  return m;
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json to_json(const Mat3& m) {
  json out = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.push_back(m(r, c));
  }
  return out;
}

json pose_json(const Pose& pose) {
  json rot = json::array();
  for (const Vec3& r : pose.local_rotations) rot.push_back(to_json(r));
  return {{"root_translation", to_json(pose.root_translation)}, {"rotations", rot}};
}

Pose pose_of(const json& j) {
  Pose pose;
  pose.root_translation = vec3(field(j, "root_translation", "pose"), "pose root_translation");
  const json& rot = field(j, "rotations", "pose");
  if (!rot.is_array()) throw FormatError("pose: rotations must be an array");
  for (const json& r : rot) pose.local_rotations.push_back(vec3(r, "pose rotation"));
  return pose;
}

}  // namespace

std::string pose_to_json(const Pose& pose) { return pose_json(pose).dump(2); }

Pose pose_from_json(const std::string& text) { return pose_of(parse(text, "pose")); }

std::string pose_sequence_to_json(std::span<const TimedPose> frames) {
  json arr = json::array();
  for (const TimedPose& f : frames) arr.push_back({{"time", f.time}, {"pose", pose_json(f.pose)}});
  return json{{"frames", arr}}.dump(2);
}

std::vector<TimedPose> pose_sequence_from_json(const std::string& text, std::size_t joint_count) {
  const json j = parse(text, "pose sequence");
  const json& frames = field(j, "frames", "pose sequence");
  if (!frames.is_array()) throw FormatError("pose sequence: frames must be an array");
  std::vector<TimedPose> out;
  for (const json& f : frames) {
    TimedPose tp{number(field(f, "time", "pose sequence frame"), "frame time"),
                 pose_of(field(f, "pose", "pose sequence frame"))};
    if (!out.empty() && !(tp.time > out.back().time)) {
      throw FormatError("pose sequence: frame " + std::to_string(out.size()) +
                        " time is not increasing");
    }
    if (joint_count != 0 && tp.pose.joint_count() != joint_count) {
      throw ArgumentError("pose sequence: frame " + std::to_string(out.size()) + " has " +
                          std::to_string(tp.pose.joint_count()) + " joints, rig has " +
                          std::to_string(joint_count));
    }
    out.push_back(std::move(tp));
  }
  return out;
}

std::string camera_to_json(const Camera& c) {
  return json{{"fx", c.fx},
              {"fy", c.fy},
              {"cx", c.cx},
              {"cy", c.cy},
              {"width", c.width},
              {"height", c.height},
              {"rotation", to_json(c.rotation)},
              {"translation", to_json(c.translation)}}
      .dump(2);
}

Camera camera_from_json(const std::string& text) {
  const json j = parse(text, "camera");
  Camera c;
  c.fx = number(field(j, "fx", "camera"), "camera fx");
  c.fy = number(field(j, "fy", "camera"), "camera fy");
  c.cx = number(field(j, "cx", "camera"), "camera cx");
  c.cy = number(field(j, "cy", "camera"), "camera cy");
  c.width = integer(field(j, "width", "camera"), "camera width");
  c.height = integer(field(j, "height", "camera"), "camera height");
  c.rotation = mat3(field(j, "rotation", "camera"), "camera rotation");
  c.translation = vec3(field(j, "translation", "camera"), "camera translation");
  validate(c);
  return c;
}

std::string rig_to_json(const Rig& rig) {
  json joints = json::array();
  for (std::size_t k = 0; k < rig.joint_count(); ++k) {
    joints.push_back({{"name", k < rig.names.size() ? rig.names[k] : std::string()},
                      {"parent", rig.parents[k]},
                      {"rest_rotation", to_json(rig.rest_rotations[k])},
                      {"rest_translation", to_json(rig.rest_translations[k])}});
  }
  return json{{"joints", joints}}.dump(2);
}

Rig rig_from_json(const std::string& text) {
  const json j = parse(text, "rig");
  const json& joints = field(j, "joints", "rig");
  if (!joints.is_array()) throw FormatError("rig: joints must be an array");
  Rig rig;
  for (const json& jt : joints) {
    const json& name = field(jt, "name", "rig joint");
    if (!name.is_string()) throw FormatError("rig joint: name must be a string");
    rig.names.push_back(name.get<std::string>());
    rig.parents.push_back(integer(field(jt, "parent", "rig joint"), "rig joint parent"));
    rig.rest_rotations.push_back(mat3(field(jt, "rest_rotation", "rig joint"), "rest_rotation"));
    rig.rest_translations.push_back(
        vec3(field(jt, "rest_translation", "rig joint"), "rest_translation"));
  }
  const auto report = validate(rig);
  if (!report.ok()) throw DataError("invalid rig: " + report.summary());
  return rig;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError(path.string(), "cannot open for writing");
  os << text;
  if (!os) throw IoError(path.string(), "write failed");
}

Pose load_pose(const std::filesystem::path& path) { return pose_from_json(read_text_file(path)); }

void save_pose(const Pose& pose, const std::filesystem::path& path) {
  write_text_file(path, pose_to_json(pose));
}

std::vector<TimedPose> load_pose_sequence(const std::filesystem::path& path,
                                          std::size_t joint_count) {
  return pose_sequence_from_json(read_text_file(path), joint_count);
}

void save_pose_sequence(std::span<const TimedPose> frames, const std::filesystem::path& path) {
  write_text_file(path, pose_sequence_to_json(frames));
}

Camera load_camera(const std::filesystem::path& path) {
  return camera_from_json(read_text_file(path));
}

void save_camera(const Camera& camera, const std::filesystem::path& path) {
  write_text_file(path, camera_to_json(camera));
}

}  // namespace gom
