#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "gom/error.hpp"
#include "gom/io.hpp"

static_assert(std::endian::native == std::endian::little, "avatar files assume a little-endian host");

namespace gom {

namespace {

constexpr char kMagic[4] = {'G', 'O', 'M', 'A'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void i32(std::int32_t v) { bytes(&v, 4); }
  void f32(double v) {
    const float f = static_cast<float>(v);
    bytes(&f, 4);
  }
  void vec3(const Vec3& v) {
    for (int k = 0; k < 3; ++k) f32(v[k]);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  /// Fails before any allocation when `count` elements of `size` bytes cannot fit.
  void require(std::uint64_t count, std::size_t size, const char* what) const {
    if (count > remaining() / size) {
      throw FormatError(std::string("truncated ") + what + ": need " +
                            std::to_string(count * size) + " bytes, " +
                            std::to_string(remaining()) + " left",
                        pos_);
    }
  }
  void bytes(void* dst, std::size_t n, const char* what) {
    require(n, 1, what);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    bytes(&v, 4, what);
    return v;
  }
  std::int32_t i32(const char* what) {
    std::int32_t v;
    bytes(&v, 4, what);
    return v;
  }
  double f32(const char* what) {
    float v;
    bytes(&v, 4, what);
    return static_cast<double>(v);
  }
  Vec3 vec3(const char* what) {
    Vec3 v;
    for (int k = 0; k < 3; ++k) v[k] = f32(what);
    return v;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

void write_mlp(Writer& w, const Mlp& m) {
  w.u32(static_cast<std::uint32_t>(m.layers.size()));
  for (const DenseLayer& l : m.layers) {
    w.u32(static_cast<std::uint32_t>(l.weight.rows()));
    w.u32(static_cast<std::uint32_t>(l.weight.cols()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.f32(l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) w.f32(l.bias[r]);
  }
}

Mlp read_mlp(Reader& r, const char* name) {
  Mlp m;
  const std::string layers_what = std::string(name) + " layer count";
  const std::uint32_t n = r.u32(layers_what.c_str());
  const std::string shape_what = std::string(name) + " layer shape";
  const std::string weights_what = std::string(name) + " weights";
  const std::string bias_what = std::string(name) + " biases";
  // Each layer needs at least its two shape words.
  r.require(n, 8, shape_what.c_str());
  m.layers.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    const std::uint32_t rows = r.u32(shape_what.c_str());
    const std::uint32_t cols = r.u32(shape_what.c_str());
    if (rows == 0 || cols == 0) throw FormatError(std::string(name) + ": empty layer", at);
    if (i > 0 && cols != m.layers[i - 1].weight.rows()) {
      throw FormatError(std::string(name) + ": layer " + std::to_string(i) + " input " +
                            std::to_string(cols) + " does not match previous output " +
                            std::to_string(m.layers[i - 1].weight.rows()),
                        at);
    }
    r.require(static_cast<std::uint64_t>(rows) * cols + rows, 4, weights_what.c_str());
    DenseLayer& l = m.layers[i];
    l.weight.resize(rows, cols);
    for (std::uint32_t y = 0; y < rows; ++y) {
      for (std::uint32_t x = 0; x < cols; ++x) l.weight(y, x) = r.f32(weights_what.c_str());
    }
    l.bias.resize(rows);
    for (std::uint32_t y = 0; y < rows; ++y) l.bias[y] = r.f32(bias_what.c_str());
  }
  return m;
}

void check_network(const Mlp& m, int input, int output, const char* name) {
  if (m.empty()) return;
  if (m.input_dim() != input || m.output_dim() != output) {
    throw DataError(std::string(name) + " network maps " + std::to_string(m.input_dim()) + " -> " +
                    std::to_string(m.output_dim()) + ", expected " + std::to_string(input) +
                    " -> " + std::to_string(output));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_avatar(const Avatar& avatar, const Networks& nets) {
  const auto report = validate(avatar);
  if (!report.ok()) throw DataError("cannot save invalid avatar: " + report.summary());
  const std::size_t v = avatar.vertices.size(), f = avatar.faces.size(),
                    j = avatar.rig.joint_count();
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kAvatarFormatVersion);
  w.u32(static_cast<std::uint32_t>(v));
  w.u32(static_cast<std::uint32_t>(f));
  w.u32(static_cast<std::uint32_t>(j));
  w.f32(avatar.epsilon);
  w.u32(avatar.subdivision_level);
  w.u32(0);
  for (const Vertex& x : avatar.vertices) w.vec3(x.position);
  for (const Vertex& x : avatar.vertices) {
    for (std::size_t k = 0; k < j; ++k) w.f32(x.weights[static_cast<Eigen::Index>(k)]);
  }
  for (const Face& x : avatar.faces) {
    for (std::uint32_t i : x.vertex_indices) w.u32(i);
  }
  for (const Face& x : avatar.faces) w.vec3(x.local_rotation);
  for (const Face& x : avatar.faces) w.vec3(x.local_log_scale);
  for (const Face& x : avatar.faces) w.vec3(x.color_logit);
  write_mlp(w, nets.deformer);
  write_mlp(w, nets.refiner);
  write_mlp(w, nets.shading);
  const Rig& rig = avatar.rig;
  w.u32(static_cast<std::uint32_t>(j));
  for (int p : rig.parents) w.i32(p);
  for (const Mat3& r : rig.rest_rotations) {
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 3; ++x) w.f32(r(y, x));
    }
  }
  for (const Vec3& t : rig.rest_translations) w.vec3(t);
  for (std::size_t k = 0; k < j; ++k) {
    const std::string& name = k < rig.names.size() ? rig.names[k] : std::string();
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
  }
  return w.take();
}

AvatarBundle decode_avatar(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic, not an avatar file", 0);
  const std::uint32_t version = r.u32("version");
  if (version != kAvatarFormatVersion) {
    throw FormatError("unsupported avatar format version " + std::to_string(version), 4);
  }
  const std::uint32_t v = r.u32("vertex count");
  const std::uint32_t f = r.u32("face count");
  const std::uint32_t j = r.u32("joint count");
  AvatarBundle out;
  Avatar& a = out.avatar;
  a.epsilon = r.f32("epsilon");
  a.subdivision_level = r.u32("subdivision level");
  r.u32("reserved");
  if (j == 0) throw FormatError("joint count must be positive", 16);

  r.require(static_cast<std::uint64_t>(v) * 3, 4, "positions");
  a.vertices.resize(v);
  for (auto& x : a.vertices) x.position = r.vec3("positions");
  r.require(static_cast<std::uint64_t>(v) * j, 4, "weights");
  for (auto& x : a.vertices) {
    x.weights.resize(j);
    for (std::uint32_t k = 0; k < j; ++k) x.weights[k] = r.f32("weights");
  }
  r.require(static_cast<std::uint64_t>(f) * 3, 4, "face indices");
  a.faces.resize(f);
  for (auto& x : a.faces) {
    for (auto& i : x.vertex_indices) i = r.u32("face indices");
  }
  r.require(static_cast<std::uint64_t>(f) * 3, 4, "rotations");
  for (auto& x : a.faces) x.local_rotation = r.vec3("rotations");
  r.require(static_cast<std::uint64_t>(f) * 3, 4, "log-scales");
  for (auto& x : a.faces) x.local_log_scale = r.vec3("log-scales");
  r.require(static_cast<std::uint64_t>(f) * 3, 4, "color logits");
  for (auto& x : a.faces) x.color_logit = r.vec3("color logits");

  out.nets.deformer = read_mlp(r, "deformer");
  out.nets.refiner = read_mlp(r, "refiner");
  out.nets.shading = read_mlp(r, "shading");

  const std::size_t rig_at = r.offset();
  const std::uint32_t rig_j = r.u32("rig joint count");
  if (rig_j != j) {
    throw FormatError("rig block has " + std::to_string(rig_j) + " joints, header says " +
                          std::to_string(j),
                      rig_at);
  }
  Rig& rig = a.rig;
  r.require(j, 4, "parents");
  rig.parents.resize(j);
  for (auto& p : rig.parents) p = r.i32("parents");
  r.require(static_cast<std::uint64_t>(j) * 9, 4, "rest rotations");
  rig.rest_rotations.resize(j);
  for (auto& m : rig.rest_rotations) {
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 3; ++x) m(y, x) = r.f32("rest rotations");
    }
  }
  r.require(static_cast<std::uint64_t>(j) * 3, 4, "rest translations");
  rig.rest_translations.resize(j);
  for (auto& t : rig.rest_translations) t = r.vec3("rest translations");
  rig.names.resize(j);
  for (auto& name : rig.names) {
    const std::uint32_t len = r.u32("joint names");
    r.require(len, 1, "joint names");
    name.resize(len);
    r.bytes(name.data(), len, "joint names");
  }
  if (r.remaining() != 0) {
    throw FormatError(std::to_string(r.remaining()) + " trailing bytes after rig block", r.offset());
  }

  const auto report = validate(a);
  if (!report.ok()) throw DataError("invalid avatar: " + report.summary());
  check_network(out.nets.deformer, deformer_input_dim(j, out.nets.deformer_encoding), 3,
                "deformer");
  check_network(out.nets.refiner, refiner_input_dim(j), static_cast<int>(3 * j), "refiner");
  check_network(out.nets.shading, out.nets.shading_encoding.output_dim(), 1, "shading");
  return out;
}

void save_avatar(const Avatar& avatar, const Networks& nets, const std::filesystem::path& path) {
  write_binary_file(path, encode_avatar(avatar, nets));
}

AvatarBundle load_avatar(const std::filesystem::path& path) {
  return decode_avatar(read_binary_file(path));
}

namespace {

// The volatile store keeps g++ -O3 from folding the double -> float -> double
// round trip on small fixed-size vectors.
double to_f32(double v) {
  volatile float f = static_cast<float>(v);
  return f;
}

template <typename M>
void quantize(M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = to_f32(m.data()[i]);
}

}  // namespace

AvatarBundle quantize_to_file_precision(const AvatarBundle& bundle) {
  AvatarBundle b = bundle;
  b.avatar.epsilon = to_f32(b.avatar.epsilon);
  for (Vertex& v : b.avatar.vertices) {
    quantize(v.position);
    quantize(v.weights);
  }
  for (Face& f : b.avatar.faces) {
    quantize(f.local_rotation);
    quantize(f.local_log_scale);
    quantize(f.color_logit);
  }
  for (Mat3& r : b.avatar.rig.rest_rotations) quantize(r);
  for (Vec3& t : b.avatar.rig.rest_translations) quantize(t);
  for (Mlp* m : {&b.nets.deformer, &b.nets.refiner, &b.nets.shading}) {
    for (DenseLayer& l : m->layers) {
      quantize(l.weight);
      quantize(l.bias);
    }
  }
  return b;
}

void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(path.string(), "cannot open for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError(path.string(), "write failed");
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string(), "cannot open for reading");
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (is.bad()) throw IoError(path.string(), "read failed");
  return data;
}

}  // namespace gom
