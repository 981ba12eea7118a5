#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "gom/error.hpp"
#include "gom/io.hpp"
#include "gom/render.hpp"
#include "gom/test_rig.hpp"

namespace gom {
namespace {

namespace fs = std::filesystem;

AvatarBundle sample_bundle() {
  AvatarBundle b{make_test_rig(4, 16, 12), make_networks(4, 3)};
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 0.3);
  for (Face& f : b.avatar.faces) {
    f.local_rotation = Vec3(n(rng), n(rng), n(rng));
    f.local_log_scale = Vec3(n(rng), n(rng), n(rng));
    f.color_logit = Vec3(n(rng), n(rng), n(rng));
  }
  for (Mlp* m : {&b.nets.deformer, &b.nets.refiner, &b.nets.shading}) {
    Eigen::MatrixXd& w = m->layers.back().weight;
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.01 * n(rng);
  }
  return b;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("gom_io_test_" + name);
}

void put_u32(std::vector<std::uint8_t>& bytes, std::size_t at, std::uint32_t v) {
  std::memcpy(bytes.data() + at, &v, 4);
}

TEST(AvatarFile, RoundTripIsValueEqualAtFilePrecision) {
  const AvatarBundle b = sample_bundle();
  const fs::path path = temp_path("round_trip.goma");
  save_avatar(b.avatar, b.nets, path);
  const AvatarBundle back = load_avatar(path);
  const AvatarBundle expected = quantize_to_file_precision(b);
  EXPECT_EQ(back.avatar, expected.avatar);
  EXPECT_EQ(back.nets, expected.nets);
  // A quantized bundle survives unchanged.
  save_avatar(back.avatar, back.nets, path);
  const AvatarBundle again = load_avatar(path);
  EXPECT_EQ(again.avatar, back.avatar);
  EXPECT_EQ(again.nets, back.nets);
  fs::remove(path);
}

TEST(AvatarFile, ByteDeterministic) {
  const AvatarBundle b = sample_bundle();
  EXPECT_EQ(encode_avatar(b.avatar, b.nets), encode_avatar(b.avatar, b.nets));
  const fs::path p1 = temp_path("det1.goma"), p2 = temp_path("det2.goma");
  save_avatar(b.avatar, b.nets, p1);
  save_avatar(b.avatar, b.nets, p2);
  EXPECT_EQ(read_binary_file(p1), read_binary_file(p2));
  fs::remove(p1);
  fs::remove(p2);
}

TEST(AvatarFile, HeaderLayout) {
  const AvatarBundle b = sample_bundle();
  const auto bytes = encode_avatar(b.avatar, b.nets);
  ASSERT_GE(bytes.size(), 32u);
  EXPECT_EQ(std::memcmp(bytes.data(), "GOMA", 4), 0);
  std::uint32_t u[3];
  std::memcpy(u, bytes.data() + 4, 4);
  EXPECT_EQ(u[0], kAvatarFormatVersion);
  std::memcpy(u, bytes.data() + 8, 12);
  EXPECT_EQ(u[0], b.avatar.vertices.size());
  EXPECT_EQ(u[1], b.avatar.faces.size());
  EXPECT_EQ(u[2], 4u);
  float eps;
  std::memcpy(&eps, bytes.data() + 20, 4);
  EXPECT_EQ(eps, 1e-3f);
  // Positions start right after the header.
  float x;
  std::memcpy(&x, bytes.data() + 32, 4);
  EXPECT_EQ(x, static_cast<float>(b.avatar.vertices[0].position.x()));
}

std::size_t network_bytes(const Mlp& m) {
  std::size_t n = 4;
  for (const DenseLayer& l : m.layers) n += 8 + 4 * (l.weight.size() + l.bias.size());
  return n;
}

TEST(AvatarFile, SizeFollowsLayout) {
  const AvatarBundle b{make_test_rig(4, 24, 24), make_networks(4, 1)};
  const std::size_t v = b.avatar.vertices.size(), f = b.avatar.faces.size(), j = 4;
  EXPECT_GE(v, 550u);
  std::size_t names = 0;
  for (const auto& n : b.avatar.rig.names) names += 4 + n.size();
  const std::size_t mesh = 32 + 4 * (3 * v + j * v) + 4 * 12 * f + 4 + 4 * j * (1 + 9 + 3) + names;
  // Without networks the tubeman stays under a megabyte.
  EXPECT_EQ(encode_avatar(b.avatar, Networks{}).size(), mesh + 3 * 4);
  EXPECT_LT(mesh + 12, 1u << 20);
  EXPECT_EQ(encode_avatar(b.avatar, b.nets).size(),
            mesh + network_bytes(b.nets.deformer) + network_bytes(b.nets.refiner) +
                network_bytes(b.nets.shading));
}

TEST(AvatarFile, BadMagicAndVersion) {
  const AvatarBundle b = sample_bundle();
  auto bytes = encode_avatar(b.avatar, b.nets);
  auto bad = bytes;
  bad[0] = 'X';
  try {
    decode_avatar(bad);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  bad = bytes;
  put_u32(bad, 4, 2);
  EXPECT_THROW(decode_avatar(bad), FormatError);
}

Networks small_networks() {
  Networks n;
  n.deformer = Mlp::create(deformer_input_dim(2, n.deformer_encoding), 4, 2, 3, 1, false);
  n.refiner = Mlp::create(refiner_input_dim(2), 4, 2, 6, 2, false);
  n.shading = Mlp::create(n.shading_encoding.output_dim(), 4, 2, 1, 3, false);
  return n;
}

TEST(AvatarFile, EveryTruncationIsATypedFormatError) {
  const AvatarBundle b{make_test_rig(2, 2, 3), small_networks()};
  const auto bytes = encode_avatar(b.avatar, b.nets);
  const std::size_t v = b.avatar.vertices.size();
  const std::size_t positions_end = 32 + 12 * v;
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    const std::span<const std::uint8_t> prefix(bytes.data(), len);
    try {
      decode_avatar(prefix);
      FAIL() << "prefix " << len << " decoded";
    } catch (const FormatError& e) {
      if (len > 32 && len < positions_end) {
        EXPECT_NE(std::string(e.what()).find("positions"), std::string::npos) << e.what();
      }
    }
  }
  EXPECT_NO_THROW(decode_avatar(bytes));
}

TEST(AvatarFile, BadCounts) {
  const AvatarBundle b = sample_bundle();
  const auto bytes = encode_avatar(b.avatar, b.nets);
  auto huge = bytes;
  put_u32(huge, 8, 0xFFFFFFFFu);
  EXPECT_THROW(decode_avatar(huge), FormatError);
  auto few = bytes;
  put_u32(few, 12, static_cast<std::uint32_t>(b.avatar.faces.size() - 1));
  EXPECT_THROW(decode_avatar(few), FormatError);
  auto joints = bytes;
  put_u32(joints, 16, 0);
  EXPECT_THROW(decode_avatar(joints), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_avatar(trailing), FormatError);
}

TEST(AvatarFile, InvalidContentIsDataError) {
  const AvatarBundle b = sample_bundle();
  auto bytes = encode_avatar(b.avatar, b.nets);
  const std::size_t v = b.avatar.vertices.size();
  const std::size_t faces_at = 32 + 12 * v + 4 * 4 * v;
  put_u32(bytes, faces_at, static_cast<std::uint32_t>(v + 7));
  EXPECT_THROW(decode_avatar(bytes), DataError);
}

TEST(AvatarFile, MissingFileIsIoError) {
  EXPECT_THROW(load_avatar(temp_path("does_not_exist.goma")), IoError);
}

TEST(AvatarFile, RandomCorruptionNeverEscapesTypedErrors) {
  const AvatarBundle b{make_test_rig(2, 2, 3), small_networks()};
  const auto bytes = encode_avatar(b.avatar, b.nets);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> pos(0, bytes.size() - 1);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int trial = 0; trial < 300; ++trial) {
    auto bad = bytes;
    for (int k = 0; k < 3; ++k) bad[pos(rng)] = static_cast<std::uint8_t>(byte(rng));
    try {
      decode_avatar(bad);
    } catch (const FormatError&) {
    } catch (const DataError&) {
    }
  }
}

TEST(TextFormats, PoseRoundTrip) {
  Pose p = Pose::identity(3);
  p.local_rotations[1] = Vec3(0.1, -0.25, 1.0 / 3.0);
  p.root_translation = Vec3(1e-7, 2.5, -3.0);
  EXPECT_EQ(pose_from_json(pose_to_json(p)), p);
  EXPECT_THROW(pose_from_json("{\"rotations\": [[0, 0]]}"), FormatError);
  EXPECT_THROW(pose_from_json("not json"), FormatError);
}

TEST(TextFormats, SequenceOrderAndJointCount) {
  const std::string one = R"({"frames": [{"time": 0, "pose": {"root_translation": [0,0,0],
                              "rotations": [[0,0,0],[0,0,0]]}}]})";
  const auto seq = pose_sequence_from_json(one, 2);
  ASSERT_EQ(seq.size(), 1u);
  EXPECT_EQ(seq[0].pose, Pose::identity(2));
  EXPECT_THROW(pose_sequence_from_json(one, 3), ArgumentError);

  std::vector<TimedPose> frames{{0.0, Pose::identity(2)}, {0.5, Pose::identity(2)}};
  frames[1].pose.local_rotations[0] = Vec3(0.3, 0.2, 0.1);
  EXPECT_EQ(pose_sequence_from_json(pose_sequence_to_json(frames), 2), frames);
  std::swap(frames[0].time, frames[1].time);
  EXPECT_THROW(pose_sequence_from_json(pose_sequence_to_json(frames)), FormatError);
  frames[0].time = frames[1].time;
  EXPECT_THROW(pose_sequence_from_json(pose_sequence_to_json(frames)), FormatError);

  const fs::path path = temp_path("seq.json");
  frames = {{0.0, Pose::identity(2)}, {1.0, Pose::identity(2)}};
  save_pose_sequence(frames, path);
  EXPECT_EQ(load_pose_sequence(path, 2), frames);
  fs::remove(path);
}

TEST(TextFormats, CameraRoundTripAndValidation) {
  const Camera c = orbit_camera(Vec3(0, 0.5, 0), 2.0, 0.7, 0.2, 64, 48);
  EXPECT_EQ(camera_from_json(camera_to_json(c)), c);
  Camera bad = c;
  bad.fx = -1;
  EXPECT_THROW(camera_from_json(camera_to_json(bad)), ArgumentError);
}

TEST(TextFormats, RigRoundTripAndValidation) {
  const Rig rig = make_test_rig(4, 4, 3).rig;
  EXPECT_EQ(rig_from_json(rig_to_json(rig)), rig);
  Rig cyclic = rig;
  cyclic.parents[0] = 2;
  EXPECT_THROW(rig_from_json(rig_to_json(cyclic)), DataError);
}

TEST(Png, RoundTripAtEightBits) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> u(0, 255);
  for (int channels : {1, 3, 4}) {
    Image img(7, 5, channels);
    for (double& v : img.data) v = u(rng) / 255.0;
    const Image back = decode_png(encode_png(img), channels);
    ASSERT_TRUE(back.same_shape(img));
    for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 1e-12);
  }
}

TEST(Png, ClampsAndConverts) {
  Image img(2, 1, 3);
  img.data = {-0.5, 0.5, 2.0, 1.0, 1.0, 1.0};
  const Image back = decode_png(encode_png(img), 3);
  EXPECT_EQ(back.data[0], 0.0);
  EXPECT_NEAR(back.data[1], 128 / 255.0, 1e-12);
  EXPECT_EQ(back.data[2], 1.0);
  const Image gray = decode_png(encode_png(img), 1);
  EXPECT_EQ(gray.channels, 1);
  EXPECT_EQ(gray.data[1], 1.0);
  EXPECT_THROW(decode_png(std::vector<std::uint8_t>{1, 2, 3}, 3), FormatError);
  EXPECT_THROW(encode_png(Image(2, 2, 2)), ArgumentError);
}

}  // namespace
}  // namespace gom
