#include "splatsim/io/camera.hpp"
#include "splatsim/io/config.hpp"
#include "splatsim/io/ply.hpp"
#include "splatsim/io/png.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

using namespace splatsim;
using splatsim::fixtures::TempDir;

namespace {

bool bit_equal(float a, float b) { return std::memcmp(&a, &b, sizeof(float)) == 0; }

void expect_bit_identical(const GaussianScene& a, const GaussianScene& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& p = a.gaussians[i];
    const auto& q = b.gaussians[i];
    for (int k = 0; k < 3; ++k) {
      EXPECT_TRUE(bit_equal(p.position[k], q.position[k])) << i;
      EXPECT_TRUE(bit_equal(p.log_scale[k], q.log_scale[k])) << i;
    }
    for (int k = 0; k < 4; ++k) EXPECT_TRUE(bit_equal(p.rotation[k], q.rotation[k])) << i;
    EXPECT_TRUE(bit_equal(p.opacity_logit, q.opacity_logit)) << i;
    for (std::size_t k = 0; k < p.sh.size(); ++k) EXPECT_TRUE(bit_equal(p.sh[k], q.sh[k])) << i << " sh " << k;
    EXPECT_EQ(p.object_id, q.object_id) << i;
  }
}

// Hand-written PLY with an arbitrary property list, one row of floats per vertex.
void write_ply(const std::filesystem::path& path, const std::vector<std::string>& props,
               const std::vector<std::vector<float>>& rows) {
  std::ofstream out(path, std::ios::binary);
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << rows.size() << "\n";
  for (const auto& p : props) out << "property float " << p << "\n";
  out << "end_header\n";
  for (const auto& r : rows) out.write(reinterpret_cast<const char*>(r.data()), std::streamsize(r.size() * 4));
}

std::vector<std::string> standard_props() {
  std::vector<std::string> p = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
  for (int i = 0; i < 45; ++i) p.push_back("f_rest_" + std::to_string(i));
  p.push_back("opacity");
  for (const char* n : {"scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) p.push_back(n);
  return p;
}

}  // namespace

TEST(Ply, SingleVertexUnitScalesIdentityRotation) {
  TempDir dir("ply");
  const auto props = standard_props();
  ASSERT_EQ(props.size(), 62u);
  std::vector<float> row(62, 0.0f);
  row[58] = 1.0f;  // rot_0 = w
  write_ply(dir / "one.ply", props, {row});
  const auto scene = load_gaussian_ply(dir / "one.ply");
  ASSERT_EQ(scene.size(), 1u);
  EXPECT_TRUE(scene.gaussians[0].scale().isApprox(Vec3::Ones()));
  EXPECT_TRUE(scene.gaussians[0].rotation_matrix().isApprox(Mat3::Identity()));
  EXPECT_FALSE(scene.gaussians[0].object_id);
}

TEST(Ply, RoundTripIsBitExact) {
  TempDir dir("ply");
  const auto scene = fixtures::random_scene(500, 7);
  save_gaussian_ply(scene, dir / "a.ply");
  expect_bit_identical(scene, load_gaussian_ply(dir / "a.ply"));
}

TEST(Ply, RoundTripPreservesIdsAndOrderAtTenThousand) {
  TempDir dir("ply");
  const auto scene = fixtures::random_scene(10000, 11, true);
  save_gaussian_ply(scene, dir / "b.ply");
  const auto back = load_gaussian_ply(dir / "b.ply");
  expect_bit_identical(scene, back);
  EXPECT_TRUE(back.has_ids());
}

TEST(Ply, IdsZeroAndOneSurvive) {
  TempDir dir("ply");
  auto scene = fixtures::random_scene(2, 3);
  scene.gaussians[0].object_id = 0;
  scene.gaussians[1].object_id = 1;
  save_gaussian_ply(scene, dir / "ids.ply");
  const auto back = load_gaussian_ply(dir / "ids.ply");
  EXPECT_EQ(back.gaussians[0].object_id, std::optional<ObjectId>(0));
  EXPECT_EQ(back.gaussians[1].object_id, std::optional<ObjectId>(1));
}

TEST(Ply, EmptySceneIsValid) {
  TempDir dir("ply");
  save_gaussian_ply(GaussianScene{}, dir / "empty.ply");
  EXPECT_EQ(load_gaussian_ply(dir / "empty.ply").size(), 0u);
}

TEST(Ply, MissingPropertyIsNamed) {
  TempDir dir("ply");
  auto props = standard_props();
  props.erase(std::find(props.begin(), props.end(), "opacity"));
  write_ply(dir / "bad.ply", props, {std::vector<float>(61, 0.0f)});
  try {
    load_gaussian_ply(dir / "bad.ply");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("'opacity'"), std::string::npos) << e.what();
  }
}

TEST(Ply, NonFiniteValueReportsVertex) {
  TempDir dir("ply");
  std::vector<float> good(62, 0.0f), bad(62, 0.0f);
  good[58] = bad[58] = 1.0f;
  bad[1] = std::numeric_limits<float>::quiet_NaN();
  write_ply(dir / "nan.ply", standard_props(), {good, bad});
  try {
    load_gaussian_ply(dir / "nan.ply");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("vertex 1"), std::string::npos) << e.what();
  }
}

TEST(Ply, QuaternionsNormalizedOnLoad) {
  TempDir dir("ply");
  std::vector<float> row(62, 0.0f);
  row[58] = 2.0f;
  row[59] = 1.0f;
  write_ply(dir / "q.ply", standard_props(), {row});
  const auto g = load_gaussian_ply(dir / "q.ply").gaussians[0];
  EXPECT_NEAR(double(g.rotation.norm()), 1.0, 1e-6);
}

TEST(Ply, RestCoefficientsAreOptional) {
  TempDir dir("ply");
  std::vector<std::string> props = {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
                                    "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"};
  write_ply(dir / "dc.ply", props, {{1, 2, 3, 0.5f, 0.1f, 0.2f, 0, 0, 0, 0, 1, 0, 0, 0}});
  const auto g = load_gaussian_ply(dir / "dc.ply").gaussians[0];
  EXPECT_FLOAT_EQ(g.position.y(), 2.0f);
  EXPECT_FLOAT_EQ(g.sh[0], 0.5f);
  for (std::size_t k = 3; k < g.sh.size(); ++k) EXPECT_EQ(g.sh[k], 0.0f);
}

TEST(Ply, RejectsAsciiFormat) {
  TempDir dir("ply");
  std::ofstream(dir / "a.ply") << "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
  EXPECT_THROW(load_gaussian_ply(dir / "a.ply"), FormatError);
}

TEST(Gaussian, ActivationsAndInvariants) {
  const auto scene = fixtures::random_scene(100, 5);
  for (const auto& g : scene.gaussians) {
    EXPECT_TRUE((g.scale().array() > 0).all());
    EXPECT_GE(g.opacity(), 0.0);
    EXPECT_LE(g.opacity(), 1.0);
    const Mat3 R = g.rotation_matrix();
    EXPECT_LT((R * R.transpose() - Mat3::Identity()).norm(), 1e-6);
  }
}

TEST(Camera, IdentityExtrinsicsCenterAtOrigin) {
  Camera c = fixtures::axis_camera();
  EXPECT_LT(c.center().norm(), 1e-12);
}

TEST(Camera, TranslationOnlyCenter) {
  Camera c = fixtures::axis_camera();
  c.world_to_camera.topRightCorner<3, 1>() = Vec3(0, 0, -3);
  EXPECT_LT((c.center() - Vec3(0, 0, 3)).norm(), 1e-12);
}

TEST(Camera, CenterConsistentWithExtrinsics) {
  const Camera c = Camera::look_at(Vec3(1, 2, 3), Vec3(0, 0, 0.5), Vec3::UnitZ(), 200, 64, 64, "v");
  EXPECT_LT((c.center() - Vec3(1, 2, 3)).norm(), 1e-9);
  EXPECT_LT(c.to_camera(c.center()).norm(), 1e-9);
  validate_camera(c, 1e-6);
  EXPECT_GT(c.to_camera(Vec3(0, 0, 0.5)).z(), 0);
}

TEST(Camera, JsonRoundTripAndFlatMatrix) {
  TempDir dir("cam");
  std::vector<Camera> cams = {Camera::look_at(Vec3(0, -4, 1), Vec3::Zero(), Vec3::UnitZ(), 300, 80, 60, "a"),
                              Camera::look_at(Vec3(4, 0, 1), Vec3::Zero(), Vec3::UnitZ(), 300, 80, 60, "b")};
  save_cameras(cams, dir / "cams.json");
  const auto back = load_cameras(dir / "cams.json");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].name, "b");
  EXPECT_LT((back[0].world_to_camera - cams[0].world_to_camera).norm(), 1e-12);

  nlohmann::json doc = {{"cameras",
                         {{{"name", "flat"}, {"fx", 10}, {"fy", 10}, {"cx", 5}, {"cy", 5}, {"width", 10},
                           {"height", 10}, {"world_to_camera", {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, -3, 0, 0, 0, 1}}}}}};
  const auto flat = parse_cameras(doc);
  EXPECT_LT((flat[0].center() - Vec3(0, 0, 3)).norm(), 1e-12);
  EXPECT_EQ(flat[0].mask_file, "flat.png");
}

TEST(Camera, DuplicateNamesRejected) {
  nlohmann::json rec = camera_to_json(fixtures::axis_camera());
  EXPECT_THROW(parse_cameras({{"cameras", {rec, rec}}}), DataError);
}

TEST(Camera, NonOrthonormalRotationRejectedWithName) {
  Camera c = fixtures::axis_camera();
  c.name = "skewed";
  c.world_to_camera(0, 1) = 1e-3;
  try {
    parse_cameras({{"cameras", {camera_to_json(c)}}});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("skewed"), std::string::npos);
  }
  c.world_to_camera(0, 1) = 5e-5;  // within tolerance
  EXPECT_NO_THROW(parse_cameras({{"cameras", {camera_to_json(c)}}}));
}

TEST(Masks, SixteenBitRoundTripAndConstantIds) {
  TempDir dir("mask");
  std::vector<Camera> cams;
  for (int v = 0; v < 3; ++v) {
    Camera c = fixtures::axis_camera(20, 10);
    c.name = "v" + std::to_string(v);
    c.mask_file = c.name + ".png";
    cams.push_back(c);
  }
  IdMask zero(20, 10, 0), seven(20, 10, 7), mixed(20, 10, 0);
  for (int x = 0; x < 20; ++x) mixed(x, x % 10) = ObjectId(300 + x);  // > 255 needs 16 bits
  png::write_gray16(dir / "v0.png", zero);
  png::write_gray16(dir / "v1.png", seven);
  png::write_gray16(dir / "v2.png", mixed);
  const auto masks = load_id_masks(dir.path(), cams);
  ASSERT_EQ(masks.size(), 3u);
  EXPECT_EQ(masks[0], zero);
  EXPECT_EQ(masks[1], seven);
  EXPECT_EQ(masks[2], mixed);
}

TEST(Masks, MissingMaskListsView) {
  TempDir dir("mask");
  Camera c = fixtures::axis_camera(8, 8);
  c.name = "lonely";
  try {
    load_id_masks(dir.path(), {c});
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("lonely"), std::string::npos);
  }
}

TEST(Masks, DimensionMismatchIsError) {
  TempDir dir("mask");
  Camera c = fixtures::axis_camera(8, 8);
  png::write_gray16(dir / c.mask_file, IdMask(9, 8, 1));
  EXPECT_THROW(load_id_masks(dir.path(), {c}), DataError);
}

TEST(Config, DefaultsAndRelativePaths) {
  const nlohmann::json j = {{"scene", "s.ply"}, {"cameras", "c.json"}, {"mask_dir", "m"},
                            {"materials", {{"1", {{"initial_velocity", {2, 0, 0}}}}}}};
  const auto c = parse_config(j, "/data/run");
  EXPECT_EQ(c.scene, std::filesystem::path("/data/run/s.ply"));
  EXPECT_EQ(c.output_dir, std::filesystem::path("/data/run/out"));
  EXPECT_DOUBLE_EQ(c.segmentation.tau_T, 0.5);
  EXPECT_DOUBLE_EQ(c.segmentation.tau_d, 0.03);
  EXPECT_DOUBLE_EQ(c.clamp.lambda_R, 1.2);
  EXPECT_DOUBLE_EQ(c.clamp.lambda_S, 0.8);
  EXPECT_DOUBLE_EQ(c.sim.dt, 1e-4);
  EXPECT_EQ(c.sim.frame_stride, 400);
  ASSERT_EQ(c.materials.count(1), 1u);
  EXPECT_DOUBLE_EQ(c.materials.at(1).youngs_modulus, 1e7);
  EXPECT_DOUBLE_EQ(c.materials.at(1).poisson_ratio, 0.2);
  EXPECT_EQ(c.materials.at(1).initial_velocity, Vec3(2, 0, 0));
}

TEST(Config, InvariantsRejected) {
  const nlohmann::json base = {{"scene", "s.ply"}, {"cameras", "c.json"}, {"mask_dir", "m"}};
  auto with = [&](const nlohmann::json& patch) {
    nlohmann::json j = base;
    j.merge_patch(patch);
    return j;
  };
  EXPECT_THROW(parse_config(with({{"segmentation", {{"tau_T", 1.0}}}}), "."), ConfigError);
  EXPECT_THROW(parse_config(with({{"segmentation", {{"tau_T", 0.0}}}}), "."), ConfigError);
  EXPECT_THROW(parse_config(with({{"segmentation", {{"tau_d", 0.0}}}}), "."), ConfigError);
  EXPECT_THROW(parse_config(with({{"clamp", {{"tau_min", 0.2}, {"tau_max", 0.1}}}}), "."), ConfigError);
  EXPECT_THROW(parse_config(with({{"clamp", {{"tau_min", 0.0}}}}), "."), ConfigError);
  EXPECT_THROW(parse_config(with({{"simulation", {{"dt", -1.0}}}}), "."), ConfigError);
  EXPECT_THROW(parse_config(with({{"simulation", {{"dx", 0.0}}}}), "."), ConfigError);
  EXPECT_THROW(parse_config(with({{"materials", {{"0", nlohmann::json::object()}}}}), "."), ConfigError);
  EXPECT_THROW(parse_config(with({{"materials", {{"x", nlohmann::json::object()}}}}), "."), ConfigError);
  EXPECT_THROW(parse_config(with({{"clamp", {{"mode", "bogus"}}}}), "."), ConfigError);
  EXPECT_THROW(parse_config(nlohmann::json::object(), "."), ConfigError);
}
