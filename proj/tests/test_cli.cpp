#include "gsgrasp/contact.hpp"
#include "gsgrasp/fileio.hpp"
#include "gsgrasp/gaussian_cloud.hpp"
#include "gsgrasp/image.hpp"
#include "gsgrasp/kinematics.hpp"
#include "gsgrasp/pose_fit.hpp"
#include "test_util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <map>

using namespace gsg;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args) {
  const char* exe = std::getenv("GSGRASP_CLI");
  REQUIRE_MESSAGE(exe != nullptr, "GSGRASP_CLI is not set");
  const fs::path log = fs::temp_directory_path() / "gsgrasp_cli_test.log";
  const std::string cmd = std::string(exe) + " " + args + " --threads 1 > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = read_text_file(log);
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::map<std::string, std::string> tree_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = read_text_file(e.path());
  return out;
}

// Small scenes generated once through the CLI itself.
struct Scenes {
  fs::path root = temp_dir("cli");
  fs::path finger = root / "finger", sphere = root / "sphere", toy = root / "toy";
  Scenes() {
    REQUIRE(cli("synth --scene two-bone-finger --views 3 --width 24 --height 24 --seed 3 --out " + q(finger)).code == 0);
    REQUIRE(cli("synth --scene textured-sphere --views 3 --width 24 --height 24 --out " + q(sphere)).code == 0);
    REQUIRE(cli("synth --scene grasp-toy --views 3 --width 32 --height 32 --seed 2 --out " + q(toy)).code == 0);
  }
};

const Scenes& scenes() {
  static const Scenes s;
  return s;
}

void write_masks(const fs::path& dir, const std::vector<Mask>& masks) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < masks.size(); ++i) save_mask_png(masks[i], dir / ("m" + std::to_string(i) + ".png"));
}

Mask columns(int w, int h, int x0, int x1) {
  Mask m(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = x0; x < x1; ++x) m.at(x, y) = 1;
  return m;
}

}  // namespace

TEST_CASE("synth writes a loadable capture and an artifact list") {
  const auto& s = scenes();
  CHECK(fs::exists(s.finger / "manifest.json"));
  const auto j = nlohmann::json::parse(read_text_file(s.finger / "artifacts.json"));
  CHECK(j["command"] == "synth");
  for (const auto& f : j["artifacts"]) CHECK(fs::exists(s.finger / f.get<std::string>()));
  CHECK(cli("synth --scene cube --out " + q(s.root / "cube")).code == 2);
  CHECK_FALSE(fs::exists(s.root / "cube"));
}

TEST_CASE("train-hand") {
  const auto& s = scenes();
  const fs::path cfg0 = s.root / "zero.toml";
  write_text_file(cfg0, "[train]\niterations = 0\n");

  SUBCASE("missing skeleton names the path") {
    const Run r = cli("train-hand --manifest " + q(s.finger / "manifest.json") + " --skeleton " +
                      q(s.root / "nope_skel.json") + " --out " + q(s.root / "th_bad"));
    CHECK(r.code == 2);
    CHECK(r.output.find("nope_skel.json") != std::string::npos);
    CHECK_FALSE(fs::exists(s.root / "th_bad"));
  }
  SUBCASE("zero iterations write the initialization") {
    const fs::path out = s.root / "th0";
    const Run r = cli("train-hand --manifest " + q(s.finger / "manifest.json") + " --config " + q(cfg0) +
                      " --seed 9 --out " + q(out));
    REQUIRE(r.code == 0);
    const SkeletonDef skel = load_skeleton(s.finger / "skeleton.json");
    save_ply(init_from_skeleton(skel, 60, 9), s.root / "init.ply");
    CHECK(read_text_file(out / "hand.ply") == read_text_file(s.root / "init.ply"));
    const auto rep = nlohmann::json::parse(read_text_file(out / "report.json"));
    CHECK(rep["optimizer_steps"] == 0);
  }
  SUBCASE("short runs are idempotent") {
    const fs::path cfg = s.root / "short.toml", out = s.root / "th_short";
    write_text_file(cfg, "[train]\niterations = 8\n[grid]\ndims = [12, 12, 12]\n");
    const std::string args = "train-hand --manifest " + q(s.finger / "manifest.json") + " --config " + q(cfg) +
                             " --out " + q(out);
    REQUIRE(cli(args).code == 0);
    const auto first = tree_contents(out);
    REQUIRE(cli(args).code == 0);
    CHECK(tree_contents(out) == first);
  }
  SUBCASE("unknown config key") {
    const fs::path cfg = s.root / "badkey.toml";
    write_text_file(cfg, "[train]\nwarp_speed = 9\n");
    const Run r = cli("train-hand --manifest " + q(s.finger / "manifest.json") + " --config " + q(cfg) + " --out " +
                      q(s.root / "th_key"));
    CHECK(r.code == 2);
    CHECK(r.output.find("train.warp_speed") != std::string::npos);
  }
  CHECK(cli("train-hand --out " + q(s.root / "th_none")).code == 2);
}

TEST_CASE("train-object") {
  const auto& s = scenes();
  SUBCASE("invalid config key is named") {
    const fs::path cfg = s.root / "obj_bad.toml";
    write_text_file(cfg, "[object]\nwobble = 1\n");
    const Run r = cli("train-object --manifest " + q(s.sphere / "manifest.json") + " --config " + q(cfg) + " --out " +
                      q(s.root / "to_bad"));
    CHECK(r.code == 2);
    CHECK(r.output.find("object.wobble") != std::string::npos);
  }
  SUBCASE("empty masks fail with an empty-cloud diagnosis") {
    const fs::path copy = s.root / "sphere_empty";
    fs::remove_all(copy);
    fs::copy(s.sphere, copy, fs::copy_options::recursive);
    for (const auto& e : fs::directory_iterator(copy / "masks")) save_mask_png(Mask(24, 24, 0), e.path());
    const fs::path cfg = s.root / "cull.toml";
    write_text_file(cfg, "[train]\niterations = 4\nmask_cull_interval = 2\n");
    const Run r = cli("train-object --manifest " + q(copy / "manifest.json") + " --config " + q(cfg) + " --out " +
                      q(s.root / "to_empty"));
    CHECK(r.code == 3);
    CHECK(r.output.find("empty") != std::string::npos);
    CHECK_FALSE(fs::exists(s.root / "to_empty"));
  }
  SUBCASE("short run succeeds") {
    const fs::path cfg = s.root / "obj_short.toml";
    write_text_file(cfg, "[train]\niterations = 4\n[object]\ngaussians = 100\n");
    const fs::path out = s.root / "to_ok";
    REQUIRE(cli("train-object --manifest " + q(s.sphere / "manifest.json") + " --config " + q(cfg) + " --out " +
                q(out)).code == 0);
    CHECK(load_ply(out / "object.ply").size() <= 100);
    CHECK(nlohmann::json::parse(read_text_file(out / "report.json"))["outside_masks"] == 0);
  }
}

TEST_CASE("fit-pose") {
  const auto& s = scenes();
  SUBCASE("synthetic sequence is recovered") {
    const fs::path out = s.root / "fp";
    const fs::path cfg = s.root / "ik.toml";
    write_text_file(cfg, "[ik]\niterations = 40000\ntolerance = 1e-5\n");
    REQUIRE(cli("fit-pose --manifest " + q(s.finger / "manifest.json") + " --config " + q(cfg) + " --out " + q(out))
                .code == 0);
    const auto rep = nlohmann::json::parse(read_text_file(out / "report.json"));
    CHECK(rep["relative_joint_error"].get<double>() < 1e-3);
    CHECK(fs::exists(out / "smoothed" / "p002.json"));
    // The finger has a single tip, so there is no aperture to report.
    CHECK(fs::exists(out / "aperture.csv") == (load_skeleton(s.finger / "skeleton.json").tips().size() >= 2));
  }
  SUBCASE("one camera cannot triangulate") {
    const fs::path copy = s.root / "finger_one";
    fs::remove_all(copy);
    fs::copy(s.finger, copy, fs::copy_options::recursive);
    for (const auto& e : fs::directory_iterator(copy / "kp")) {
      KeypointSet2D k = load_keypoints_2d(e.path());
      k.views.resize(1);
      const std::vector<std::string> cams{"../cams/c000.json"};
      save_keypoints_2d(k, cams, e.path());
    }
    const Run r = cli("fit-pose --manifest " + q(copy / "manifest.json") + " --out " + q(s.root / "fp_one"));
    CHECK(r.code == 3);
    CHECK_FALSE(fs::exists(s.root / "fp_one"));
  }
}

TEST_CASE("grasp") {
  const auto& s = scenes();
  const std::string base = "grasp --manifest " + q(s.toy / "manifest.json");
  CHECK(cli(base + " --tau 0 --out " + q(s.root / "g_tau")).code == 2);
  CHECK(cli(base + " --tau -1 --out " + q(s.root / "g_tau")).code == 2);
  CHECK(cli(base + " --camera 7 --out " + q(s.root / "g_cam")).code == 2);

  SUBCASE("single pose: accumulated equals instantaneous") {
    const fs::path poses = s.root / "one_pose";
    fs::remove_all(poses);
    fs::create_directories(poses);
    const auto seq = nlohmann::json::parse(read_text_file(s.toy / "manifest.json"))["poses"];
    fs::copy_file(s.toy / seq.back().get<std::string>(), poses / "p.json");
    const fs::path out = s.root / "g_one";
    REQUIRE(cli(base + " --poses " + q(poses) + " --camera 0 --out " + q(out)).code == 0);
    const AccumulatedContact acc = load_contact(out / "accumulated.bin");
    const AccumulatedContact one = load_contact(out / "contact" / "f000.bin");
    CHECK(acc.hand_touched == one.hand_touched);
    CHECK(acc.object_touched == one.object_touched);
    CHECK(fs::exists(out / "renders" / "composed_c000.png"));
    CHECK_FALSE(fs::exists(out / "renders" / "composed_c001.png"));
  }
  SUBCASE("full sequence is idempotent") {
    const fs::path out = s.root / "g_full";
    REQUIRE(cli(base + " --out " + q(out)).code == 0);
    const auto first = tree_contents(out);
    REQUIRE(cli(base + " --out " + q(out)).code == 0);
    CHECK(tree_contents(out) == first);
  }
}

TEST_CASE("evaluate") {
  const auto& s = scenes();
  const fs::path a = s.root / "ev_a", b = s.root / "ev_b", c = s.root / "ev_c", d = s.root / "ev_d";
  for (const auto& p : {a, b, c, d}) fs::remove_all(p);
  write_masks(a, {columns(20, 20, 0, 10), columns(20, 20, 0, 5)});
  write_masks(b, {columns(20, 20, 10, 20), columns(20, 20, 5, 20)});
  write_masks(c, {columns(100, 100, 0, 50)});
  write_masks(d, {columns(100, 100, 0, 75)});

  auto eval = [&](const fs::path& p, const fs::path& g) {
    const fs::path out = s.root / "ev_out";
    REQUIRE(cli("evaluate --pred " + q(p) + " --gt " + q(g) + " --out " + q(out)).code == 0);
    return nlohmann::json::parse(read_text_file(out / "evaluation.json"));
  };
  auto j = eval(a, a);
  CHECK(j["mean_iou"] == 1.0);
  CHECK(j["mean_f1"] == 1.0);
  j = eval(a, b);
  CHECK(j["mean_iou"] == 0.0);
  CHECK(j["mean_f1"] == 0.0);
  j = eval(c, d);
  CHECK(j["mean_iou"].get<double>() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(j["mean_f1"].get<double>() == doctest::Approx(0.8).epsilon(1e-12));

  const Run mismatch = cli("evaluate --pred " + q(a) + " --gt " + q(c) + " --out " + q(s.root / "ev_bad"));
  CHECK(mismatch.code == 2);
  CHECK(mismatch.output.find("m1.png") != std::string::npos);
  CHECK(cli("evaluate --pred " + q(a) + " --gt " + q(s.root / "absent") + " --out " + q(s.root / "ev_bad")).code == 2);
}

TEST_CASE("output directory safety") {
  const auto& s = scenes();
  const fs::path mine = s.root / "user_dir";
  fs::create_directories(mine);
  write_text_file(mine / "notes.txt", "keep");
  const fs::path d = s.root / "ev_x";
  write_masks(d, {columns(8, 8, 0, 4)});
  CHECK(cli("evaluate --pred " + q(d) + " --gt " + q(d) + " --out " + q(mine)).code == 2);
  CHECK(read_text_file(mine / "notes.txt") == "keep");
  CHECK(cli("--bogus").code == 2);
}
