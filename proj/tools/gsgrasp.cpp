#include "gsgrasp/commands.hpp"
#include "gsgrasp/parallel.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

void add_common(CLI::App* sub, gsg::CommandArgs& a) {
  sub->add_option("--out", a.out, "Output directory (replaced atomically)")->required();
  sub->add_option("--threads", a.threads, "Worker threads (default: GSGRASP_THREADS or all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  gsg::CommandArgs a;
  std::uint64_t seed = 0;

  CLI::App app{"Articulated Gaussian hand/object capture and contact maps"};
  app.require_subcommand(1);

  auto* th = app.add_subcommand("train-hand", "Fit a canonical Gaussian hand to posed multi-view images");
  auto* to = app.add_subcommand("train-object", "Fit a static Gaussian object to multi-view images");
  auto* fp = app.add_subcommand("fit-pose", "Triangulate keypoints, solve IK per frame and smooth");
  auto* gr = app.add_subcommand("grasp", "Pose the hand over a sequence and accumulate contact with the object");
  auto* ev = app.add_subcommand("evaluate", "IoU / F1 between two directories of binary masks");
  auto* sy = app.add_subcommand("synth", "Write a synthetic capture with hidden ground truth");

  for (auto* s : {th, to, fp, gr, ev, sy}) add_common(s, a);
  for (auto* s : {th, to, fp, gr}) s->add_option("--manifest", a.manifest, "Capture manifest JSON");
  for (auto* s : {th, fp, gr}) s->add_option("--skeleton", a.skeleton, "Skeleton JSON (default: manifest entry)");
  for (auto* s : {th, to, fp}) s->add_option("--config", a.config, "TOML-style settings file");
  for (auto* s : {th, to, sy}) s->add_option("--seed", seed, "Random seed");
  for (auto* s : {gr, sy}) s->add_option("--tau", a.tau, "Contact distance threshold in meters");

  gr->add_option("--hand", a.hand, "Canonical hand PLY (default: manifest entry)");
  gr->add_option("--grid", a.grid, "Skinning grid (default: manifest entry)");
  gr->add_option("--object", a.object, "Object PLY (default: manifest entry)");
  gr->add_option("--poses", a.poses, "Directory of pose JSON files (default: manifest sequence)");
  gr->add_option("--camera", a.cameras, "Manifest camera index to render (repeatable, default all)");

  ev->add_option("--pred", a.pred, "Predicted mask directory")->required();
  ev->add_option("--gt", a.gt, "Ground-truth mask directory")->required();

  sy->add_option("--scene", a.scene, "two-bone-finger | textured-sphere | grasp-toy");
  sy->add_option("--views", a.views, "Camera count");
  sy->add_option("--width", a.width, "Image width");
  sy->add_option("--height", a.height, "Image height");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gsg::kExitInput;
  }
  for (auto* s : {th, to, sy})
    if (s->parsed() && s->count("--seed") > 0) a.seed = seed;

  try {
    gsg::apply_thread_env();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return gsg::kExitInput;
  }

  gsg::CommandResult r;
  if (th->parsed()) r = gsg::cmd_train_hand(a);
  else if (to->parsed()) r = gsg::cmd_train_object(a);
  else if (fp->parsed()) r = gsg::cmd_fit_pose(a);
  else if (gr->parsed()) r = gsg::cmd_grasp(a);
  else if (ev->parsed()) r = gsg::cmd_evaluate(a);
  else r = gsg::cmd_synth(a);

  for (const auto& line : r.log) (r.exit_code == 0 ? std::cout : std::cerr) << line << "\n";
  if (r.exit_code == 0)
    for (const auto& p : r.artifacts) std::cout << "wrote " << p.string() << "\n";
  return r.exit_code;
}
