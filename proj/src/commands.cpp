#include "gsgrasp/commands.hpp"

#include "gsgrasp/config.hpp"
#include "gsgrasp/fileio.hpp"
#include "gsgrasp/metrics.hpp"
#include "gsgrasp/parallel.hpp"
#include "gsgrasp/pose_fit.hpp"
#include "gsgrasp/rasterizer.hpp"
#include "gsgrasp/scene_io.hpp"
#include "gsgrasp/synthetic.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <new>

namespace gsg {

namespace fs = std::filesystem;
using nlohmann::json;

void apply_thread_env() {
  const char* env = std::getenv("GSGRASP_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw InvalidArgument(std::string("GSGRASP_THREADS must be a positive integer, got '") + env + "'");
  set_threads(static_cast<int>(n));
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ComputationError*>(&e)) return kExitCompute;
  if (dynamic_cast<const Error*>(&e)) return kExitInput;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitInput;
  return kExitCompute;
}

namespace {

std::string numbered(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%03zu%s", prefix, i, ext);
  return buf;
}

// Output directory written through a sibling temp directory.
class Stage {
 public:
  explicit Stage(fs::path out) {
    if (out.empty()) throw InvalidArgument("--out is required");
    out = fs::absolute(out).lexically_normal();
    if (out.filename().empty()) out = out.parent_path();
    out_ = out;
    if (fs::exists(out_)) {
      if (!fs::is_directory(out_)) throw InvalidArgument("--out " + out_.string() + " exists and is not a directory");
      if (!fs::is_empty(out_) && !fs::exists(out_ / "artifacts.json"))
        throw InvalidArgument("refusing to replace non-empty directory " + out_.string() +
                              " that was not produced by this tool");
    }
    tmp_ = out_.parent_path() / ("." + out_.filename().string() + ".partial");
    fs::remove_all(tmp_);
    fs::create_directories(tmp_);
  }
  Stage(const Stage&) = delete;
  Stage& operator=(const Stage&) = delete;
  ~Stage() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }

  const fs::path& dir() const { return tmp_; }

  fs::path file(const std::string& rel) {
    const fs::path p = tmp_ / rel;
    fs::create_directories(p.parent_path());
    files_.push_back(rel);
    return p;
  }

  void text(const std::string& rel, const std::string& content) { write_text_file(file(rel), content); }

  void commit(const std::string& command, CommandResult& r) {
    json j;
    j["command"] = command;
    j["artifacts"] = files_;
    j["log"] = r.log;
    write_text_file(tmp_ / "artifacts.json", j.dump(1) + "\n");
    fs::remove_all(out_);
    fs::rename(tmp_, out_);
    committed_ = true;
    r.artifacts.clear();
    for (const auto& f : files_) r.artifacts.push_back(out_ / f);
    r.artifacts.push_back(out_ / "artifacts.json");
  }

 private:
  fs::path out_, tmp_;
  std::vector<std::string> files_;
  bool committed_ = false;
};

CommandResult run(const CommandArgs& a, const std::function<void(CommandResult&)>& body) {
  CommandResult r;
  try {
    if (a.threads < 0) throw InvalidArgument("--threads must be >= 0");
    if (a.threads > 0) set_threads(a.threads);
    body(r);
  } catch (const std::bad_alloc&) {
    r.exit_code = kExitCompute;
    r.log.push_back("error: out of memory");
    r.artifacts.clear();
  } catch (const std::exception& e) {
    r.exit_code = exit_code_for(e);
    r.log.push_back(std::string("error: ") + e.what());
    r.artifacts.clear();
  }
  return r;
}

CaptureManifest require_manifest(const CommandArgs& a) {
  if (a.manifest.empty()) throw InvalidArgument("--manifest is required");
  return load_manifest(a.manifest);
}

RunConfig run_config(const CommandArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  return cfg;
}

fs::path pick(const fs::path& flag, const fs::path& from_manifest, const char* what) {
  const fs::path p = flag.empty() ? from_manifest : flag;
  if (p.empty()) throw InvalidArgument(std::string("no ") + what + " given (flag or manifest entry)");
  if (!fs::exists(p)) throw IoError(std::string(what) + " file not found: " + p.string());
  return p;
}

std::vector<std::size_t> camera_selection(const CommandArgs& a, std::size_t count) {
  std::vector<std::size_t> out;
  if (a.cameras.empty()) {
    for (std::size_t i = 0; i < count; ++i) out.push_back(i);
    return out;
  }
  for (int c : a.cameras) {
    if (c < 0 || static_cast<std::size_t>(c) >= count)
      throw InvalidArgument("--camera " + std::to_string(c) + " out of range (0.." + std::to_string(count) + ")");
    out.push_back(static_cast<std::size_t>(c));
  }
  return out;
}

json train_report_json(const TrainReport& rep, std::size_t gaussians) {
  json j;
  j["gaussians"] = gaussians;
  j["optimizer_steps"] = rep.optimizer_steps;
  j["pruned"] = rep.pruned;
  j["culled"] = rep.culled;
  j["final_psnr"] = rep.final_psnr;
  j["view_psnr"] = rep.view_psnr;
  j["loss_curve"] = rep.loss_curve;
  return j;
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

CommandResult cmd_train_hand(const CommandArgs& a) {
  return run(a, [&](CommandResult& r) {
    const CaptureManifest m = require_manifest(a);
    const SkeletonDef skel = load_skeleton(pick(a.skeleton, m.skeleton, "skeleton"));
    const RunConfig cfg = run_config(a);
    const auto views = load_train_views(m, true, false);
    const SkinningGrid grid = build_grid(make_segment_template(skel, cfg.template_samples), cfg.grid_dims,
                                         skeleton_bounds(skel, cfg.grid_margin));
    GaussianCloud cloud = init_from_skeleton(skel, cfg.gaussians_per_bone, cfg.train.seed, cfg.init);
    r.log.push_back("views " + std::to_string(views.size()) + ", initial gaussians " + std::to_string(cloud.size()));

    Stage st(a.out);
    TrainReport rep;
    cloud = train_hand(std::move(cloud), grid, skel, views, cfg.train, &rep);
    save_ply(cloud, st.file("hand.ply"));
    save_grid(grid, st.file("grid.bin"));
    st.text("skeleton.json", skeleton_to_json(skel));
    st.text("report.json", train_report_json(rep, cloud.size()).dump(1) + "\n");
    char line[96];
    std::snprintf(line, sizeof line, "final gaussians %zu, mean train-view PSNR %.3f dB", cloud.size(), rep.final_psnr);
    r.log.push_back(line);
    st.commit("train-hand", r);
  });
}

CommandResult cmd_train_object(const CommandArgs& a) {
  return run(a, [&](CommandResult& r) {
    const CaptureManifest m = require_manifest(a);
    const RunConfig cfg = run_config(a);
    const auto views = load_train_views(m, false, false);
    std::vector<Camera> cams;
    for (const auto& v : views) cams.push_back(v.camera);
    const Vec3 center = cfg.object_center ? *cfg.object_center : cameras_focus(cams);
    GaussianCloud cloud = init_object_ball(center, cfg.object_radius, cfg.object_gaussians, cfg.train.seed, cfg.init);

    Stage st(a.out);
    TrainReport rep;
    cloud = train_object(std::move(cloud), views, cfg.train, &rep);
    ObjectMaskSet masks;
    for (const auto& v : views)
      if (v.mask.width > 0) {
        masks.masks.push_back(v.mask);
        masks.cameras.push_back(v.camera);
      }
    json j = train_report_json(rep, cloud.size());
    if (!masks.masks.empty()) j["outside_masks"] = cloud.size() - mask_survivors(cloud, masks, 1).size();
    save_ply(cloud, st.file("object.ply"));
    st.text("report.json", j.dump(1) + "\n");
    char line[96];
    std::snprintf(line, sizeof line, "final gaussians %zu, mean train-view PSNR %.3f dB", cloud.size(), rep.final_psnr);
    r.log.push_back(line);
    st.commit("train-object", r);
  });
}

CommandResult cmd_fit_pose(const CommandArgs& a) {
  return run(a, [&](CommandResult& r) {
    const CaptureManifest m = require_manifest(a);
    const SkeletonDef skel = load_skeleton(pick(a.skeleton, m.skeleton, "skeleton"));
    const RunConfig cfg = run_config(a);
    if (m.keypoints.empty()) throw InvalidArgument("manifest lists no keypoint files");

    Stage st(a.out);
    std::vector<Pose> poses;
    json frames = json::array();
    double error_sum = 0.0;
    std::vector<KeypointSet3D> targets;
    Pose init = Pose::rest(skel);
    for (std::size_t t = 0; t < m.keypoints.size(); ++t) {
      const KeypointSet2D kps = load_keypoints_2d(m.keypoints[t]);
      if (kps.joint_count() != skel.bone_count())
        throw DimensionError(m.keypoints[t].string() + " has " + std::to_string(kps.joint_count()) +
                             " joints, skeleton has " + std::to_string(skel.bone_count()));
      const KeypointSet3D target = triangulate(kps);
      if (target.valid_count() < 4)
        throw ComputationError("frame " + std::to_string(t) + ": only " + std::to_string(target.valid_count()) +
                               " joints could be triangulated (need 4)");
      const IkResult fit = ik_solve(skel, target, init, cfg.ik);
      init = fit.pose;
      const auto joints = joint_positions(skel, forward_kinematics(skel, fit.pose));
      double err = 0.0;
      for (std::size_t j = 0; j < joints.size(); ++j)
        if (target.valid[j]) err += (joints[j] - target.points[j]).norm();
      err /= static_cast<double>(target.valid_count());
      error_sum += err;

      json f;
      f["frame"] = t;
      f["valid_joints"] = target.valid_count();
      f["reprojection_rms_px"] = reprojection_rms(kps, target);
      f["ik_loss"] = fit.loss;
      f["ik_iterations"] = fit.iterations;
      f["mean_joint_error"] = err;
      f["max_joint_error"] = fit.max_error;
      frames.push_back(f);
      poses.push_back(fit.pose);
      targets.push_back(target);
      st.text("poses/" + numbered("p", t, ".json"), pose_to_json(fit.pose));
      st.text("keypoints3d/" + numbered("t", t, ".json"), keypoints_3d_to_json(target));
    }
    OneEuroParams filter = cfg.filter;
    filter.rate = m.fps;
    const std::vector<Pose> smooth = smooth_poses(poses, filter);
    for (std::size_t t = 0; t < smooth.size(); ++t)
      st.text("smoothed/" + numbered("p", t, ".json"), pose_to_json(smooth[t]));

    if (skel.tips().size() >= 2) {
      std::vector<double> times, ap, ap_mean;
      for (std::size_t t = 0; t < targets.size(); ++t) {
        const auto idx = skel.tips();
        if (!targets[t].valid[static_cast<std::size_t>(idx[0])] || !targets[t].valid[static_cast<std::size_t>(idx[1])])
          continue;
        times.push_back(static_cast<double>(t) / m.fps);
        ap.push_back(grip_aperture(targets[t], skel));
        ap_mean.push_back(grip_aperture_mean_tips(targets[t], skel));
      }
      st.text("aperture.csv", aperture_csv(times, ap, ap_mean));
    }

    json rep;
    rep["frames"] = frames;
    rep["hand_scale"] = skel.rest_extent();
    rep["mean_joint_error"] = error_sum / static_cast<double>(poses.size());
    rep["relative_joint_error"] = error_sum / static_cast<double>(poses.size()) / skel.rest_extent();
    st.text("report.json", rep.dump(1) + "\n");
    char line[128];
    std::snprintf(line, sizeof line, "%zu frames, mean joint error %.3g m (%.3g of hand scale)", poses.size(),
                  rep["mean_joint_error"].get<double>(), rep["relative_joint_error"].get<double>());
    r.log.push_back(line);
    st.commit("fit-pose", r);
  });
}

CommandResult cmd_grasp(const CommandArgs& a) {
  return run(a, [&](CommandResult& r) {
    if (!(a.tau > 0.0) || !std::isfinite(a.tau)) throw InvalidArgument("--tau must be a positive distance");
    CaptureManifest m;
    if (!a.manifest.empty()) m = load_manifest(a.manifest);
    const SkeletonDef skel = load_skeleton(pick(a.skeleton, m.skeleton, "skeleton"));
    const GaussianCloud hand = load_ply(pick(a.hand, m.hand, "hand cloud"));
    const SkinningGrid grid = load_grid(pick(a.grid, m.grid, "skinning grid"));
    const GaussianCloud object = load_ply(pick(a.object, m.object_cloud, "object cloud"));
    if (static_cast<std::size_t>(grid.bones()) != skel.bone_count())
      throw DimensionError("skinning grid has " + std::to_string(grid.bones()) + " bones, skeleton has " +
                           std::to_string(skel.bone_count()));
    std::vector<fs::path> pose_files = a.poses.empty() ? m.poses : sorted_files(a.poses, ".json");
    if (pose_files.empty()) throw InvalidArgument("no pose sequence given (--poses or manifest 'poses')");
    std::vector<Pose> poses;
    for (const auto& p : pose_files) {
      poses.push_back(load_pose(p));
      check_pose(skel, poses.back());
    }

    Stage st(a.out);
    AccumulatedContact acc = AccumulatedContact::empty(hand.size(), object.size(), a.tau);
    json frames = json::array();
    PosedCloud posed;
    for (std::size_t t = 0; t < poses.size(); ++t) {
      posed = pose_cloud(hand, grid, forward_kinematics(skel, poses[t]));
      const ContactMap cm = instantaneous_contact(posed.cloud, object, a.tau);
      acc = accumulate(std::move(acc), cm);
      save_contact(as_record(cm), st.file("contact/" + numbered("f", t, ".bin")));
      frames.push_back({{"frame", t}, {"hand_contacts", cm.hand_count()}, {"object_contacts", cm.object_count()}});
    }
    save_contact(acc, st.file("accumulated.bin"));

    std::vector<std::size_t> hand_idx, object_idx;
    for (std::size_t i = 0; i < acc.hand_touched.size(); ++i)
      if (acc.hand_touched[i]) hand_idx.push_back(i);
    for (std::size_t i = 0; i < acc.object_touched.size(); ++i)
      if (acc.object_touched[i]) object_idx.push_back(i);

    // Renders at the last pose for the requested cameras.
    std::vector<Camera> cams = m.camera_models;
    const auto selected = camera_selection(a, cams.size());
    if (!selected.empty()) {
      const Concatenated scene = concat(object, posed.cloud);
      std::vector<Blend> blends(object.size());
      blends.insert(blends.end(), posed.blends.begin(), posed.blends.end());
      const std::vector<double> intensity = accumulated_intensity(acc);
      for (std::size_t c : selected) {
        const Camera& cam = cams[c];
        save_png(render(scene.cloud, blends, cam, Vec3::Zero()).color,
                 st.file("renders/" + numbered("composed_c", c, ".png")));
        save_png(contact_render_gray(intensity, posed.cloud, cam), st.file("renders/" + numbered("contact_c", c, ".png")));
        save_mask_png(contact_mask_binary(acc.hand_touched, posed.cloud, cam),
                      st.file("masks/" + numbered("contact_c", c, ".png")));
      }
    }

    json rep;
    rep["tau"] = a.tau;
    rep["frames"] = frames;
    rep["hand_touched"] = hand_idx;
    rep["object_touched"] = object_idx;
    st.text("contact.json", rep.dump(1) + "\n");
    r.log.push_back(std::to_string(poses.size()) + " frames, " + std::to_string(hand_idx.size()) +
                    " hand and " + std::to_string(object_idx.size()) + " object Gaussians touched");
    st.commit("grasp", r);
  });
}

CommandResult cmd_evaluate(const CommandArgs& a) {
  return run(a, [&](CommandResult& r) {
    if (a.pred.empty() || a.gt.empty()) throw InvalidArgument("--pred and --gt mask directories are required");
    const auto pred_files = sorted_files(a.pred, ".png");
    const auto gt_files = sorted_files(a.gt, ".png");
    std::vector<std::string> names;
    for (const auto& p : pred_files) names.push_back(p.filename().string());
    std::vector<std::string> gt_names;
    for (const auto& p : gt_files) gt_names.push_back(p.filename().string());
    if (names != gt_names) {
      std::string missing;
      for (const auto& n : names)
        if (!std::binary_search(gt_names.begin(), gt_names.end(), n)) missing += " " + n + "(no truth)";
      for (const auto& n : gt_names)
        if (!std::binary_search(names.begin(), names.end(), n)) missing += " " + n + "(no prediction)";
      throw InvalidArgument("mask sets differ:" + missing);
    }
    if (names.empty()) throw InvalidArgument("no PNG masks in " + a.pred.string());
    std::vector<Mask> pred, gt;
    for (std::size_t i = 0; i < names.size(); ++i) {
      pred.push_back(load_mask_png(pred_files[i]));
      gt.push_back(load_mask_png(gt_files[i]));
      if (pred.back().width != gt.back().width || pred.back().height != gt.back().height)
        throw DimensionError("mask " + names[i] + " differs in size between the two sets");
    }
    const EvaluationReport rep = evaluate_masks(names, pred, gt);
    Stage st(a.out);
    st.text("evaluation.json", evaluation_to_json(rep));
    char line[96];
    std::snprintf(line, sizeof line, "%zu views, mIoU %.4f, mean F1 %.4f", names.size(), rep.mean_iou, rep.mean_f1);
    r.log.push_back(line);
    st.commit("evaluate", r);
  });
}

CommandResult cmd_synth(const CommandArgs& a) {
  return run(a, [&](CommandResult& r) {
    SyntheticOptions o;
    o.kind = parse_scene_kind(a.scene);
    o.views = a.views;
    o.width = a.width;
    o.height = a.height;
    o.tau = a.tau;
    if (a.seed) o.seed = *a.seed;
    if (!(o.tau > 0.0)) throw InvalidArgument("--tau must be a positive distance");
    Stage st(a.out);
    make_synthetic_scene(o, st.dir());
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(st.dir()))
      if (e.is_regular_file()) files.push_back(e.path().lexically_relative(st.dir()).generic_string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) st.file(f);
    r.log.push_back(scene_kind_name(o.kind) + ": " + std::to_string(files.size()) + " files");
    st.commit("synth", r);
  });
}

}  // namespace gsg
