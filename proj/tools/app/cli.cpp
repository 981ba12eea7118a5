#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "bench.hpp"
#include "dataset.hpp"
#include "gom/io.hpp"
#include "gom/error.hpp"
#include "gom/metrics.hpp"
#include "gom/parallel.hpp"
#include "gom/synthetic.hpp"
#include "gom/test_rig.hpp"
#include "server.hpp"
#include "session.hpp"
#include "train_config.hpp"

namespace gom::app {

namespace fs = std::filesystem;

namespace {

std::pair<int, int> parse_size(const std::string& text) {
  int w = 0, h = 0;
  char x = 0, extra = 0;
  std::istringstream in(text);
  if (!(in >> w >> x >> h) || (x != 'x' && x != 'X') || (in >> extra) || w <= 0 || h <= 0) {
    throw ArgumentError("size must look like WxH, got \"" + text + "\"");
  }
  return {w, h};
}

Vec3 parse_color(const std::string& text) {
  Vec3 c;
  char comma1 = 0, comma2 = 0, extra = 0;
  std::istringstream in(text);
  if (!(in >> c.x() >> comma1 >> c.y() >> comma2 >> c.z()) || comma1 != ',' || comma2 != ',' ||
      (in >> extra) || !c.allFinite()) {
    throw ArgumentError("background must look like r,g,b, got \"" + text + "\"");
  }
  return c;
}

RenderMode parse_mode(const std::string& text) {
  if (const auto m = parse_render_mode(text)) return *m;
  throw ArgumentError("unknown render mode \"" + text + "\"");
}

// Keeps the field of view and moves the principal point with the new size.
Camera resized(Camera cam, int width, int height) {
  if (cam.width == width && cam.height == height) return cam;
  const double sx = static_cast<double>(width) / cam.width;
  const double sy = static_cast<double>(height) / cam.height;
  cam.fx *= sx;
  cam.cx *= sx;
  cam.fy *= sy;
  cam.cy *= sy;
  cam.width = width;
  cam.height = height;
  return cam;
}

void write_rgba_png(const RenderedFrame& f, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_binary_file(path, encode_png_rgba8(f.rgba, f.width, f.height));
}

std::string format_double(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

struct PngPair {
  fs::path pred;
  fs::path gt;
};

bool is_mask_name(const fs::path& p) { return p.filename().string().rfind("mask", 0) == 0; }

std::vector<PngPair> matching_pngs(const fs::path& pred_dir, const fs::path& gt_dir) {
  if (!fs::is_directory(gt_dir)) throw IoError(gt_dir.string(), "not a directory");
  if (!fs::is_directory(pred_dir)) throw IoError(pred_dir.string(), "not a directory");
  std::vector<PngPair> pairs;
  for (const auto& entry : fs::directory_iterator(gt_dir)) {
    if (entry.path().extension() != ".png") continue;
    const fs::path pred = pred_dir / entry.path().filename();
    if (!fs::exists(pred)) throw IoError(pred.string(), "missing prediction for " + entry.path().string());
    pairs.push_back({pred, entry.path()});
  }
  std::sort(pairs.begin(), pairs.end(), [](const PngPair& a, const PngPair& b) { return a.gt < b.gt; });
  if (pairs.empty()) throw DataError(gt_dir.string() + ": no .png files");
  return pairs;
}

Server* g_server = nullptr;

extern "C" void stop_server(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaussians-on-Mesh avatar tool", "gom"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: all cores)");

  // fit
  std::string fit_dir, fit_out, fit_config, fit_log;
  std::optional<std::uint64_t> fit_seed;
  auto* fit = app.add_subcommand("fit", "Fit an avatar to a frames directory");
  fit->add_option("frames-dir", fit_dir)->required();
  fit->add_option("out", fit_out, "Output .goma")->required();
  fit->add_option("--config", fit_config, "Training configuration JSON");
  fit->add_option("--seed", fit_seed, "Overrides the configuration seed");
  fit->add_option("--log", fit_log, "Write JSON-lines training records here");

  // render
  std::string r_avatar, r_pose = "identity", r_camera = "default", r_size = "512x512",
                        r_mode = "final", r_out, r_background = "0,0,0";
  bool r_refine = false;
  auto* rnd = app.add_subcommand("render", "Render one frame");
  rnd->add_option("avatar", r_avatar)->required();
  rnd->add_option("--pose", r_pose, "Pose JSON or \"identity\"");
  rnd->add_option("--camera", r_camera, "Camera JSON or \"default\"");
  rnd->add_option("--size", r_size, "WxH");
  rnd->add_option("--mode", r_mode, "final, albedo, shading, normal or mask");
  rnd->add_option("-o,--output", r_out, "Output PNG")->required();
  rnd->add_option("--background", r_background, "r,g,b in [0, 1]");
  rnd->add_flag("--refine", r_refine, "Apply the pose refiner");

  // orbit
  std::string o_avatar, o_out, o_size = "512x512", o_mode = "final", o_pose = "identity";
  int o_frames = 36;
  double o_elevation = 0.0;
  auto* orb = app.add_subcommand("orbit", "Render a turntable");
  orb->add_option("avatar", o_avatar)->required();
  orb->add_option("--frames", o_frames)->check(CLI::PositiveNumber);
  orb->add_option("-o,--output", o_out, "Output directory")->required();
  orb->add_option("--size", o_size, "WxH");
  orb->add_option("--mode", o_mode);
  orb->add_option("--pose", o_pose, "Pose JSON or \"identity\"");
  orb->add_option("--elevation", o_elevation, "Radians");

  // bench
  std::size_t b_gaussians = 100000, b_vertices = 0, b_joints = 24;
  int b_size = 512, b_warmup = 10, b_timed = 100;
  auto* bench = app.add_subcommand("bench", "Time rendering or articulation");
  bench->add_option("--gaussians", b_gaussians)->check(CLI::PositiveNumber);
  bench->add_option("--size", b_size)->check(CLI::PositiveNumber);
  bench->add_option("--vertices", b_vertices, "Time articulation of this many vertices instead");
  bench->add_option("--joints", b_joints)->check(CLI::PositiveNumber);
  bench->add_option("--warmup", b_warmup)->check(CLI::NonNegativeNumber);
  bench->add_option("--timed", b_timed)->check(CLI::PositiveNumber);

  // eval
  std::string e_pred, e_gt, e_pred_avatar, e_gt_avatar;
  auto* ev = app.add_subcommand("eval", "Compare rendered images, masks and meshes");
  ev->add_option("pred-dir", e_pred)->required();
  ev->add_option("gt-dir", e_gt)->required();
  ev->add_option("--pred-avatar", e_pred_avatar);
  ev->add_option("--gt-avatar", e_gt_avatar);

  // subdivide
  std::string s_in, s_out;
  auto* sub = app.add_subcommand("subdivide", "Split every face into four");
  sub->add_option("in", s_in)->required();
  sub->add_option("out", s_out)->required();

  // info
  std::string i_avatar;
  auto* info = app.add_subcommand("info", "Print avatar statistics");
  info->add_option("avatar", i_avatar)->required();

  // serve
  std::string v_avatar, v_bind = "127.0.0.1:8765", v_size = "512x512";
  unsigned v_jobs = 1;
  auto* serve = app.add_subcommand("serve", "Run the websocket render service");
  serve->add_option("avatar", v_avatar)->required();
  serve->add_option("--bind", v_bind, "addr:port");
  serve->add_option("--size", v_size, "Default frame size WxH");
  serve->add_option("--jobs", v_jobs, "Concurrent render jobs")->check(CLI::PositiveNumber);

  // synth
  std::string y_out;
  SyntheticOptions y_opts;
  double y_jitter = 0.005;
  auto* synth = app.add_subcommand("synth", "Write a synthetic tubeman dataset");
  synth->add_option("out-dir", y_out)->required();
  synth->add_option("--frames", y_opts.frames)->check(CLI::PositiveNumber);
  synth->add_option("--width", y_opts.width)->check(CLI::PositiveNumber);
  synth->add_option("--height", y_opts.height)->check(CLI::PositiveNumber);
  synth->add_option("--seed", y_opts.seed);
  synth->add_option("--jitter", y_jitter, "Initial vertex jitter (m)")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (threads > 0) set_thread_count(threads);

    if (*fit) {
      Dataset data = load_dataset(fit_dir);
      TrainConfig cfg = fit_config.empty() ? TrainConfig::desk_scale()
                                           : train_config_from_json(read_text_file(fit_config));
      if (fit_seed) cfg.seed = *fit_seed;
      AvatarBundle init;
      if (data.initial) {
        init = std::move(*data.initial);
      } else {
        const std::size_t joints = data.frames.front().pose.joint_count();
        init.avatar = make_test_rig(joints, 4 * joints, 12);
        init.nets = make_networks(joints, cfg.seed);
        out << "no initial avatar in " << fit_dir << "; starting from a " << joints
            << "-joint tubeman\n";
      }
      std::ofstream log;
      if (!fit_log.empty()) {
        log.open(fit_log);
        if (!log) throw IoError(fit_log, "cannot open for writing");
      }
      const TrainResult r = train(data.frames, init.avatar, init.nets, cfg, [&](const TrainLogRecord& rec) {
        if (log) log << to_json_line(rec) << '\n';
      });
      save_avatar(r.avatar, r.nets, fit_out);
      const LossBreakdown& last = r.log.empty() ? LossBreakdown{} : r.log.back().loss;
      out << "iterations=" << cfg.total_iterations << "\nvertices=" << r.avatar.vertices.size()
          << "\nfaces=" << r.avatar.faces.size() << "\nfinal_loss=" << format_double(last.total) << '\n';
      return 0;
    }

    if (*rnd) {
      const AvatarBundle bundle = load_avatar(r_avatar);
      const auto [w, h] = parse_size(r_size);
      ViewState st;
      st.pose = r_pose == "identity" ? Pose::identity(bundle.avatar.rig.joint_count()) : load_pose(r_pose);
      st.camera = r_camera == "default" ? default_camera(bundle.avatar, w, h)
                                        : resized(load_camera(r_camera), w, h);
      st.mode = parse_mode(r_mode);
      st.background = parse_color(r_background);
      st.refine = r_refine;
      const RenderedFrame f = render_view(bundle, st);
      write_rgba_png(f, r_out);
      out << "wrote " << r_out << " (" << f.width << "x" << f.height << ", "
          << f.gaussian_count << " gaussians)\n";
      return 0;
    }

    if (*orb) {
      const AvatarBundle bundle = load_avatar(o_avatar);
      const auto [w, h] = parse_size(o_size);
      ViewState st;
      st.pose = o_pose == "identity" ? Pose::identity(bundle.avatar.rig.joint_count()) : load_pose(o_pose);
      st.mode = parse_mode(o_mode);
      const Framing frame = default_framing(bundle.avatar, w, h);
      fs::create_directories(o_out);
      for (int i = 0; i < o_frames; ++i) {
        const double az = 2.0 * std::numbers::pi * i / o_frames;
        st.camera = orbit_camera(frame.center, frame.distance, az, o_elevation, w, h, kDefaultFov);
        char name[32];
        std::snprintf(name, sizeof name, "frame_%03d.png", i);
        write_rgba_png(render_view(bundle, st), fs::path(o_out) / name);
      }
      out << "wrote " << o_frames << " frames to " << o_out << '\n';
      return 0;
    }

    if (*bench) {
      if (b_vertices > 0) {
        const Avatar a = make_skinning_scene(b_vertices, b_joints);
        const TimingStats t = bench_articulation(a, b_warmup, b_timed);
        out << "bench=articulation\nvertex_count=" << b_vertices << "\njoint_count=" << b_joints;
        out << "\nthreads=" << thread_count() << "\nwarmup=" << t.warmup << "\nframes=" << t.frames
            << "\nms_per_frame=" << format_double(t.median_ms) << "\np95_ms=" << format_double(t.p95_ms)
            << "\nfps=" << format_double(1000.0 / t.median_ms) << '\n';
        return 0;
      }
      const SplatScene scene = make_splat_scene(b_gaussians, b_size);
      const TimingStats t = bench_render(scene, b_warmup, b_timed);
      out << "bench=render\ngaussian_count=" << b_gaussians << "\nwidth=" << b_size
          << "\nheight=" << b_size << "\nthreads=" << thread_count() << "\nwarmup=" << t.warmup
          << "\nframes=" << t.frames << "\nms_per_frame=" << format_double(t.median_ms)
          << "\np95_ms=" << format_double(t.p95_ms) << "\nfps=" << format_double(1000.0 / t.median_ms)
          << '\n';
      return 0;
    }

    if (*ev) {
      MetricReport report;
      double psnr_sum = 0.0, ssim_sum = 0.0, iou_sum = 0.0;
      std::size_t images = 0, masks = 0;
      for (const PngPair& p : matching_pngs(e_pred, e_gt)) {
        if (is_mask_name(p.gt)) {
          iou_sum += mask_iou(read_png(p.pred, 1), read_png(p.gt, 1));
          ++masks;
        } else {
          const ImageMetrics m = image_metrics(read_png(p.pred, 3), read_png(p.gt, 3));
          psnr_sum += m.psnr;
          ssim_sum += m.ssim;
          ++images;
        }
      }
      if (images > 0) {
        report.entries.emplace_back("images", static_cast<double>(images));
        report.entries.emplace_back("psnr_db", psnr_sum / images);
        report.entries.emplace_back("ssim", ssim_sum / images);
      }
      if (masks > 0) {
        report.entries.emplace_back("masks", static_cast<double>(masks));
        report.entries.emplace_back("mask_iou", iou_sum / masks);
      }
      if (e_pred_avatar.empty() != e_gt_avatar.empty()) {
        throw ArgumentError("--pred-avatar and --gt-avatar go together");
      }
      if (!e_pred_avatar.empty()) {
        const Avatar p = load_avatar(e_pred_avatar).avatar, g = load_avatar(e_gt_avatar).avatar;
        const GeometryMetrics gm = geometry_metrics(p.positions(), p.faces, g.positions(), g.faces);
        report.entries.emplace_back("chamfer_m2", gm.chamfer);
        report.entries.emplace_back("normal_consistency", gm.normal_consistency);
      }
      out << report.to_text();
      return 0;
    }

    if (*sub) {
      const AvatarBundle b = load_avatar(s_in);
      const Avatar s = subdivide(b.avatar);
      save_avatar(s, b.nets, s_out);
      out << "faces " << b.avatar.faces.size() << " -> " << s.faces.size() << ", vertices "
          << b.avatar.vertices.size() << " -> " << s.vertices.size() << '\n';
      return 0;
    }

    if (*info) {
      const AvatarBundle b = load_avatar(i_avatar);
      const Avatar& a = b.avatar;
      out << "V=" << a.vertices.size() << "\nF=" << a.faces.size() << "\nJ=" << a.rig.joint_count()
          << "\nsubdivision_level=" << a.subdivision_level << "\nepsilon=" << format_double(a.epsilon)
          << "\ndeformer=" << (b.nets.deformer.layers.empty() ? "absent" : "present")
          << "\nrefiner=" << (b.nets.refiner.layers.empty() ? "absent" : "present")
          << "\nshading=" << (b.nets.shading.layers.empty() ? "absent" : "present") << '\n';
      return 0;
    }

    if (*serve) {
      auto bundle = std::make_shared<const AvatarBundle>(load_avatar(v_avatar));
      const auto [host, port] = parse_bind_address(v_bind);
      const auto [w, h] = parse_size(v_size);
      Server server(bundle, host, port, ServerOptions{w, h, v_jobs});
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      out << "serving " << v_avatar << " on ws://" << host << ":" << server.port() << std::endl;
      server.run();
      g_server = nullptr;
      return 0;
    }

    if (*synth) {
      const SyntheticScene scene = make_synthetic_scene(y_opts);
      const fs::path dir = y_out;
      const AvatarBundle init{perturbed_initialization(scene.truth, y_jitter, y_opts.seed + 1),
                              make_networks(scene.truth.rig.joint_count(), y_opts.seed)};
      save_dataset(dir, scene.train, &init);
      save_dataset(dir / "held_out", {scene.held_out});
      save_avatar(scene.truth, scene.truth_nets, dir / "truth.goma");
      out << "wrote " << scene.train.size() << " training frames, 1 held-out frame, truth.goma and "
          << "initial.goma to " << y_out << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace gom::app
