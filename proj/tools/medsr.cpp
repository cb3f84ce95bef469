// medsr command-line entry point.

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "medsr/checkpoint.hpp"
#include "medsr/dataset.hpp"
#include "medsr/evaluate.hpp"
#include "medsr/figure.hpp"
#include "medsr/phantom.hpp"
#include "medsr/pipeline.hpp"
#include "medsr/png_io.hpp"
#include "medsr/resize.hpp"
#include "medsr/study.hpp"
#include "medsr/volume_io.hpp"

namespace fs = std::filesystem;
using namespace medsr;

namespace {

void log(const std::string& msg) { std::cerr << "[medsr] " << msg << std::endl; }

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string extents(const Volume& v) {
  return std::to_string(v.width) + "x" + std::to_string(v.height) + "x" + std::to_string(v.depth);
}

// ---- phantom ----

struct PhantomArgs {
  fs::path out;
  std::size_t count = 8, test = 2;
  std::size_t width = 64, height = 64, depth = 64;
  std::uint64_t seed = 100;
  std::string kind;
  std::size_t r = 2;
  std::string axes = "xy";
};

int run_phantom(const PhantomArgs& a) {
  if (a.test > a.count) throw std::invalid_argument("--test exceeds --count");
  fs::create_directories(a.out);
  const PhantomKind cycle[] = {PhantomKind::SheppLike, PhantomKind::Spheres, PhantomKind::Ramps};
  DatasetManifest m;
  m.r = a.r;
  m.axes = parse_volume_axes(a.axes);
  m.seed = a.seed;
  for (std::size_t i = 0; i < a.count; ++i) {
    const PhantomKind kind = a.kind.empty() ? cycle[i % 3] : parse_phantom_kind(a.kind);
    char name[32];
    std::snprintf(name, sizeof name, "phantom_%02zu.json", i);
    const Volume v = generate_phantom(kind, a.width, a.height, a.depth, a.seed + i);
    save_volume_raw(v, a.out / name);
    m.entries.push_back({name, i + a.test >= a.count ? Split::Test : Split::Train});
  }
  m.validate();
  save_manifest(m, a.out / "manifest.json");
  log("wrote " + std::to_string(a.count) + " phantoms and " + (a.out / "manifest.json").string());
  return 0;
}

// ---- prepare ----

int run_prepare(const fs::path& manifest_path, const fs::path& out, std::optional<std::size_t> r,
                const std::string& axes, bool force) {
  DatasetManifest m = load_manifest(manifest_path);
  if (r) m.r = *r;
  if (!axes.empty()) m.axes = parse_volume_axes(axes);
  const auto ds = prepare_dataset(m, manifest_path.parent_path(), out, force);
  for (const auto& e : ds.entries) {
    log(e.name + " (" + to_string(e.split) + "): hr " + extents(load_volume(e.hr)) + " lr " +
        extents(load_volume(e.lr)));
  }
  log("prepared " + std::to_string(ds.entries.size()) + " volumes, r=" + std::to_string(ds.r) +
      " axes=" + to_string(ds.axes));
  return 0;
}

// ---- train ----

struct TrainArgs {
  fs::path dataset, out, xy;
  std::string stage = "xy";
  TrainConfig cfg;
  double fixed_sigma = -1.0;
  std::size_t filters = 32;
  bool no_second_block = false, no_intermediate_loss = false, no_short_skips = false, no_long_skip = false;
  bool relu_before_shuffle = false, relu_on_output = false;
  bool dry_run = false;
};

SRNetConfig net_config(const TrainArgs& a, std::size_t r, bool depth_stage) {
  SRNetConfig c;
  c.scale_factor = r;
  c.axis_mode = depth_stage ? AxisMode::OneAxis : AxisMode::TwoAxes;
  c.shuffle_axis = ShuffleAxis::Rows;
  c.base_filters = a.filters;
  c.enable_second_block = !a.no_second_block;
  c.enable_intermediate_loss = !a.no_intermediate_loss;
  c.enable_short_skips = !a.no_short_skips;
  c.enable_long_skip = !a.no_long_skip;
  c.relu_before_shuffle = a.relu_before_shuffle;
  c.relu_on_output = a.relu_on_output;
  c.lambda = a.cfg.lambda;
  c.validate();
  return c;
}

int run_train(TrainArgs a) {
  if (a.fixed_sigma >= 0.0) a.cfg.fixed_sigma = a.fixed_sigma;
  a.cfg.validate();
  const auto ds = load_prepared_dataset(a.dataset);
  const bool depth_stage = a.stage == "z";
  if (!depth_stage && a.stage != "xy") throw std::invalid_argument("--stage must be xy or z");
  if (depth_stage && ds.axes == VolumeAxes::XY) throw std::invalid_argument("dataset degrades only x/y; no z stage");
  if (!depth_stage && ds.axes == VolumeAxes::Z) throw std::invalid_argument("dataset degrades only z; no xy stage");

  std::optional<SRNet> net_xy;
  if (depth_stage && ds.axes == VolumeAxes::XYZ) {
    if (a.xy.empty()) throw std::invalid_argument("--xy checkpoint required to train the z stage of an xyz dataset");
    net_xy = load_checkpoint(a.xy);
  }

  const SRNetConfig config = net_config(a, ds.r, depth_stage);
  std::cout << "stage=" << a.stage << " r=" << ds.r << " patch=" << a.cfg.patch_size << " filters=" << a.filters
            << " batch=" << a.cfg.batch_size << " epochs=" << a.cfg.epochs << " lr=" << a.cfg.lr_initial << "/"
            << a.cfg.lr_after_epoch_20 << "@" << a.cfg.lr_drop_epoch << " lambda=" << a.cfg.lambda
            << " second_block=" << config.enable_second_block
            << " intermediate_loss=" << config.enable_intermediate_loss << " seed=" << a.cfg.seed << std::endl;
  if (a.dry_run) return 0;

  std::vector<PatchPair> pairs;
  for (const auto& e : ds.split(Split::Train)) {
    const Volume hr = load_volume(e.hr);
    Volume lr;
    if (!depth_stage) {
      lr = degrade_volume(hr, ds.r, VolumeAxes::XY);
    } else if (net_xy) {
      lr = upscale_axial(*net_xy, degrade_volume(hr, ds.r, VolumeAxes::XYZ));
    } else {
      lr = degrade_volume(hr, ds.r, VolumeAxes::Z);
    }
    auto p = extract_patches(lr, hr, a.cfg, config.axis_mode, ds.r, e.name);
    pairs.insert(pairs.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  if (pairs.empty()) throw std::invalid_argument("no training patches (no train volumes, or volumes too small)");
  log(std::to_string(pairs.size()) + " patch pairs");

  fs::create_directories(a.out);
  SRNet net = build_network<float>(config, derive_seed(a.cfg.seed, depth_stage ? 2 : 1));
  std::ofstream csv(a.out / "loss.csv");
  csv << "epoch,mean_loss,learning_rate\n";
  train_stage(pairs, net, a.cfg, [&](const EpochStats& s, const SRNet& current) {
    csv << s.epoch << "," << s.mean_loss << "," << s.learning_rate << "\n" << std::flush;
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%03zu.ckpt", s.epoch);
    save_checkpoint(current, a.out / name);
    log("epoch " + std::to_string(s.epoch) + " loss " + std::to_string(s.mean_loss));
  });
  save_checkpoint(net, a.out / "final.ckpt");
  log("wrote " + (a.out / "final.ckpt").string());
  return 0;
}

// ---- infer ----

Volume run_networks(const std::optional<SRNet>& xy, const std::optional<SRNet>& z, VolumeAxes axes,
                    const Volume& input, bool ensemble) {
  switch (axes) {
    case VolumeAxes::XY:
      if (!xy) throw std::invalid_argument("--axes xy needs an --xy checkpoint");
      return upscale_axial(*xy, input, ensemble);
    case VolumeAxes::Z:
      if (!z) throw std::invalid_argument("--axes z needs a --z checkpoint");
      return upscale_depth(*z, input);
    case VolumeAxes::XYZ:
      if (!xy) throw std::invalid_argument("--axes xyz needs an --xy checkpoint");
      if (!z) throw std::invalid_argument("--axes xyz needs a --z checkpoint");
      if (xy->config().scale_factor != z->config().scale_factor)
        throw std::invalid_argument("--xy and --z checkpoints use different scale factors");
      return upscale_depth(*z, upscale_axial(*xy, input, ensemble));
  }
  throw std::logic_error("unreachable");
}

std::optional<SRNet> maybe_load(const fs::path& p) {
  if (p.empty()) return std::nullopt;
  return load_checkpoint(p);
}

int run_infer(const fs::path& xy_path, const fs::path& z_path, const fs::path& input, const fs::path& output,
              std::string axes, bool ensemble) {
  if (axes.empty()) axes = z_path.empty() ? "xy" : "xyz";
  const auto xy = maybe_load(xy_path);
  const auto z = maybe_load(z_path);
  const Volume in = load_volume(input);
  const Volume out = run_networks(xy, z, parse_volume_axes(axes), in, ensemble);
  save_volume(out, output);
  log(extents(in) + " -> " + extents(out) + (ensemble ? " (self-ensemble)" : ""));
  return 0;
}

// ---- evaluate ----

struct EvalArgs {
  fs::path dataset, out, xy, z, figure;
  std::string methods = "bilinear,bicubic,lanczos";
  bool per_slice = false, eight_bit = false, ensemble = false;
};

MetricReport per_slice_report(const Reconstructor& method, const std::vector<PreparedEntry>& test, std::size_t r,
                              const MetricOptions& options) {
  MetricReport report;
  report.options = options;
  report.degradation = "box average, r=" + std::to_string(r) + ", axes=xy, per axial slice";
  for (const auto& e : test) {
    const Volume hr = load_volume(e.hr);
    const Volume rec = method(load_volume(e.lr));
    for (std::size_t z = 0; z < hr.depth; ++z) {
      Volume a(hr.width, hr.height, 1), b(hr.width, hr.height, 1);
      a.set_axial(0, hr.axial(z));
      b.set_axial(0, rec.axial(z));
      MetricRow row = compare_volumes(a, b, VolumeAxes::XY, options);
      char id[16];
      std::snprintf(id, sizeof id, "/z%04zu", z);
      row.image_id = e.name + id;
      report.rows.push_back(row);
    }
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const MetricRow& x, const MetricRow& y) { return x.image_id < y.image_id; });
  return report;
}

int run_evaluate(const EvalArgs& a) {
  const auto ds = load_prepared_dataset(a.dataset);
  const auto test = ds.split(Split::Test);
  if (test.empty()) throw std::invalid_argument("dataset has no test volumes");
  if (a.per_slice && ds.axes != VolumeAxes::XY) throw std::invalid_argument("--per-slice needs an xy dataset");
  const MetricOptions options{a.eight_bit};
  const auto xy = maybe_load(a.xy);
  const auto z = maybe_load(a.z);

  std::vector<std::pair<std::string, Reconstructor>> methods;
  for (const auto& name : split_list(a.methods)) {
    if (name == "identity") {
      if (ds.r != 1) throw std::invalid_argument("identity method needs r=1");
      methods.emplace_back(name, [](const Volume& lr) { return lr; });
    } else if (name == "net") {
      methods.emplace_back(name, [&, axes = ds.axes](const Volume& lr) {
        return run_networks(xy, z, axes, lr, a.ensemble);
      });
    } else {
      methods.emplace_back(name, interpolation_reconstructor(parse_interp_method(name), ds.r, ds.axes));
    }
  }
  if (methods.empty()) throw std::invalid_argument("--methods is empty");

  std::vector<DatasetItem> items;
  if (!a.per_slice)
    for (const auto& e : test) items.push_back({e.name, load_volume(e.hr)});

  fs::create_directories(a.out);
  for (const auto& [name, method] : methods) {
    const MetricReport report =
        a.per_slice ? per_slice_report(method, test, ds.r, options) : evaluate(method, items, ds.r, ds.axes, options);
    std::ofstream(a.out / (name + ".csv")) << report.to_csv();
    std::cout << "== " << name << "\n" << report.to_table() << std::flush;
  }

  if (!a.figure.empty()) {
    const Volume hr = load_volume(test.front().hr);
    const Volume lr = load_volume(test.front().lr);
    const std::size_t zs = hr.depth / 2;
    std::vector<NamedImage> panels;
    for (const auto& [name, method] : methods) panels.emplace_back(name, method(lr).axial(zs));
    export_comparison(hr.axial(zs), panels, a.figure);
    log("wrote " + a.figure.string());
  }
  return 0;
}

// ---- study ----

int run_study_prepare(const fs::path& dataset, const fs::path& xy_path, const fs::path& out, std::size_t pairs,
                      std::uint64_t seed) {
  const auto ds = load_prepared_dataset(dataset);
  if (ds.axes != VolumeAxes::XY) throw std::invalid_argument("study-prepare needs an xy dataset");
  const auto test = ds.split(Split::Test);
  if (test.empty()) throw std::invalid_argument("dataset has no test volumes");
  const SRNet net = load_checkpoint(xy_path);
  if (net.config().scale_factor != ds.r) throw std::invalid_argument("checkpoint scale factor differs from dataset r");

  std::vector<Volume> hr, lr;
  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t i = 0; i < test.size(); ++i) {
    hr.push_back(load_volume(test[i].hr));
    lr.push_back(load_volume(test[i].lr));
    for (std::size_t zz = 0; zz < hr.back().depth; ++zz) slots.emplace_back(i, zz);
  }
  std::mt19937_64 rng(derive_seed(seed, 0x57d));
  std::shuffle(slots.begin(), slots.end(), rng);
  slots.resize(std::min(pairs, slots.size()));

  const fs::path pool = out / ("x" + std::to_string(ds.r));
  fs::create_directories(pool);
  std::ofstream(out / "methods.json") << R"({"method_a": "net", "method_b": "lanczos"})" << "\n";
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto [i, zz] = slots[k];
    char name[32];
    std::snprintf(name, sizeof name, "p%03zu", k);
    const fs::path dir = pool / name;
    fs::create_directories(dir);
    const Tensor slice = lr[i].axial(zz);
    write_png_gray(dir / "original.png", hr[i].axial(zz));
    write_png_gray(dir / "method_a.png", super_resolve_2d(net, slice));
    write_png_gray(dir / "method_b.png", resize(slice, double(ds.r), InterpMethod::Lanczos));
  }
  log("rendered " + std::to_string(slots.size()) + " pairs into " + pool.string());
  return 0;
}

StudyHttpServer* g_server = nullptr;

int run_study_serve(const fs::path& results, const std::string& host, int port, std::uint64_t seed,
                    fs::path votes) {
  if (votes.empty()) votes = results / "votes.jsonl";
  StudyService service(results, seed, votes);
  StudyHttpServer server(service);
  const int bound = server.bind(host, port);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  std::cout << "listening on " << host << ":" << bound << std::endl;
  g_server = &server;
  std::signal(SIGINT, [](int) { g_server->stop(); });
  std::signal(SIGTERM, [](int) { g_server->stop(); });
  server.listen();
  g_server = nullptr;
  return 0;
}

int run_study_report(const fs::path& votes, bool as_json) {
  const auto report = study_report(votes);
  if (report.skipped_lines) log("skipped " + std::to_string(report.skipped_lines) + " corrupt lines");
  if (as_json)
    std::cout << report.to_json().dump(2) << "\n";
  else
    std::cout << report.to_table();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"medsr: two-stage CNN super-resolution for 2D slices and 3D volumes"};
  app.require_subcommand(1);

  PhantomArgs ph;
  auto* phantom = app.add_subcommand("phantom", "Generate synthetic volumes and a manifest");
  phantom->add_option("--out", ph.out, "Output directory")->required();
  phantom->add_option("--count", ph.count, "Number of volumes");
  phantom->add_option("--test", ph.test, "How many of them (the last ones) form the test split");
  phantom->add_option("--width", ph.width);
  phantom->add_option("--height", ph.height);
  phantom->add_option("--depth", ph.depth);
  phantom->add_option("--seed", ph.seed, "Seed of the first volume; volume i uses seed+i");
  phantom->add_option("--kind", ph.kind, "spheres, ramps or shepp_like (default: cycle)");
  phantom->add_option("--r", ph.r, "Scale factor recorded in the manifest");
  phantom->add_option("--axes", ph.axes, "Degraded axes recorded in the manifest (xy, z, xyz)");

  fs::path manifest, prep_out;
  std::optional<std::size_t> prep_r;
  std::string prep_axes;
  bool force = false;
  auto* prepare = app.add_subcommand("prepare", "Crop, normalize and degrade the volumes of a manifest");
  prepare->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  prepare->add_option("--out", prep_out)->required();
  prepare->add_option("--r", prep_r, "Override the manifest scale factor");
  prepare->add_option("--axes", prep_axes, "Override the manifest axes");
  prepare->add_flag("--force", force, "Replace a non-empty output directory");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train one stage on a prepared dataset");
  train->add_option("--dataset", ta.dataset)->required()->check(CLI::ExistingDirectory);
  train->add_option("--stage", ta.stage, "xy (stage 1) or z (stage 2)");
  train->add_option("--out", ta.out, "Run directory for loss.csv and checkpoints")->required();
  train->add_option("--xy", ta.xy, "Stage-1 checkpoint producing the z-stage input of xyz datasets");
  train->add_option("--patch-size", ta.cfg.patch_size);
  train->add_option("--batch-size", ta.cfg.batch_size);
  train->add_option("--epochs", ta.cfg.epochs);
  train->add_option("--lr-initial", ta.cfg.lr_initial);
  train->add_option("--lr-after-epoch-20", ta.cfg.lr_after_epoch_20);
  train->add_option("--lr-drop-epoch", ta.cfg.lr_drop_epoch, "0-based epoch where the second rate starts");
  train->add_option("--lambda", ta.cfg.lambda, "Weight of the intermediate loss");
  train->add_option("--blur-probability", ta.cfg.blur_probability);
  train->add_option("--sigma-max", ta.cfg.sigma_max);
  train->add_option("--fixed-sigma", ta.fixed_sigma, "Blur sigma instead of a random draw");
  train->add_option("--stride", ta.cfg.stride);
  train->add_option("--seed", ta.cfg.seed);
  train->add_option("--filters", ta.filters);
  train->add_flag("--no-second-block", ta.no_second_block);
  train->add_flag("--no-intermediate-loss", ta.no_intermediate_loss);
  train->add_flag("--no-short-skips", ta.no_short_skips);
  train->add_flag("--no-long-skip", ta.no_long_skip);
  train->add_flag("--relu-before-shuffle", ta.relu_before_shuffle);
  train->add_flag("--relu-on-output", ta.relu_on_output);
  train->add_flag("--dry-run", ta.dry_run, "Print the resolved configuration and exit");

  fs::path inf_xy, inf_z, inf_in, inf_out;
  std::string inf_axes;
  bool inf_ensemble = false;
  auto* infer_cmd = app.add_subcommand("infer", "Super-resolve a volume");
  infer_cmd->add_option("--xy", inf_xy, "Stage-1 checkpoint");
  infer_cmd->add_option("--z", inf_z, "Stage-2 checkpoint");
  infer_cmd->add_option("--input", inf_in)->required();
  infer_cmd->add_option("--output", inf_out)->required();
  infer_cmd->add_option("--axes", inf_axes, "xy, z or xyz (default: xyz when --z is given, else xy)");
  infer_cmd->add_flag("--ensemble", inf_ensemble, "Median over the 8 dihedral transforms per axial slice");

  EvalArgs ea;
  auto* eval = app.add_subcommand("evaluate", "Score methods on the test split");
  eval->add_option("--dataset", ea.dataset)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--methods", ea.methods, "Comma list of nearest, bilinear, bicubic, lanczos, identity, net");
  eval->add_option("--out", ea.out, "Directory for <method>.csv")->required();
  eval->add_option("--xy", ea.xy);
  eval->add_option("--z", ea.z);
  eval->add_flag("--per-slice", ea.per_slice, "One row per axial test slice instead of per volume");
  eval->add_flag("--eight-bit", ea.eight_bit, "Score 8-bit quantized images with peak 255");
  eval->add_flag("--ensemble", ea.ensemble);
  eval->add_option("--figure", ea.figure, "PNG comparing the methods on a middle test slice");

  fs::path sp_dataset, sp_xy, sp_out;
  std::size_t sp_pairs = kPairsPerSession;
  std::uint64_t sp_seed = 1;
  auto* sprep = app.add_subcommand("study-prepare", "Render study pairs (net vs lanczos) from test slices");
  sprep->add_option("--dataset", sp_dataset)->required()->check(CLI::ExistingDirectory);
  sprep->add_option("--xy", sp_xy)->required()->check(CLI::ExistingFile);
  sprep->add_option("--out", sp_out)->required();
  sprep->add_option("--pairs", sp_pairs);
  sprep->add_option("--seed", sp_seed);

  fs::path ss_results, ss_votes;
  std::string ss_host = "127.0.0.1";
  int ss_port = 8080;
  std::uint64_t ss_seed = 1;
  auto* serve = app.add_subcommand("study-serve", "Serve the pairwise study API");
  serve->add_option("--results", ss_results)->required()->check(CLI::ExistingDirectory);
  serve->add_option("--host", ss_host);
  serve->add_option("--port", ss_port, "0 picks a free port");
  serve->add_option("--seed", ss_seed, "Study seed for pair order and sides");
  serve->add_option("--votes", ss_votes, "Vote log (default <results>/votes.jsonl)");

  fs::path sr_votes;
  bool sr_json = false;
  auto* sreport = app.add_subcommand("study-report", "Aggregate a vote log");
  sreport->add_option("--votes", sr_votes)->required();
  sreport->add_flag("--json", sr_json);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*phantom) return run_phantom(ph);
    if (*prepare) return run_prepare(manifest, prep_out, prep_r, prep_axes, force);
    if (*train) return run_train(ta);
    if (*infer_cmd) return run_infer(inf_xy, inf_z, inf_in, inf_out, inf_axes, inf_ensemble);
    if (*eval) return run_evaluate(ea);
    if (*sprep) return run_study_prepare(sp_dataset, sp_xy, sp_out, sp_pairs, sp_seed);
    if (*serve) return run_study_serve(ss_results, ss_host, ss_port, ss_seed, ss_votes);
    if (*sreport) return run_study_report(sr_votes, sr_json);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
