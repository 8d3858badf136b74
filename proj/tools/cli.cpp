#include "cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "spnet/checkpoint.hpp"
#include "spnet/dataset.hpp"
#include "spnet/errors.hpp"
#include "spnet/gradcheck.hpp"
#include "spnet/kernel_layout.hpp"
#include "spnet/ply.hpp"
#include "spnet/sampling.hpp"
#include "spnet/training.hpp"

namespace spnet {
namespace {

constexpr int kUsage = 2;
constexpr int kFailure = 1;

struct TrainArgs {
  std::string config, out, train_data, test_data;
  bool quiet = false;
};

struct EvalArgs {
  std::string checkpoint, data, out;
};

struct GradcheckArgs {
  std::string target = "spconv";
  std::uint64_t seed = 0;
};

struct SampleArgs {
  std::string input, out, method = "pds";
  double radius = 0.0;
  std::uint64_t seed = 0;
  bool ascii = false;
};

struct KernelArgs {
  std::string out;
  std::size_t shells = 3, points = 14;
  double v = 0.04;
  std::uint64_t seed = 42;
  bool ascii = true;
};

struct GenArgs {
  std::string out;
  std::uint64_t seed = 0;
  std::size_t scenes = 25;
  SyntheticSceneSpec spec;
};

int run_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg = TrainConfig::from_file(a.config);
  if (!a.train_data.empty()) cfg.train_data = a.train_data;
  if (!a.test_data.empty()) cfg.test_data = a.test_data;
  if (cfg.train_data.empty()) throw InputError("no training data: set train_data in the config or pass --train-data");
  const Dataset train_set = load_dataset(cfg.train_data);
  Dataset test_set;
  if (!cfg.test_data.empty()) test_set = load_dataset(cfg.test_data);

  std::filesystem::create_directories(a.out);
  std::ofstream(std::filesystem::path(a.out) / "config.txt") << cfg.to_text();
  const auto start = std::chrono::steady_clock::now();
  auto progress = [&](const EpochMetrics& m) {
    if (a.quiet) return;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char line[256];
    std::snprintf(line, sizeof line, "epoch %3zu  lr %.2e  loss %.4f  oa %.4f  miou %.4f", m.epoch, m.lr,
                  m.loss, m.train_oa, m.train_miou);
    out << line;
    if (m.test_oa) {
      std::snprintf(line, sizeof line, "  test_oa %.4f  test_miou %.4f", *m.test_oa, *m.test_miou);
      out << line;
    }
    std::snprintf(line, sizeof line, "  (%.0f s)\n", secs);
    out << line << std::flush;
  };
  const TrainResult r = train(cfg, train_set, test_set.empty() ? nullptr : &test_set, a.out, progress,
                              default_cache_dir());
  out << "checkpoint: " << r.checkpoint.string() << "\nmetrics: " << r.metrics_log.string() << '\n';
  return 0;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  Network<float> net = load_checkpoint(a.checkpoint);
  const Dataset data = load_dataset(a.data);
  const EvalReport report = evaluate(net, data);
  out << report_text(report);
  if (!a.out.empty()) {
    std::filesystem::path path(a.out);
    if (std::filesystem::is_directory(path)) path /= "metrics.tsv";
    write_file_atomic(path, report_tsv(report));
  }
  return 0;
}

int run_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  std::vector<std::string> targets;
  if (a.target == "all") {
    targets = gradcheck_targets();
  } else {
    targets.push_back(a.target);
  }
  bool ok = true;
  for (const std::string& t : targets) {
    auto problem = make_gradcheck_problem(t, a.seed);
    GradcheckReport report = gradcheck(*problem);
    report.target = t;
    out << report.to_text();
    ok = ok && report.passed();
  }
  return ok ? 0 : kFailure;
}

int run_sample(const SampleArgs& a, std::ostream& out) {
  const PointCloud cloud = read_ply(a.input);
  PointCloud result;
  if (a.method == "pds") {
    result = cloud.subset(poisson_disk_sample(cloud, a.radius, a.seed));
  } else if (a.method == "grid") {
    result = grid_subsample(cloud, a.radius);
  } else {
    throw ParameterError("unknown sampling method '" + a.method + "'");
  }
  write_ply(a.out, result, a.ascii ? PlyFormat::ascii : PlyFormat::binary_little_endian);
  out << cloud.size() << " -> " << result.size() << " points\n";
  return 0;
}

int run_kernel_dump(const KernelArgs& a, std::ostream& out) {
  std::vector<double> radii;
  NetworkSpec spec;
  spec.num_shells = a.shells;
  spec.v0 = a.v;
  radii = spec.shell_radii(0);
  const KernelLayout layout = build_layout(a.shells, a.points, radii, a.v, a.seed, default_cache_dir());
  PointCloud cloud;
  cloud.positions = layout.points;
  for (std::uint16_t s : layout.shell_of) cloud.labels.push_back(s);
  write_ply(a.out, cloud, a.ascii ? PlyFormat::ascii : PlyFormat::binary_little_endian);
  out << layout.total_kernel_count() << " kernel points in " << layout.shell_count() << " shells\n";
  return 0;
}

int run_gen_data(const GenArgs& a, std::ostream& out) {
  const Dataset d = write_synthetic_dataset(a.out, a.scenes, a.seed, a.spec);
  std::size_t points = 0;
  for (const auto& s : d.scenes) points += s.size();
  out << d.size() << " scenes, " << points << " points written to " << a.out << '\n';
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shell point convolution segmentation toolkit", "spnet"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  train_cmd->add_option("--config", train_args.config, "key = value config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();
  train_cmd->add_option("--train-data", train_args.train_data, "Override train_data");
  train_cmd->add_option("--test-data", train_args.test_data, "Override test_data");
  train_cmd->add_flag("--quiet", train_args.quiet, "No per-epoch progress");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled dataset");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_args.data, "PLY file, manifest or directory")->required();
  eval_cmd->add_option("--out", eval_args.out, "Metrics TSV path (or directory)");

  GradcheckArgs gc_args;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  std::vector<std::string> targets = gradcheck_targets();
  targets.push_back("all");
  gc_cmd->add_option("--target", gc_args.target, "Instance to check")->check(CLI::IsMember(targets));
  gc_cmd->add_option("--seed", gc_args.seed, "Instance seed");

  SampleArgs sample_args;
  auto* sample_cmd = app.add_subcommand("sample", "Subsample a PLY point cloud");
  sample_cmd->add_option("--input", sample_args.input, "Input PLY")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("--out", sample_args.out, "Output PLY")->required();
  sample_cmd->add_option("--radius", sample_args.radius, "PDS radius or grid cell (m)")->required();
  sample_cmd->add_option("--seed", sample_args.seed, "Shuffle seed");
  sample_cmd->add_option("--method", sample_args.method, "pds or grid")->check(CLI::IsMember({"pds", "grid"}));
  sample_cmd->add_flag("--ascii", sample_args.ascii, "Write ASCII PLY");

  KernelArgs kernel_args;
  auto* kernel_cmd = app.add_subcommand("kernel-dump", "Write the kernel layout as PLY (label = shell)");
  kernel_cmd->add_option("--out", kernel_args.out, "Output PLY")->required();
  kernel_cmd->add_option("--shells", kernel_args.shells, "Shell count");
  kernel_cmd->add_option("--points", kernel_args.points, "Points per outer shell");
  kernel_cmd->add_option("--v", kernel_args.v, "Kernel influence v (m)");
  kernel_cmd->add_option("--seed", kernel_args.seed, "Layout seed");

  GenArgs gen_args;
  gen_args.spec.quantum = std::ldexp(1.0, -20);
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate labeled synthetic scenes");
  gen_cmd->add_option("--out", gen_args.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen_args.seed, "Dataset seed");
  gen_cmd->add_option("--scenes", gen_args.scenes, "Scene count");
  gen_cmd->add_option("--planes", gen_args.spec.planes, "Planes per scene");
  gen_cmd->add_option("--spheres", gen_args.spec.spheres, "Spheres per scene");
  gen_cmd->add_option("--boxes", gen_args.spec.boxes, "Boxes per scene");
  gen_cmd->add_option("--points-per-primitive", gen_args.spec.points_per_primitive, "Points per primitive");
  gen_cmd->add_option("--noise", gen_args.spec.noise, "Positional noise sigma (m)");
  gen_cmd->add_option("--hue-spread", gen_args.spec.hue_spread, "Per-primitive hue spread around the class hue");
  gen_cmd->add_option("--quantum", gen_args.spec.quantum, "Position grid step (0 disables)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*train_cmd) return run_train(train_args, out);
    if (*eval_cmd) return run_eval(eval_args, out);
    if (*gc_cmd) return run_gradcheck(gc_args, out);
    if (*sample_cmd) return run_sample(sample_args, out);
    if (*kernel_cmd) return run_kernel_dump(kernel_args, out);
    if (*gen_cmd) return run_gen_data(gen_args, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace spnet
