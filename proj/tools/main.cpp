#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>

#include "polyflow/bench.hpp"
#include "polyflow/config.hpp"
#include "polyflow/io.hpp"
#include "polyflow/pipeline.hpp"

namespace fs = std::filesystem;
using polyflow::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

polyflow::RunConfig load_config(const CommonOpts& opts,
                                const std::function<void(json&)>& patch = {}) {
  json doc = json::object();
  if (!opts.config_path.empty())
    doc = polyflow::read_json(opts.config_path);
  if (opts.seed) doc["seed"] = *opts.seed;
  if (opts.out_dir) doc["out_dir"] = *opts.out_dir;
  if (patch) patch(doc);
  return polyflow::RunConfig::from_json(doc);
}

std::vector<polyflow::Demo> generate_demos(const polyflow::RunConfig& cfg) {
  polyflow::Rng rng = polyflow::Rng(cfg.seed).split(/*stream=*/1);
  std::vector<polyflow::Demo> demos;
  demos.reserve(cfg.demos);
  for (int i = 0; i < cfg.demos; ++i)
    demos.push_back(polyflow::gen_demo(cfg.task, cfg.task_params, rng));
  return demos;
}

int cmd_gen_data(const polyflow::RunConfig& cfg) {
  const fs::path root = cfg.out_root();
  const std::string hash = cfg.hash();
  const auto demos = generate_demos(cfg);

  const fs::path demo_dir = root / "demos";
  fs::create_directories(demo_dir);
  for (std::size_t i = 0; i < demos.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "demo_%04zu.csv", i);
    polyflow::write_trajectory_csv(demos[i].traj, demo_dir / name, hash);
  }

  const polyflow::Dataset data = polyflow::build_dataset(
      demos, cfg.window, cfg.degree, cfg.history_len, cfg.ridge_weight);
  json targets = polyflow::dataset_to_json(data);
  targets["config_hash"] = hash;
  // Descriptors are needed again at rollout time.
  json desc = json::array();
  for (const auto& d : demos)
    desc.push_back(std::vector<double>(
        d.descriptor.data(), d.descriptor.data() + d.descriptor.size()));
  targets["descriptors"] = desc;
  polyflow::write_json(targets, root / "targets.json");

  double gap = 0.0;
  for (const auto& ex : data.examples)
    gap += (ex.source_raw - ex.target_raw).norm();
  json stats;
  stats["config_hash"] = hash;
  stats["demos"] = demos.size();
  stats["dims"] = data.dims;
  stats["steps_per_demo"] = demos.front().traj.steps();
  stats["training_windows"] = data.size();
  stats["mean_raw_prior_gap"] = gap / data.size();
  stats["normalizer_scales"] = std::vector<double>(
      data.normalizer.scales.data(),
      data.normalizer.scales.data() + data.normalizer.scales.size());
  polyflow::write_json(stats, root / "corpus_stats.json");
  std::cout << stats.dump(2) << std::endl;
  return 0;
}

int cmd_prepare_targets(const polyflow::RunConfig& cfg) {
  const fs::path root = cfg.out_root();
  const fs::path demo_dir = root / "demos";
  if (!fs::exists(demo_dir)) {
    std::cerr << "no demos under " << demo_dir << "; run gen-data first\n";
    return 1;
  }
  // Demo CSVs carry trajectories only; descriptors are regenerated from the
  // same seed so targets match gen-data exactly.
  const auto demos = generate_demos(cfg);
  const polyflow::Dataset data = polyflow::build_dataset(
      demos, cfg.window, cfg.degree, cfg.history_len, cfg.ridge_weight);
  json targets = polyflow::dataset_to_json(data);
  targets["config_hash"] = cfg.hash();
  json desc = json::array();
  for (const auto& d : demos)
    desc.push_back(std::vector<double>(
        d.descriptor.data(), d.descriptor.data() + d.descriptor.size()));
  targets["descriptors"] = desc;
  polyflow::write_json(targets, root / "targets.json");
  std::cout << "wrote " << (root / "targets.json").string() << " ("
            << data.size() << " windows)\n";
  return 0;
}

int cmd_train(const polyflow::RunConfig& cfg, bool resume) {
  const fs::path root = cfg.out_root();
  const fs::path targets_path = root / "targets.json";
  if (!fs::exists(targets_path)) {
    std::cerr << "missing " << targets_path << "; run gen-data first\n";
    return 1;
  }
  const polyflow::Dataset data =
      polyflow::dataset_from_json(polyflow::read_json(targets_path));
  const std::string hash = cfg.hash();

  polyflow::Rng init_rng(cfg.seed, /*stream=*/0xC0FFEE);
  polyflow::VelocityFieldModel model = polyflow::VelocityFieldModel::init(
      cfg.model_spec(data.cond_dim), init_rng);
  polyflow::AdamState opt = polyflow::AdamState::zeros(model.param_count());
  long start_step = 0;
  if (resume) {
    const fs::path ckpt = root / "checkpoint.json";
    if (!fs::exists(ckpt)) {
      std::cerr << "cannot resume: missing " << ckpt << "\n";
      return 1;
    }
    polyflow::Checkpoint ck =
        polyflow::checkpoint_from_json(polyflow::read_json(ckpt));
    model = ck.model;
    opt = ck.opt;
    start_step = ck.step;
  }

  polyflow::NdjsonWriter log(root / "train_log.ndjson", /*append=*/resume);
  const fs::path ckpt_dir = root / "checkpoints";
  long last_saved = -1;
  const auto save = [&](long step, const fs::path& path) {
    json ck = polyflow::checkpoint_to_json(model, opt, step, cfg.seed);
    ck["config_hash"] = hash;
    polyflow::write_json(ck, path);
  };
  save(start_step, root / "checkpoint.json");  // initial (or resumed) state

  const auto on_step = [&](const polyflow::TrainLogEntry& e) {
    if (cfg.log_every > 0 && (e.step % cfg.log_every == 0 ||
                              e.step + 1 == cfg.train_steps))
      log.write(json{{"step", e.step},
                     {"fm_loss", e.fm},
                     {"cons_loss", e.cons},
                     {"total", e.total},
                     {"wall_ms", e.wall_ms}});
    if (cfg.checkpoint_every > 0 && (e.step + 1) % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt_%08ld.json", e.step + 1);
      save(e.step + 1, ckpt_dir / name);
      save(e.step + 1, root / "checkpoint.json");
      last_saved = e.step + 1;
    }
  };

  try {
    polyflow::run_training(model, opt, data, cfg.train_options(), cfg.seed,
                           start_step, cfg.train_steps, on_step);
  } catch (const polyflow::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what()
              << " (last good checkpoint at step "
              << (last_saved >= 0 ? last_saved : start_step) << ")\n";
    return 2;
  }
  save(cfg.train_steps, root / "checkpoint.json");
  std::cout << "trained to step " << cfg.train_steps << ", checkpoint at "
            << (root / "checkpoint.json").string() << "\n";
  return 0;
}

int cmd_rollout(const polyflow::RunConfig& cfg) {
  const fs::path root = cfg.out_root();
  const std::string hash = cfg.hash();
  const fs::path targets_path = root / "targets.json";

  polyflow::Policy policy;
  policy.window = cfg.window;
  policy.degree = cfg.degree;
  policy.history_len = cfg.history_len;
  policy.ridge_weight = cfg.ridge_weight;

  std::optional<polyflow::Checkpoint> ck;
  polyflow::ScaleNormalizer normalizer;
  if (cfg.rollout_source == polyflow::PolicySource::model) {
    const fs::path ckpt = root / "checkpoint.json";
    if (!fs::exists(ckpt) || !fs::exists(targets_path)) {
      std::cerr << "model rollout needs " << ckpt << " and " << targets_path
                << "\n";
      return 1;
    }
    ck = polyflow::checkpoint_from_json(polyflow::read_json(ckpt));
    normalizer = polyflow::normalizer_from_json(
        polyflow::read_json(targets_path).at("normalizer"));
    policy.model = &ck->model;
    policy.normalizer = &normalizer;
  }

  const fs::path out_dir = root / "rollouts";
  fs::create_directories(out_dir);
  polyflow::Rng root_rng(cfg.seed);
  std::vector<polyflow::RolloutRecord> records;
  json per_seed = json::array();
  for (int s = 0; s < cfg.rollout_seeds; ++s) {
    polyflow::Rng eval_rng = root_rng.split(0x10000 + s);
    const polyflow::Demo demo =
        polyflow::gen_demo(cfg.task, cfg.task_params, eval_rng);
    polyflow::RolloutConfig rcfg;
    const long t0 =
        polyflow::rollout_initial_anchor(cfg.window, cfg.history_len);
    rcfg.episode_steps = cfg.episode_steps > 0
                             ? cfg.episode_steps
                             : polyflow::max_rollout_steps(
                                   demo.traj, cfg.window, t0, cfg.cadence);
    rcfg.k_eval = cfg.k_eval;
    rcfg.cadence = cfg.cadence;
    rcfg.prior = cfg.flow.prior;
    rcfg.nfe = cfg.flow.nfe;
    rcfg.control_hz = cfg.control_hz;
    rcfg.source = cfg.rollout_source;
    polyflow::Rng rollout_rng = eval_rng.split(1);
    const int dims = demo.traj.dims();
    const polyflow::RolloutRecord rec =
        polyflow::rollout(policy, demo, rcfg, cfg.gains(dims),
                          cfg.plant(dims), rollout_rng);
    char name[32];
    std::snprintf(name, sizeof(name), "rollout_%03d.csv", s);
    polyflow::write_rollout_csv(rec, out_dir / name, hash);
    const polyflow::RolloutMetrics m = polyflow::compute_metrics(rec);
    json row = polyflow::metrics_to_json(m);
    row["seed"] = s;
    per_seed.push_back(std::move(row));
    records.push_back(rec);
  }

  json summary;
  summary["config_hash"] = hash;
  summary["seeds"] = cfg.rollout_seeds;
  summary["per_seed"] = std::move(per_seed);
  summary["latency"] = polyflow::latency_to_json(
      polyflow::latency_report(records));
  polyflow::write_json(summary, out_dir / "summary.json");
  std::cout << summary["latency"].dump(2) << std::endl;
  return 0;
}

int cmd_bench_sweep(const std::string& spec_path, const CommonOpts& opts) {
  json doc = polyflow::read_json(spec_path);
  polyflow::SweepSpec spec = polyflow::sweep_spec_from_json(doc);
  if (opts.seed) spec.base_config["seed"] = *opts.seed;
  const polyflow::RunConfig base =
      polyflow::RunConfig::from_json(spec.base_config);
  fs::path out_dir = base.out_root();
  if (opts.out_dir) out_dir = *opts.out_dir;
  const auto cells = polyflow::run_sweep(spec, out_dir);
  int failures = 0;
  for (const auto& c : cells)
    if (!c.ok) {
      ++failures;
      std::cerr << "cell " << c.value.dump() << " failed: " << c.error << "\n";
    }
  std::cout << "sweep '" << spec.name << "' finished: " << cells.size()
            << " cells, " << failures << " failed\n";
  return 0;
}

int cmd_inspect(const std::string& coeff_path, int points, bool velocities,
                const std::string& out_path) {
  const polyflow::CoeffMatrix c =
      polyflow::coeffs_from_json(polyflow::read_json(coeff_path));
  const Eigen::VectorXd grid = polyflow::unit_grid(points);
  const double span = c.window.span_seconds(c.window.stride);
  const auto [pos, vel] = polyflow::decode(c, grid, span);
  const polyflow::Trajectory& out = velocities ? vel : pos;
  if (out_path.empty()) {
    std::cout << "step";
    for (int j = 0; j < out.dims(); ++j) std::cout << ",joint_" << j;
    std::cout << "\n";
    for (long i = 0; i < out.steps(); ++i) {
      std::cout << i;
      for (int j = 0; j < out.dims(); ++j)
        std::cout << ',' << polyflow::format_double(out.samples(i, j));
      std::cout << "\n";
    }
  } else {
    polyflow::write_trajectory_csv(out, out_path);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Legendre-coefficient trajectory policies: dataset generation, "
               "training, closed-loop rollout and benchmarking"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::optional<long> steps_flag;
  std::optional<double> k_eval_flag;
  std::optional<int> nfe_flag;
  std::optional<std::string> prior_flag, source_flag;
  std::optional<bool> ff_flag;
  std::optional<int> demos_flag, seeds_flag;
  bool resume = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opts.config_path, "run config JSON");
    sub->add_option("--seed", opts.seed, "root seed override");
    sub->add_option("--out", opts.out_dir, "output directory override");
  };

  CLI::App* gen = app.add_subcommand("gen-data",
                                     "generate expert demos and training targets");
  add_common(gen);
  gen->add_option("--demos", demos_flag, "demo count override");

  CLI::App* prep = app.add_subcommand("prepare-targets",
                                      "rebuild training targets from demos");
  add_common(prep);

  CLI::App* train = app.add_subcommand("train", "train the velocity field");
  add_common(train);
  train->add_option("--steps", steps_flag, "optimizer step override");
  train->add_flag("--resume", resume, "continue from the saved checkpoint");

  CLI::App* roll = app.add_subcommand("rollout", "closed-loop plant rollouts");
  add_common(roll);
  roll->add_option("--k-eval", k_eval_flag, "evaluation stride override");
  roll->add_option("--nfe", nfe_flag, "integration steps override");
  roll->add_option("--prior", prior_flag, "history|gaussian");
  roll->add_option("--velocity-ff", ff_flag, "velocity feed-forward on/off");
  roll->add_option("--seeds", seeds_flag, "rollout seed count");
  roll->add_option("--source", source_flag,
                   "model|oracle_corrected|oracle_uncorrected");

  CLI::App* bench = app.add_subcommand("bench", "batch experiments");
  std::string spec_path;
  CLI::App* sweep = bench->add_subcommand("sweep", "run a sweep spec");
  sweep->add_option("--spec", spec_path, "sweep spec JSON")->required();
  sweep->add_option("--seed", opts.seed, "root seed override");
  sweep->add_option("--out", opts.out_dir, "output directory override");
  bench->require_subcommand(1);

  CLI::App* inspect = app.add_subcommand("inspect",
                                         "decode a coefficient file to CSV");
  std::string coeff_path, inspect_out;
  int inspect_points = 200;
  bool inspect_vel = false;
  inspect->add_option("--coeffs", coeff_path, "coefficient JSON")->required();
  inspect->add_option("--points", inspect_points, "grid resolution");
  inspect->add_flag("--velocities", inspect_vel, "emit velocities instead");
  inspect->add_option("--to", inspect_out, "write CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const auto patch = [&](json& doc) {
    if (steps_flag) doc["train"]["steps"] = *steps_flag;
    if (k_eval_flag) doc["rollout"]["k_eval"] = *k_eval_flag;
    if (nfe_flag) doc["flow"]["nfe"] = *nfe_flag;
    if (prior_flag) doc["flow"]["prior"] = *prior_flag;
    if (ff_flag) doc["gains"]["velocity_ff"] = *ff_flag;
    if (demos_flag) doc["demos"] = *demos_flag;
    if (seeds_flag) doc["rollout"]["seeds"] = *seeds_flag;
    if (source_flag) doc["rollout"]["source"] = *source_flag;
  };

  try {
    if (gen->parsed()) {
      const polyflow::RunConfig cfg = load_config(opts, patch);
      if (cfg.demos < 1) {
        std::cerr << "gen-data needs a positive demo count\n";
        return 1;
      }
      return cmd_gen_data(cfg);
    }
    if (prep->parsed()) return cmd_prepare_targets(load_config(opts, patch));
    if (train->parsed()) return cmd_train(load_config(opts, patch), resume);
    if (roll->parsed()) return cmd_rollout(load_config(opts, patch));
    if (bench->parsed()) return cmd_bench_sweep(spec_path, opts);
    if (inspect->parsed())
      return cmd_inspect(coeff_path, inspect_points, inspect_vel, inspect_out);
  } catch (const polyflow::ParamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
