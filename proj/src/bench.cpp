#include "polyflow/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "polyflow/io.hpp"
#include "polyflow/pipeline.hpp"

namespace polyflow {

using nlohmann::json;

SweepSpec sweep_spec_from_json(const json& j) {
  SweepSpec spec;
  spec.parameter = j.at("parameter").get<std::string>();
  spec.values = j.at("values").get<std::vector<json>>();
  if (spec.values.empty()) throw ParamError("sweep grid is empty");
  spec.seeds_per_cell = j.value("seeds_per_cell", spec.seeds_per_cell);
  if (spec.seeds_per_cell < 1) throw ParamError("seeds_per_cell must be >= 1");
  spec.base_config = j.value("base_config", json::object());
  spec.name = j.value("name", spec.name);
  spec.workers = j.value("workers", spec.workers);
  return spec;
}

void set_config_value(json& config, const std::string& path,
                      const json& value) {
  json* at = &config;
  std::size_t begin = 0;
  while (true) {
    const std::size_t dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot - begin);
    if (key.empty()) throw ParamError("empty segment in parameter path");
    if (dot == std::string::npos) {
      (*at)[key] = value;
      return;
    }
    at = &(*at)[key];
    begin = dot + 1;
  }
}

std::map<std::string, double> run_experiment(const RunConfig& cfg,
                                             std::uint64_t rollout_seed) {
  Rng root(cfg.seed);
  Rng demo_rng = root.split(/*stream=*/1);

  std::vector<Demo> demos;
  const int n_demos = std::max(1, cfg.demos);
  demos.reserve(n_demos);
  for (int i = 0; i < n_demos; ++i)
    demos.push_back(gen_demo(cfg.task, cfg.task_params, demo_rng));

  Policy policy;
  policy.window = cfg.window;
  policy.degree = cfg.degree;
  policy.history_len = cfg.history_len;
  policy.ridge_weight = cfg.ridge_weight;

  Dataset data;
  VelocityFieldModel model = [&] {
    if (cfg.rollout_source != PolicySource::model) {
      Rng dummy(0);
      return VelocityFieldModel::init(ModelSpec{1, 1, 0, {1}, 2}, dummy);
    }
    data = build_dataset(demos, cfg.window, cfg.degree, cfg.history_len,
                         cfg.ridge_weight);
    return train_model(data, cfg.model_spec(data.cond_dim),
                       cfg.train_options(), cfg.seed);
  }();
  if (cfg.rollout_source == PolicySource::model) {
    policy.model = &model;
    policy.normalizer = &data.normalizer;
  }

  Rng eval_rng = root.split(0x10000 + rollout_seed);
  const Demo eval_demo = gen_demo(cfg.task, cfg.task_params, eval_rng);

  RolloutConfig rcfg;
  const long t0 = rollout_initial_anchor(cfg.window, cfg.history_len);
  rcfg.episode_steps =
      cfg.episode_steps > 0
          ? cfg.episode_steps
          : max_rollout_steps(eval_demo.traj, cfg.window, t0, cfg.cadence);
  rcfg.k_eval = cfg.k_eval;
  rcfg.cadence = cfg.cadence;
  rcfg.prior = cfg.flow.prior;
  rcfg.nfe = cfg.flow.nfe;
  rcfg.control_hz = cfg.control_hz;
  rcfg.source = cfg.rollout_source;

  const int dims = eval_demo.traj.dims();
  Rng rollout_rng = eval_rng.split(1);
  const RolloutRecord rec = rollout(policy, eval_demo, rcfg, cfg.gains(dims),
                                    cfg.plant(dims), rollout_rng);
  const RolloutMetrics m = compute_metrics(rec);

  std::map<std::string, double> out;
  out["mae_total"] = m.mae_total;
  out["iae"] = m.iae;
  out["peak_error"] = m.peak_error;
  out["max_junction_pos_gap"] = m.max_junction_pos_gap;
  out["max_junction_vel_gap"] = m.max_junction_vel_gap;
  out["calls"] = static_cast<double>(m.calls);
  out["mean_call_ms"] = m.mean_call_ms;
  out["episode_steps"] = static_cast<double>(rec.episode_steps);
  return out;
}

namespace {

CellResult run_cell(const SweepSpec& spec, std::size_t index) {
  CellResult cell;
  cell.value = spec.values[index];
  try {
    json doc = spec.base_config;
    set_config_value(doc, spec.parameter, spec.values[index]);
    const RunConfig cfg = RunConfig::from_json(doc);
    cell.config_hash = cfg.hash();
    cell.seeds = spec.seeds_per_cell;

    std::map<std::string, double> sum, sumsq;
    for (int s = 0; s < spec.seeds_per_cell; ++s) {
      const auto metrics = run_experiment(cfg, static_cast<std::uint64_t>(s));
      for (const auto& [k, v] : metrics) {
        sum[k] += v;
        sumsq[k] += v * v;
      }
    }
    for (const auto& [k, v] : sum) {
      const double mean = v / spec.seeds_per_cell;
      cell.mean[k] = mean;
      cell.stddev[k] =
          std::sqrt(std::max(0.0, sumsq[k] / spec.seeds_per_cell - mean * mean));
    }
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

/// Per-seed mae_total for pairwise statistics between two cells.
std::vector<double> per_seed_mae(const SweepSpec& spec, std::size_t index) {
  json doc = spec.base_config;
  set_config_value(doc, spec.parameter, spec.values[index]);
  const RunConfig cfg = RunConfig::from_json(doc);
  std::vector<double> out;
  for (int s = 0; s < spec.seeds_per_cell; ++s)
    out.push_back(
        run_experiment(cfg, static_cast<std::uint64_t>(s)).at("mae_total"));
  return out;
}

}  // namespace

std::vector<CellResult> run_sweep(const SweepSpec& spec,
                                  const std::filesystem::path& out_dir) {
  if (spec.values.empty()) throw ParamError("sweep grid is empty");
  std::vector<CellResult> cells(spec.values.size());

  const int workers =
      std::max(1, std::min<int>(spec.workers,
                                static_cast<int>(spec.values.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < spec.values.size(); ++i)
      cells[i] = run_cell(spec, i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < spec.values.size();
             i = next.fetch_add(1))
          cells[i] = run_cell(spec, i);
      });
    for (auto& t : pool) t.join();
  }

  std::filesystem::create_directories(out_dir);
  const auto csv_path = out_dir / (spec.name + "_results.csv");
  std::ofstream csv(csv_path);
  if (!csv) throw Error("cannot open " + csv_path.string());
  std::vector<std::string> keys;
  for (const CellResult& c : cells)
    if (c.ok) {
      for (const auto& [k, _] : c.mean) keys.push_back(k);
      break;
    }
  csv << "cell,value,ok,error";
  for (const auto& k : keys) csv << ',' << k << "_mean," << k << "_std";
  csv << "\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellResult& c = cells[i];
    csv << i << ',' << c.value.dump() << ',' << (c.ok ? 1 : 0) << ','
        << c.error;
    for (const auto& k : keys) {
      if (c.ok)
        csv << ',' << format_double(c.mean.at(k)) << ','
            << format_double(c.stddev.at(k));
      else
        csv << ",,";
    }
    csv << "\n";
  }

  json summary;
  summary["parameter"] = spec.parameter;
  summary["seeds_per_cell"] = spec.seeds_per_cell;
  json rows = json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellResult& c = cells[i];
    json row;
    row["cell"] = i;
    row["value"] = c.value;
    row["ok"] = c.ok;
    row["config_hash"] = c.config_hash;
    if (!c.ok) row["error"] = c.error;
    row["mean"] = c.mean;
    row["stddev"] = c.stddev;
    rows.push_back(std::move(row));
  }
  summary["cells"] = std::move(rows);

  // Two-cell sweeps (ablation pairs) additionally report the paired t
  // statistic and Cohen's d on mae_total over the shared seed list.
  if (cells.size() == 2 && cells[0].ok && cells[1].ok) {
    try {
      const std::vector<double> a = per_seed_mae(spec, 0);
      const std::vector<double> b = per_seed_mae(spec, 1);
      double mean_d = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) mean_d += a[i] - b[i];
      mean_d /= a.size();
      double var_d = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i)
        var_d += (a[i] - b[i] - mean_d) * (a[i] - b[i] - mean_d);
      var_d /= (a.size() - 1);
      const double sd = std::sqrt(var_d);
      summary["paired"] = {
          {"metric", "mae_total"},
          {"mean_diff", mean_d},
          {"t", sd > 0.0 ? mean_d / (sd / std::sqrt(double(a.size()))) : 0.0},
          {"cohens_d", sd > 0.0 ? mean_d / sd : 0.0},
          {"n", a.size()}};
    } catch (const std::exception&) {
      // pairwise stats are best-effort; cells already carry their results
    }
  }

  write_json(summary, out_dir / (spec.name + "_summary.json"));
  return cells;
}

LatencyReport latency_report(std::span<const RolloutRecord> records) {
  LatencyReport r;
  std::vector<double> calls;
  double episode_ms = 0.0;
  long total_steps = 0;
  for (const RolloutRecord& rec : records) {
    for (Eigen::Index i = 0; i < rec.call_ms.size(); ++i)
      calls.push_back(rec.call_ms(i));
    episode_ms += rec.call_ms.sum();
    total_steps += rec.q.rows();
  }
  if (calls.empty()) return r;
  std::sort(calls.begin(), calls.end());
  r.calls = static_cast<long>(calls.size());
  double sum = 0.0;
  for (double c : calls) sum += c;
  r.per_call_ms_mean = sum / calls.size();
  r.per_call_ms_median = calls[calls.size() / 2];
  r.per_call_ms_p95 = calls[static_cast<std::size_t>(0.95 * (calls.size() - 1))];
  r.per_episode_ms = episode_ms / records.size();
  r.amortized_ms_per_step =
      total_steps > 0 ? episode_ms / total_steps : 0.0;
  return r;
}

json latency_to_json(const LatencyReport& r) {
  return json{{"per_call_ms_mean", r.per_call_ms_mean},
              {"per_call_ms_median", r.per_call_ms_median},
              {"per_call_ms_p95", r.per_call_ms_p95},
              {"per_episode_ms", r.per_episode_ms},
              {"amortized_ms_per_step", r.amortized_ms_per_step},
              {"calls", r.calls}};
}

}  // namespace polyflow
