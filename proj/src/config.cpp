#include "polyflow/config.hpp"

#include <cstdlib>

#include "polyflow/io.hpp"

namespace polyflow {

using nlohmann::json;

std::string to_string(PriorMode mode) {
  return mode == PriorMode::history ? "history" : "gaussian";
}

PriorMode prior_mode_from_string(const std::string& name) {
  if (name == "history") return PriorMode::history;
  if (name == "gaussian") return PriorMode::gaussian;
  throw ParamError("unknown prior mode: " + name);
}

std::string to_string(PolicySource source) {
  switch (source) {
    case PolicySource::model:
      return "model";
    case PolicySource::oracle_corrected:
      return "oracle_corrected";
    case PolicySource::oracle_uncorrected:
      return "oracle_uncorrected";
  }
  throw ParamError("unknown policy source");
}

PolicySource policy_source_from_string(const std::string& name) {
  if (name == "model") return PolicySource::model;
  if (name == "oracle_corrected") return PolicySource::oracle_corrected;
  if (name == "oracle_uncorrected") return PolicySource::oracle_uncorrected;
  throw ParamError("unknown policy source: " + name);
}

namespace {

void reject_unknown(const json& j, const char* where,
                    std::initializer_list<const char*> known) {
  if (!j.is_object())
    throw ParamError(std::string("config section '") + where +
                     "' must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw ParamError(std::string("unknown config key '") + key + "' in " +
                       where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

RunConfig RunConfig::defaults() { return RunConfig{}; }

RunConfig RunConfig::from_json(const json& j) {
  reject_unknown(j, "root",
                 {"version", "degree", "window", "history_len", "ridge_weight",
                  "flow", "model", "train", "task", "demos", "rollout",
                  "plant", "gains", "seed", "out_dir"});
  if (j.contains("version") && j.at("version").get<int>() != 1)
    throw ParamError("unsupported config version");

  RunConfig c;
  c.degree = get_or(j, "degree", c.degree);
  if (j.contains("window")) {
    const json& w = j.at("window");
    reject_unknown(w, "window",
                   {"exec_steps", "overlap_pre", "overlap_post", "fit_padding",
                    "stride", "expert_hz", "continuity_order"});
    c.window.exec_steps = get_or(w, "exec_steps", c.window.exec_steps);
    c.window.overlap_pre = get_or(w, "overlap_pre", c.window.overlap_pre);
    c.window.overlap_post = get_or(w, "overlap_post", c.window.overlap_post);
    c.window.fit_padding = get_or(w, "fit_padding", c.window.fit_padding);
    c.window.stride = get_or(w, "stride", c.window.stride);
    c.window.expert_hz = get_or(w, "expert_hz", c.window.expert_hz);
    c.window.continuity_order =
        get_or(w, "continuity_order", c.window.continuity_order);
  }
  c.history_len = get_or(j, "history_len", c.history_len);
  c.ridge_weight = get_or(j, "ridge_weight", c.ridge_weight);
  if (j.contains("flow")) {
    const json& f = j.at("flow");
    reject_unknown(f, "flow",
                   {"history_noise_std", "consistency_weight", "nfe", "prior"});
    c.flow.history_noise_std =
        get_or(f, "history_noise_std", c.flow.history_noise_std);
    c.flow.consistency_weight =
        get_or(f, "consistency_weight", c.flow.consistency_weight);
    c.flow.nfe = get_or(f, "nfe", c.flow.nfe);
    if (f.contains("prior"))
      c.flow.prior = prior_mode_from_string(f.at("prior").get<std::string>());
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m, "model", {"hidden", "tau_embed_dim"});
    c.hidden = get_or(m, "hidden", c.hidden);
    c.tau_embed_dim = get_or(m, "tau_embed_dim", c.tau_embed_dim);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t, "train",
                   {"steps", "batch", "learning_rate", "beta1", "beta2",
                    "clip_norm", "checkpoint_every", "log_every",
                    "holdout_fraction"});
    c.train_steps = get_or(t, "steps", c.train_steps);
    c.batch = get_or(t, "batch", c.batch);
    c.optimizer.learning_rate =
        get_or(t, "learning_rate", c.optimizer.learning_rate);
    c.optimizer.beta1 = get_or(t, "beta1", c.optimizer.beta1);
    c.optimizer.beta2 = get_or(t, "beta2", c.optimizer.beta2);
    c.optimizer.clip_norm = get_or(t, "clip_norm", c.optimizer.clip_norm);
    c.checkpoint_every = get_or(t, "checkpoint_every", c.checkpoint_every);
    c.log_every = get_or(t, "log_every", c.log_every);
    c.holdout_fraction = get_or(t, "holdout_fraction", c.holdout_fraction);
  }
  if (j.contains("task")) {
    const json& t = j.at("task");
    reject_unknown(t, "task",
                   {"kind", "dims", "hz", "duration", "start_lo", "start_hi",
                    "goal_lo", "goal_hi", "amp_lo", "amp_hi", "freq_lo",
                    "freq_hi", "via_count"});
    if (t.contains("kind"))
      c.task = task_kind_from_string(t.at("kind").get<std::string>());
    c.task_params.dims = get_or(t, "dims", c.task_params.dims);
    c.task_params.hz = get_or(t, "hz", c.task_params.hz);
    c.task_params.duration = get_or(t, "duration", c.task_params.duration);
    c.task_params.start_lo = get_or(t, "start_lo", c.task_params.start_lo);
    c.task_params.start_hi = get_or(t, "start_hi", c.task_params.start_hi);
    c.task_params.goal_lo = get_or(t, "goal_lo", c.task_params.goal_lo);
    c.task_params.goal_hi = get_or(t, "goal_hi", c.task_params.goal_hi);
    c.task_params.amp_lo = get_or(t, "amp_lo", c.task_params.amp_lo);
    c.task_params.amp_hi = get_or(t, "amp_hi", c.task_params.amp_hi);
    c.task_params.freq_lo = get_or(t, "freq_lo", c.task_params.freq_lo);
    c.task_params.freq_hi = get_or(t, "freq_hi", c.task_params.freq_hi);
    c.task_params.via_count = get_or(t, "via_count", c.task_params.via_count);
  }
  c.demos = get_or(j, "demos", c.demos);
  if (j.contains("rollout")) {
    const json& r = j.at("rollout");
    reject_unknown(r, "rollout",
                   {"episode_steps", "k_eval", "cadence", "control_hz",
                    "seeds", "source"});
    c.episode_steps = get_or(r, "episode_steps", c.episode_steps);
    c.k_eval = get_or(r, "k_eval", c.k_eval);
    c.cadence = get_or(r, "cadence", c.cadence);
    c.control_hz = get_or(r, "control_hz", c.control_hz);
    c.rollout_seeds = get_or(r, "seeds", c.rollout_seeds);
    if (r.contains("source"))
      c.rollout_source =
          policy_source_from_string(r.at("source").get<std::string>());
  }
  if (j.contains("plant")) {
    const json& p = j.at("plant");
    reject_unknown(p, "plant", {"inertia", "damping", "dt"});
    c.plant_inertia = get_or(p, "inertia", c.plant_inertia);
    c.plant_damping = get_or(p, "damping", c.plant_damping);
    c.plant_dt = get_or(p, "dt", c.plant_dt);
  }
  if (j.contains("gains")) {
    const json& g = j.at("gains");
    reject_unknown(g, "gains", {"kp", "kd", "velocity_ff"});
    c.kp = get_or(g, "kp", c.kp);
    c.kd = get_or(g, "kd", c.kd);
    c.velocity_ff = get_or(g, "velocity_ff", c.velocity_ff);
  }
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.out_dir = get_or<std::string>(j, "out_dir", c.out_dir);
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  return from_json(read_json(path));
}

json RunConfig::to_json() const {
  json j;
  j["version"] = 1;
  j["degree"] = degree;
  j["window"] = window_to_json(window);
  j["history_len"] = history_len;
  j["ridge_weight"] = ridge_weight;
  j["flow"] = {{"history_noise_std", flow.history_noise_std},
               {"consistency_weight", flow.consistency_weight},
               {"nfe", flow.nfe},
               {"prior", to_string(flow.prior)}};
  j["model"] = {{"hidden", hidden}, {"tau_embed_dim", tau_embed_dim}};
  j["train"] = {{"steps", train_steps},
                {"batch", batch},
                {"learning_rate", optimizer.learning_rate},
                {"beta1", optimizer.beta1},
                {"beta2", optimizer.beta2},
                {"clip_norm", optimizer.clip_norm},
                {"checkpoint_every", checkpoint_every},
                {"log_every", log_every},
                {"holdout_fraction", holdout_fraction}};
  j["task"] = {{"kind", to_string(task)},
               {"dims", task_params.dims},
               {"hz", task_params.hz},
               {"duration", task_params.duration},
               {"start_lo", task_params.start_lo},
               {"start_hi", task_params.start_hi},
               {"goal_lo", task_params.goal_lo},
               {"goal_hi", task_params.goal_hi},
               {"amp_lo", task_params.amp_lo},
               {"amp_hi", task_params.amp_hi},
               {"freq_lo", task_params.freq_lo},
               {"freq_hi", task_params.freq_hi},
               {"via_count", task_params.via_count}};
  j["demos"] = demos;
  j["rollout"] = {{"episode_steps", episode_steps},
                  {"k_eval", k_eval},
                  {"cadence", cadence},
                  {"control_hz", control_hz},
                  {"seeds", rollout_seeds},
                  {"source", to_string(rollout_source)}};
  j["plant"] = {{"inertia", plant_inertia},
                {"damping", plant_damping},
                {"dt", plant_dt}};
  j["gains"] = {{"kp", kp}, {"kd", kd}, {"velocity_ff", velocity_ff}};
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  return j;
}

std::string RunConfig::hash() const { return config_hash(to_json()); }

std::filesystem::path RunConfig::out_root() const {
  if (const char* root = std::getenv("POLYFLOW_OUT_ROOT"))
    return std::filesystem::path(root) / out_dir;
  return out_dir;
}

ModelSpec RunConfig::model_spec(int cond_dim) const {
  ModelSpec spec;
  spec.coeff_rows = degree + 1;
  spec.coeff_cols = task_params.dims;
  spec.cond_dim = cond_dim;
  spec.hidden = hidden;
  spec.tau_embed_dim = tau_embed_dim;
  return spec;
}

TrainOptions RunConfig::train_options() const {
  TrainOptions opt;
  opt.steps = train_steps;
  opt.batch = batch;
  opt.optimizer = optimizer;
  opt.flow = flow;
  return opt;
}

PlantParams RunConfig::plant(int dims) const {
  return PlantParams::uniform(dims, plant_inertia, plant_damping, plant_dt);
}

ControllerGains RunConfig::gains(int dims) const {
  return ControllerGains::uniform(dims, kp, kd, velocity_ff);
}

void RunConfig::validate() const {
  window.validate(degree);
  flow.validate();
  if (history_len < 2) throw ParamError("history_len must be >= 2");
  if (!(ridge_weight > 0.0)) throw ParamError("ridge_weight must be > 0");
  if (train_steps < 0) throw ParamError("train steps must be >= 0");
  if (batch < 1) throw ParamError("batch must be >= 1");
  if (demos < 0) throw ParamError("demos must be >= 0");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw ParamError("holdout_fraction must be in (0,1)");
  if (rollout_seeds < 1) throw ParamError("rollout seeds must be >= 1");
  if (!(control_hz > 0.0)) throw ParamError("control_hz must be > 0");
  if (k_eval < 0.0) throw ParamError("k_eval must be >= 0");
}

}  // namespace polyflow
