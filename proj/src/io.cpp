#include "polyflow/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace polyflow {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<double> to_rowmajor(const MatrixXd& m) {
  std::vector<double> out;
  out.reserve(m.size());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

MatrixXd from_rowmajor(const std::vector<double>& v, Index rows, Index cols) {
  if (static_cast<Index>(v.size()) != rows * cols)
    throw ContractError("value count does not match document shape");
  MatrixXd m(rows, cols);
  std::size_t at = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = v[at++];
  return m;
}

void require_version(const json& j, int version, const char* what) {
  if (!j.contains("version") || j.at("version").get<int>() != version)
    throw ContractError(std::string(what) + ": unsupported document version");
}

std::ofstream open_out(const std::filesystem::path& path, bool append = false) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  return out;
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj,
                          const std::filesystem::path& path,
                          const std::string& config_hash) {
  traj.validate();
  std::ofstream out = open_out(path);
  if (!config_hash.empty()) out << "# config=" << config_hash << "\n";
  out << "# frequency=" << format_double(traj.frequency)
      << " start_step=" << traj.start_step << "\n";
  out << "step";
  for (int j = 0; j < traj.dims(); ++j) out << ",joint_" << j;
  out << "\n";
  for (long i = 0; i < traj.steps(); ++i) {
    out << traj.start_step + i;
    for (int j = 0; j < traj.dims(); ++j)
      out << ',' << format_double(traj.samples(i, j));
    out << "\n";
  }
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open for reading: " + path.string());
  Trajectory traj;
  traj.frequency = 0.0;
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header_seen = false;
  long first_step = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string tok;
      while (meta >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "frequency") traj.frequency = std::stod(val);
        if (key == "start_step") first_step = std::stol(val);
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;  // column names
      continue;
    }
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> row;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        first = false;
        continue;  // step index column
      }
      row.push_back(std::stod(cell));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("trajectory file has no samples");
  traj.samples.resize(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw Error("ragged trajectory file");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      traj.samples(i, j) = rows[i][j];
  }
  if (traj.frequency <= 0.0) traj.frequency = 1.0;
  traj.start_step = first_step;
  traj.validate();
  return traj;
}

void write_rollout_csv(const RolloutRecord& rec,
                       const std::filesystem::path& path,
                       const std::string& config_hash) {
  std::ofstream out = open_out(path);
  if (!config_hash.empty()) out << "# config=" << config_hash << "\n";
  const int d = static_cast<int>(rec.q_des.cols());
  out << "t";
  for (int j = 0; j < d; ++j) out << ",q_des_" << j;
  for (int j = 0; j < d; ++j) out << ",q_" << j;
  for (int j = 0; j < d; ++j) out << ",qdot_des_" << j;
  for (int j = 0; j < d; ++j) out << ",e_" << j;
  out << "\n";
  for (Index i = 0; i < rec.time.size(); ++i) {
    out << format_double(rec.time(i));
    for (int j = 0; j < d; ++j) out << ',' << format_double(rec.q_des(i, j));
    for (int j = 0; j < d; ++j) out << ',' << format_double(rec.q(i, j));
    for (int j = 0; j < d; ++j)
      out << ',' << format_double(rec.qdot_des(i, j));
    for (int j = 0; j < d; ++j) out << ',' << format_double(rec.err(i, j));
    out << "\n";
  }
}

json metrics_to_json(const RolloutMetrics& m) {
  json j;
  j["mae_per_joint"] = std::vector<double>(
      m.mae_per_joint.data(), m.mae_per_joint.data() + m.mae_per_joint.size());
  j["mae_total"] = m.mae_total;
  j["iae"] = m.iae;
  j["peak_error"] = m.peak_error;
  j["max_junction_pos_gap"] = m.max_junction_pos_gap;
  j["max_junction_vel_gap"] = m.max_junction_vel_gap;
  j["grid_pos_bound"] = m.grid_pos_bound;
  j["grid_vel_bound"] = m.grid_vel_bound;
  j["calls"] = m.calls;
  j["mean_call_ms"] = m.mean_call_ms;
  return j;
}

json window_to_json(const FitWindowConfig& cfg) {
  return json{{"exec_steps", cfg.exec_steps},
              {"overlap_pre", cfg.overlap_pre},
              {"overlap_post", cfg.overlap_post},
              {"fit_padding", cfg.fit_padding},
              {"stride", cfg.stride},
              {"expert_hz", cfg.expert_hz},
              {"continuity_order", cfg.continuity_order}};
}

FitWindowConfig window_from_json(const json& j) {
  FitWindowConfig cfg;
  cfg.exec_steps = j.at("exec_steps").get<int>();
  cfg.overlap_pre = j.at("overlap_pre").get<int>();
  cfg.overlap_post = j.at("overlap_post").get<int>();
  cfg.fit_padding = j.at("fit_padding").get<int>();
  cfg.stride = j.at("stride").get<int>();
  cfg.expert_hz = j.at("expert_hz").get<double>();
  cfg.continuity_order = j.at("continuity_order").get<int>();
  return cfg;
}

json coeffs_to_json(const CoeffMatrix& c) {
  json j;
  j["version"] = 1;
  j["degree"] = c.degree();
  j["dims"] = c.dims();
  j["window"] = window_to_json(c.window);
  j["normalized"] = c.normalized;
  j["values"] = to_rowmajor(c.values);
  return j;
}

CoeffMatrix coeffs_from_json(const json& j) {
  require_version(j, 1, "coefficients");
  CoeffMatrix c;
  const int degree = j.at("degree").get<int>();
  const int dims = j.at("dims").get<int>();
  c.values = from_rowmajor(j.at("values").get<std::vector<double>>(),
                           degree + 1, dims);
  c.window = window_from_json(j.at("window"));
  c.normalized = j.at("normalized").get<bool>();
  if (!c.values.allFinite())
    throw ContractError("coefficient document holds non-finite values");
  return c;
}

json normalizer_to_json(const ScaleNormalizer& n) {
  json j;
  j["version"] = 1;
  j["scales"] =
      std::vector<double>(n.scales.data(), n.scales.data() + n.scales.size());
  return j;
}

ScaleNormalizer normalizer_from_json(const json& j) {
  require_version(j, 1, "normalizer");
  const auto v = j.at("scales").get<std::vector<double>>();
  ScaleNormalizer n;
  n.scales = Eigen::Map<const VectorXd>(v.data(), v.size());
  if ((n.scales.array() <= 0.0).any())
    throw ContractError("normalizer scales must be positive");
  return n;
}

json dataset_to_json(const Dataset& data) {
  json j;
  j["version"] = 1;
  j["window"] = window_to_json(data.window);
  j["degree"] = data.degree;
  j["history_len"] = data.history_len;
  j["ridge_weight"] = data.ridge_weight;
  j["dims"] = data.dims;
  j["cond_dim"] = data.cond_dim;
  j["normalizer"] = normalizer_to_json(data.normalizer);
  json examples = json::array();
  for (const TrainingExample& ex : data.examples) {
    json e;
    e["source"] = to_rowmajor(ex.source_raw);
    e["target"] = to_rowmajor(ex.target_raw);
    e["cond"] = std::vector<double>(ex.cond.data(),
                                    ex.cond.data() + ex.cond.size());
    e["anchor"] = ex.anchor;
    e["demo"] = ex.demo_index;
    examples.push_back(std::move(e));
  }
  j["examples"] = std::move(examples);
  return j;
}

Dataset dataset_from_json(const json& j) {
  require_version(j, 1, "dataset");
  Dataset data;
  data.window = window_from_json(j.at("window"));
  data.degree = j.at("degree").get<int>();
  data.history_len = j.at("history_len").get<int>();
  data.ridge_weight = j.at("ridge_weight").get<double>();
  data.dims = j.at("dims").get<int>();
  data.cond_dim = j.at("cond_dim").get<int>();
  data.normalizer = normalizer_from_json(j.at("normalizer"));
  for (const json& e : j.at("examples")) {
    TrainingExample ex;
    ex.source_raw = from_rowmajor(e.at("source").get<std::vector<double>>(),
                                  data.degree + 1, data.dims);
    ex.target_raw = from_rowmajor(e.at("target").get<std::vector<double>>(),
                                  data.degree + 1, data.dims);
    const auto cond = e.at("cond").get<std::vector<double>>();
    ex.cond = Eigen::Map<const VectorXd>(cond.data(), cond.size());
    ex.anchor = e.at("anchor").get<long>();
    ex.demo_index = e.at("demo").get<int>();
    data.examples.push_back(std::move(ex));
  }
  return data;
}

json checkpoint_to_json(const VelocityFieldModel& model, const AdamState& opt,
                        long step, std::uint64_t seed) {
  const ModelSpec& spec = model.spec();
  json j;
  j["version"] = 1;
  j["arch"] = {{"coeff_rows", spec.coeff_rows},
               {"coeff_cols", spec.coeff_cols},
               {"cond_dim", spec.cond_dim},
               {"hidden", spec.hidden},
               {"tau_embed_dim", spec.tau_embed_dim}};
  const VectorXd theta = model.params();
  j["params"] = std::vector<double>(theta.data(), theta.data() + theta.size());
  j["adam_m"] = std::vector<double>(opt.m.data(), opt.m.data() + opt.m.size());
  j["adam_v"] = std::vector<double>(opt.v.data(), opt.v.data() + opt.v.size());
  j["adam_step"] = opt.step;
  j["step"] = step;
  j["seed"] = seed;
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  require_version(j, 1, "checkpoint");
  const json& a = j.at("arch");
  ModelSpec spec;
  spec.coeff_rows = a.at("coeff_rows").get<int>();
  spec.coeff_cols = a.at("coeff_cols").get<int>();
  spec.cond_dim = a.at("cond_dim").get<int>();
  spec.hidden = a.at("hidden").get<std::vector<int>>();
  spec.tau_embed_dim = a.at("tau_embed_dim").get<int>();

  Rng dummy(0);
  Checkpoint ck{VelocityFieldModel::init(spec, dummy), AdamState{}, 0, 0};
  const auto params = j.at("params").get<std::vector<double>>();
  ck.model.set_params(Eigen::Map<const VectorXd>(params.data(), params.size()));
  const auto m = j.at("adam_m").get<std::vector<double>>();
  const auto v = j.at("adam_v").get<std::vector<double>>();
  ck.opt.m = Eigen::Map<const VectorXd>(m.data(), m.size());
  ck.opt.v = Eigen::Map<const VectorXd>(v.data(), v.size());
  ck.opt.step = j.at("adam_step").get<long>();
  ck.step = j.at("step").get<long>();
  ck.seed = j.at("seed").get<std::uint64_t>();
  return ck;
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open for reading: " + path.string());
  return json::parse(in);
}

NdjsonWriter::NdjsonWriter(const std::filesystem::path& path, bool append)
    : path_(path) {
  open_out(path_, append);  // create or truncate up front
}

void NdjsonWriter::write(const json& j) {
  std::ofstream out = open_out(path_, /*append=*/true);
  out << j.dump() << "\n";
}

std::string config_hash(const json& config) {
  const std::string dump = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace polyflow
