#ifndef POLYFLOW_IO_HPP
#define POLYFLOW_IO_HPP

#include <filesystem>
#include <string>

#include <json.hpp>

#include "polyflow/codec.hpp"
#include "polyflow/model.hpp"
#include "polyflow/pipeline.hpp"
#include "polyflow/sim.hpp"
#include "polyflow/trajectory.hpp"

namespace polyflow {

using json = nlohmann::json;

/// CSV with a `step,joint_0,...` header. Values are written with 17
/// significant digits so doubles round-trip bit-exactly. Lines starting
/// with '#' carry run metadata and are skipped on read.
void write_trajectory_csv(const Trajectory& traj,
                          const std::filesystem::path& path,
                          const std::string& config_hash = {});
Trajectory read_trajectory_csv(const std::filesystem::path& path);

/// Per-tick rollout record: t, q_des[j], q[j], qdot_des[j], e[j].
void write_rollout_csv(const RolloutRecord& rec,
                       const std::filesystem::path& path,
                       const std::string& config_hash = {});

json metrics_to_json(const RolloutMetrics& m);

json window_to_json(const FitWindowConfig& cfg);
FitWindowConfig window_from_json(const json& j);

/// Versioned coefficient document: version, degree, dims, window,
/// row-major values, normalized flag.
json coeffs_to_json(const CoeffMatrix& c);
CoeffMatrix coeffs_from_json(const json& j);

json normalizer_to_json(const ScaleNormalizer& n);
ScaleNormalizer normalizer_from_json(const json& j);

/// Versioned training-target container: window geometry, normalizer and
/// the raw example tuples.
json dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const json& j);

/// Versioned checkpoint: architecture header, flat parameters, optimizer
/// moments and the training step reached. Reload reproduces forward
/// outputs bit-exactly.
json checkpoint_to_json(const VelocityFieldModel& model, const AdamState& opt,
                        long step, std::uint64_t seed);
struct Checkpoint {
  VelocityFieldModel model;
  AdamState opt;
  long step = 0;
  std::uint64_t seed = 0;
};
Checkpoint checkpoint_from_json(const json& j);

void write_json(const json& j, const std::filesystem::path& path);
json read_json(const std::filesystem::path& path);

/// Append-only newline-delimited JSON log.
class NdjsonWriter {
 public:
  explicit NdjsonWriter(const std::filesystem::path& path, bool append = false);
  void write(const json& j);

 private:
  std::filesystem::path path_;
};

/// FNV-1a over the canonical dump; embedded in every output artifact.
std::string config_hash(const json& config);

/// 17-significant-digit decimal, enough to round-trip any finite double.
std::string format_double(double v);

}  // namespace polyflow

#endif
