#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sessionlens/model.hpp"

namespace sessionlens::synth {

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Skill { expert, novice };
enum class MotionStyle { smooth, stop_start };

struct ErrorCoupling {
  std::string procedure;
  WorkloadCategory category = WorkloadCategory::attention;
  MentalState state = MentalState::overload;
  double strength = 1.0;  // probability that a coupled state run inside the procedure is an error
};

using StateDistribution = std::map<MentalState, double>;

struct ProfileSpec {
  SubjectId subject;
  Skill skill = Skill::expert;
  MotionStyle motion_style = MotionStyle::smooth;
  std::map<WorkloadCategory, StateDistribution> workload_bias;  // missing categories use a default
  std::optional<ErrorCoupling> error_coupling;
};

struct StreamDrop {
  SessionId session;
  std::vector<std::string> streams;  // procedures, errors, phases, workload, imu, gaze
};

// stream: workload (all categories), workload.<category>, imu or gaze.
struct GapInjection {
  SessionId session;
  std::string stream;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct RandomGaps {
  std::size_t count = 0;
  double min_s = 1.0;
  double max_s = 60.0;
  std::string stream = "workload";
  std::vector<SessionId> sessions;  // empty: all sessions
};

struct Degradations {
  std::vector<StreamDrop> drop_streams;
  std::vector<GapInjection> inject_gaps;
  std::optional<RandomGaps> random_gaps;

  bool empty() const { return drop_streams.empty() && inject_gaps.empty() && !random_gaps; }
};

struct GeneratorSpec {
  std::string dataset_name = "synthetic";
  std::uint64_t seed = 0;
  std::vector<ProfileSpec> profiles;
  std::vector<TrialId> trials;
  std::vector<std::string> procedures{"a", "b", "c", "d", "e", "f"};
  double duration_min_s = 600.0;
  double duration_max_s = 900.0;
  std::size_t procedure_repeats = 3;
  double error_rate_per_min = 0.5;  // uncoupled errors; scaled by skill
  double imu_rate_hz = 20.0;
  double gaze_rate_hz = 20.0;
  Degradations degradations;  // applied only by generate_degraded / the CLI
};

// Both throw SpecError for malformed or invalid specs.
GeneratorSpec parse_spec(const nlohmann::json& j);
GeneratorSpec load_spec(const std::filesystem::path& path);
// Throws SpecError describing the first problem.
void validate_spec(const GeneratorSpec& spec);

// Ground truth written to ground_truth.json next to manifest.json.
struct SessionTruth {
  SessionId id;
  SubjectId subject;
  TrialId trial;
  Skill skill = Skill::expert;
  MotionStyle motion_style = MotionStyle::smooth;
  std::optional<ErrorCoupling> error_coupling;
  std::vector<std::string> dropped_streams;
  std::vector<GapInjection> gaps;
};

struct GroundTruth {
  std::string dataset_name;
  std::uint64_t seed = 0;
  std::vector<SessionTruth> sessions;
};

nlohmann::ordered_json to_json(const GroundTruth& truth);
GroundTruth read_ground_truth(const std::filesystem::path& root);

// Builds the sessions in memory (ids "<subject>_<trial>", profile-major order).
std::vector<Session> synthesize(const GeneratorSpec& spec);

GroundTruth generate(const GeneratorSpec& spec, const std::filesystem::path& out_dir);
GroundTruth generate_degraded(const GeneratorSpec& spec, const Degradations& degradations,
                              const std::filesystem::path& out_dir);

// Writes a session bundle in the interchange format; absent streams produce no file.
void write_session_bundle(const Session& session, const std::filesystem::path& dir);

}  // namespace sessionlens::synth
