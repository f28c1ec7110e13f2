#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sessionlens/model.hpp"

namespace sessionlens::analytics {

// Fraction of covered workload time per state, for each category with data.
struct StateProportions {
  std::map<WorkloadCategory, std::map<MentalState, double>> categories;
  std::map<WorkloadCategory, double> covered_seconds;
};

struct Correlation {
  std::optional<double> r;  // undefined for n < 3 or a zero-variance input
  std::size_t n_samples = 0;
};

using StateCorrelations = std::map<MentalState, Correlation>;

// Per (category, state) error correlation. Categories without usable data are absent.
struct ErrorContribution {
  std::map<WorkloadCategory, StateCorrelations> categories;
};

struct ProcedureStats {
  std::string label;
  double prevalence = 0.0;
  double error_fraction = 0.0;
  std::optional<std::map<MentalState, std::optional<double>>> partial_r;
};

struct ProcedureSummary {
  SessionId session_id;
  WorkloadCategory category = WorkloadCategory::attention;
  std::vector<ProcedureStats> procedures;  // sorted by label
};

enum class GroupBy { subject, trial };

struct GroupAggregate {
  std::string key;
  std::vector<SessionId> session_ids;
  StateProportions proportions;
  ErrorContribution error_contribution;
  double avg_duration_s = 0.0;
};

// Sample Pearson coefficient clamped to [-1, 1]; nullopt for n < 3, mismatched lengths,
// or (numerically) zero variance in either input.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Correlation of s and e controlling for p; nullopt when |r_sp| or |r_ep| is 1.
std::optional<double> partial_correlation(double r_se, double r_sp, double r_ep);

StateProportions state_proportions(std::span<const Session> sessions);
StateProportions state_proportions(std::span<const Session* const> sessions);

// One row per procedure interval occurrence across sessions that carry procedures,
// errors and the category's workload.
struct OccurrenceSamples {
  std::vector<std::string> labels;
  std::map<MentalState, std::vector<double>> state_seconds;
  std::vector<double> error_seconds;

  std::size_t size() const { return labels.size(); }
};

OccurrenceSamples collect_occurrences(std::span<const Session* const> sessions,
                                      WorkloadCategory category);

StateCorrelations error_contribution(std::span<const Session> sessions, WorkloadCategory category);
StateCorrelations error_contribution(std::span<const Session* const> sessions,
                                     WorkloadCategory category);

std::optional<double> partial_r_per_procedure(std::span<const Session> sessions,
                                              const std::string& label, WorkloadCategory category,
                                              MentalState state);
std::optional<double> partial_r_per_procedure(const OccurrenceSamples& samples,
                                              const std::string& label, MentalState state);

// Throws std::invalid_argument when the session has no procedures.
ProcedureSummary procedure_summary(const Session& session, WorkloadCategory category);

std::vector<GroupAggregate> aggregate_group(std::span<const Session* const> sessions, GroupBy group_by);
std::vector<GroupAggregate> aggregate_group(std::span<const Session> sessions, GroupBy group_by);

}  // namespace sessionlens::analytics
