#include "sessionlens/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sessionlens::analytics {

namespace {

std::vector<const Session*> pointers(std::span<const Session> sessions) {
  std::vector<const Session*> out;
  out.reserve(sessions.size());
  for (const auto& s : sessions) out.push_back(&s);
  return out;
}

}  // namespace

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 3) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0, qx = 0.0, qy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
    qx += x[i] * x[i];
    qy += y[i] * y[i];
  }
  // Variance below rounding noise of the raw values counts as zero.
  if (!(sxx > 1e-24 * qx) || !(syy > 1e-24 * qy)) return std::nullopt;
  const double r = sxy / std::sqrt(sxx * syy);
  if (!std::isfinite(r)) return std::nullopt;
  return std::clamp(r, -1.0, 1.0);
}

std::optional<double> partial_correlation(double r_se, double r_sp, double r_ep) {
  const double denom_sq = (1.0 - r_sp * r_sp) * (1.0 - r_ep * r_ep);
  if (!(std::abs(r_sp) < 1.0) || !(std::abs(r_ep) < 1.0) || !(denom_sq > 0.0)) return std::nullopt;
  return (r_se - r_sp * r_ep) / std::sqrt(denom_sq);
}

StateProportions state_proportions(std::span<const Session* const> sessions) {
  StateProportions out;
  std::map<WorkloadCategory, std::map<MentalState, double>> seconds;
  for (const auto* session : sessions) {
    for (const auto& [cat, series] : session->workload) {
      for (const auto& run : workload_runs(series, session->duration_s))
        seconds[cat][run.state] += run.end_s - run.start_s;
    }
  }
  for (const auto& [cat, per_state] : seconds) {
    double covered = 0.0;
    for (const auto& [_, s] : per_state) covered += s;
    if (!(covered > 0.0)) continue;
    auto& fractions = out.categories[cat];
    for (auto st : kAllStates) {
      auto it = per_state.find(st);
      fractions[st] = it == per_state.end() ? 0.0 : it->second / covered;
    }
    out.covered_seconds[cat] = covered;
  }
  return out;
}

StateProportions state_proportions(std::span<const Session> sessions) {
  const auto ptrs = pointers(sessions);
  return state_proportions(std::span<const Session* const>(ptrs));
}

OccurrenceSamples collect_occurrences(std::span<const Session* const> sessions,
                                      WorkloadCategory category) {
  OccurrenceSamples out;
  for (auto st : kAllStates) out.state_seconds[st];
  for (const auto* session : sessions) {
    const auto* series = session->workload_for(category);
    if (!session->procedures || !session->errors || !series) continue;
    const auto runs = workload_runs(*series, session->duration_s);
    for (const auto& iv : session->procedures->intervals) {
      out.labels.push_back(iv.label);
      for (auto st : kAllStates)
        out.state_seconds[st].push_back(state_seconds(runs, st, iv.start_s, iv.end_s));
      out.error_seconds.push_back(overlap_seconds(*session->errors, iv.start_s, iv.end_s));
    }
  }
  return out;
}

StateCorrelations error_contribution(std::span<const Session* const> sessions,
                                     WorkloadCategory category) {
  const auto samples = collect_occurrences(sessions, category);
  StateCorrelations out;
  for (auto st : kAllStates)
    out[st] = Correlation{pearson(samples.state_seconds.at(st), samples.error_seconds), samples.size()};
  return out;
}

StateCorrelations error_contribution(std::span<const Session> sessions, WorkloadCategory category) {
  const auto ptrs = pointers(sessions);
  return error_contribution(std::span<const Session* const>(ptrs), category);
}

std::optional<double> partial_r_per_procedure(const OccurrenceSamples& samples,
                                              const std::string& label, MentalState state) {
  std::vector<double> indicator(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) indicator[i] = samples.labels[i] == label ? 1.0 : 0.0;
  const auto& s = samples.state_seconds.at(state);
  const auto& e = samples.error_seconds;
  const auto r_se = pearson(s, e);
  const auto r_sp = pearson(s, indicator);
  const auto r_ep = pearson(e, indicator);
  if (!r_se || !r_sp || !r_ep) return std::nullopt;
  return partial_correlation(*r_se, *r_sp, *r_ep);
}

std::optional<double> partial_r_per_procedure(std::span<const Session> sessions,
                                              const std::string& label, WorkloadCategory category,
                                              MentalState state) {
  const auto ptrs = pointers(sessions);
  return partial_r_per_procedure(collect_occurrences(ptrs, category), label, state);
}

ProcedureSummary procedure_summary(const Session& session, WorkloadCategory category) {
  if (!session.procedures)
    throw std::invalid_argument("session " + session.id + " has no procedures");
  ProcedureSummary out;
  out.session_id = session.id;
  out.category = category;

  auto labels = distinct_labels(*session.procedures);
  std::sort(labels.begin(), labels.end());

  std::optional<OccurrenceSamples> samples;
  if (session.errors && session.workload_for(category)) {
    const Session* self = &session;
    samples = collect_occurrences(std::span<const Session* const>(&self, 1), category);
  }

  for (const auto& label : labels) {
    ProcedureStats stats;
    stats.label = label;
    const double total = total_label_duration(*session.procedures, label);
    stats.prevalence = total / session.duration_s;
    if (session.errors && total > 0.0) {
      double err = 0.0;
      for (const auto& iv : session.procedures->intervals)
        if (iv.label == label) err += overlap_seconds(*session.errors, iv.start_s, iv.end_s);
      stats.error_fraction = std::clamp(err / total, 0.0, 1.0);
    }
    if (samples) {
      std::map<MentalState, std::optional<double>> partial;
      for (auto st : kAllStates) partial[st] = partial_r_per_procedure(*samples, label, st);
      stats.partial_r = std::move(partial);
    }
    out.procedures.push_back(std::move(stats));
  }
  return out;
}

std::vector<GroupAggregate> aggregate_group(std::span<const Session* const> sessions,
                                            GroupBy group_by) {
  std::map<std::string, std::vector<const Session*>> groups;
  for (const auto* s : sessions) groups[group_by == GroupBy::subject ? s->subject : s->trial].push_back(s);

  std::vector<GroupAggregate> out;
  for (const auto& [key, members] : groups) {
    GroupAggregate g;
    g.key = key;
    double total = 0.0;
    for (const auto* s : members) {
      g.session_ids.push_back(s->id);
      total += s->duration_s;
    }
    g.avg_duration_s = total / static_cast<double>(members.size());
    g.proportions = state_proportions(members);
    for (auto cat : kAllCategories) g.error_contribution.categories[cat] = error_contribution(members, cat);
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GroupAggregate> aggregate_group(std::span<const Session> sessions, GroupBy group_by) {
  const auto ptrs = pointers(sessions);
  return aggregate_group(std::span<const Session* const>(ptrs), group_by);
}

}  // namespace sessionlens::analytics
