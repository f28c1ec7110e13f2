#include "sessionlens/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "sessionlens/rng.hpp"

namespace sessionlens::synth {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kMeanDwellS = 8.0;
constexpr double kWorkloadRateHz = 10.0;
constexpr double kPreflightFraction = 0.75;

const StateDistribution& default_bias() {
  static const StateDistribution d{{MentalState::underload, 0.25},
                                   {MentalState::optimal, 0.6},
                                   {MentalState::overload, 0.15}};
  return d;
}

std::string_view to_string(Skill s) { return s == Skill::expert ? "expert" : "novice"; }
std::string_view to_string(MotionStyle m) { return m == MotionStyle::smooth ? "smooth" : "stop_start"; }

double round_tenth(double t) { return std::round(t * 10.0) / 10.0; }

template <typename T>
T required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw SpecError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SpecError(where + ": bad '" + key + "': " + e.what());
  }
}

template <typename T>
T optional_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return required<T>(j, key, where);
}

WorkloadCategory category_from(const std::string& s, const std::string& where) {
  auto c = parse_workload_category(s);
  if (!c) throw SpecError(where + ": unknown category '" + s + "'");
  return *c;
}

MentalState state_from(const std::string& s, const std::string& where) {
  auto st = parse_mental_state(s);
  if (!st) throw SpecError(where + ": unknown state '" + s + "'");
  return *st;
}

}  // namespace

GeneratorSpec parse_spec(const json& j) {
  if (!j.is_object()) throw SpecError("spec must be a JSON object");
  GeneratorSpec spec;
  spec.dataset_name = optional_or<std::string>(j, "dataset_name", spec.dataset_name, "spec");
  spec.seed = optional_or<std::uint64_t>(j, "seed", 0, "spec");
  spec.trials = required<std::vector<std::string>>(j, "trials", "spec");
  spec.procedures = optional_or(j, "procedures", spec.procedures, "spec");
  if (j.contains("duration_range")) {
    auto range = required<std::vector<double>>(j, "duration_range", "spec");
    if (range.size() != 2) throw SpecError("spec: duration_range must have two entries");
    spec.duration_min_s = range[0];
    spec.duration_max_s = range[1];
  }
  spec.procedure_repeats = optional_or<std::size_t>(j, "procedure_repeats", spec.procedure_repeats, "spec");
  spec.error_rate_per_min = optional_or(j, "error_rate_per_min", spec.error_rate_per_min, "spec");
  spec.imu_rate_hz = optional_or(j, "imu_rate_hz", spec.imu_rate_hz, "spec");
  spec.gaze_rate_hz = optional_or(j, "gaze_rate_hz", spec.gaze_rate_hz, "spec");

  if (!j.contains("profiles") || !j.at("profiles").is_array())
    throw SpecError("spec: 'profiles' must be an array");
  for (std::size_t i = 0; i < j.at("profiles").size(); ++i) {
    const auto& p = j.at("profiles")[i];
    const auto where = "profiles[" + std::to_string(i) + "]";
    ProfileSpec profile;
    profile.subject = required<std::string>(p, "subject", where);
    const auto skill = optional_or<std::string>(p, "skill", "expert", where);
    if (skill != "expert" && skill != "novice") throw SpecError(where + ": skill must be expert or novice");
    profile.skill = skill == "expert" ? Skill::expert : Skill::novice;
    const auto motion = optional_or<std::string>(p, "motion_style", "smooth", where);
    if (motion != "smooth" && motion != "stop_start")
      throw SpecError(where + ": motion_style must be smooth or stop_start");
    profile.motion_style = motion == "smooth" ? MotionStyle::smooth : MotionStyle::stop_start;
    if (p.contains("workload_bias")) {
      for (const auto& [cat, dist] : p.at("workload_bias").items()) {
        StateDistribution d;
        for (const auto& [state, prob] : dist.items()) {
          if (!prob.is_number()) throw SpecError(where + ": workload_bias probabilities must be numbers");
          d[state_from(state, where)] = prob.get<double>();
        }
        profile.workload_bias[category_from(cat, where)] = d;
      }
    }
    if (p.contains("error_coupling") && !p.at("error_coupling").is_null()) {
      const auto& c = p.at("error_coupling");
      const auto cw = where + ".error_coupling";
      profile.error_coupling = ErrorCoupling{
          required<std::string>(c, "procedure", cw),
          category_from(required<std::string>(c, "category", cw), cw),
          state_from(required<std::string>(c, "state", cw), cw),
          optional_or(c, "strength", 1.0, cw)};
    }
    spec.profiles.push_back(std::move(profile));
  }

  if (j.contains("degradations")) {
    const auto& d = j.at("degradations");
    for (const auto& drop : d.value("drop_streams", json::array()))
      spec.degradations.drop_streams.push_back(
          StreamDrop{required<std::string>(drop, "session", "drop_streams"),
                     required<std::vector<std::string>>(drop, "streams", "drop_streams")});
    for (const auto& gap : d.value("inject_gaps", json::array()))
      spec.degradations.inject_gaps.push_back(
          GapInjection{required<std::string>(gap, "session", "inject_gaps"),
                       required<std::string>(gap, "stream", "inject_gaps"),
                       required<double>(gap, "start_s", "inject_gaps"),
                       required<double>(gap, "end_s", "inject_gaps")});
    if (d.contains("random_gaps")) {
      const auto& r = d.at("random_gaps");
      RandomGaps rg;
      rg.count = required<std::size_t>(r, "count", "random_gaps");
      rg.min_s = optional_or(r, "min_s", rg.min_s, "random_gaps");
      rg.max_s = optional_or(r, "max_s", rg.max_s, "random_gaps");
      rg.stream = optional_or(r, "stream", rg.stream, "random_gaps");
      rg.sessions = optional_or(r, "sessions", rg.sessions, "random_gaps");
      spec.degradations.random_gaps = rg;
    }
  }
  validate_spec(spec);
  return spec;
}

GeneratorSpec load_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open spec " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SpecError("unparsable spec " + path.string() + ": " + e.what());
  }
  return parse_spec(j);
}

namespace {

std::vector<SessionId> session_ids(const GeneratorSpec& spec) {
  std::vector<SessionId> ids;
  for (const auto& p : spec.profiles)
    for (const auto& t : spec.trials) ids.push_back(p.subject + "_" + t);
  return ids;
}

bool valid_gap_stream(const std::string& s) {
  return s == "workload" || s == "imu" || s == "gaze" ||
         (s.starts_with("workload.") && parse_workload_category(s.substr(9)).has_value());
}

void validate_degradations(const GeneratorSpec& spec, const Degradations& d) {
  const auto ids = session_ids(spec);
  auto known = [&](const SessionId& id) { return std::find(ids.begin(), ids.end(), id) != ids.end(); };
  static const std::set<std::string> droppable{"procedures", "errors", "phases", "workload", "imu", "gaze"};
  for (const auto& drop : d.drop_streams) {
    if (!known(drop.session)) throw SpecError("drop_streams: unknown session '" + drop.session + "'");
    for (const auto& s : drop.streams)
      if (!droppable.contains(s)) throw SpecError("drop_streams: unknown stream '" + s + "'");
  }
  for (const auto& gap : d.inject_gaps) {
    if (!known(gap.session)) throw SpecError("inject_gaps: unknown session '" + gap.session + "'");
    if (!valid_gap_stream(gap.stream)) throw SpecError("inject_gaps: unknown stream '" + gap.stream + "'");
    if (!(gap.start_s >= 0.0 && gap.end_s > gap.start_s))
      throw SpecError("inject_gaps: need 0 <= start_s < end_s");
  }
  if (d.random_gaps) {
    const auto& r = *d.random_gaps;
    if (!valid_gap_stream(r.stream)) throw SpecError("random_gaps: unknown stream '" + r.stream + "'");
    if (!(r.min_s > 0.0 && r.max_s >= r.min_s)) throw SpecError("random_gaps: need 0 < min_s <= max_s");
    if (r.max_s + 4.0 > spec.duration_min_s)
      throw SpecError("random_gaps: max_s does not fit in the shortest session");
    for (const auto& id : r.sessions)
      if (!known(id)) throw SpecError("random_gaps: unknown session '" + id + "'");
  }
}

}  // namespace

void validate_spec(const GeneratorSpec& spec) {
  if (spec.profiles.empty()) throw SpecError("spec: at least one profile is required");
  if (spec.trials.empty()) throw SpecError("spec: at least one trial is required");
  if (spec.procedures.empty()) throw SpecError("spec: at least one procedure label is required");
  std::set<std::string> seen;
  for (const auto& t : spec.trials)
    if (t.empty() || !seen.insert(t).second) throw SpecError("spec: trial ids must be unique and non-empty");
  seen.clear();
  for (const auto& p : spec.procedures)
    if (p.empty() || p.find(',') != std::string::npos || !seen.insert(p).second)
      throw SpecError("spec: procedure labels must be unique, non-empty and comma-free");
  if (!(spec.duration_min_s >= 60.0) || !(spec.duration_max_s >= spec.duration_min_s))
    throw SpecError("spec: duration_range must satisfy 60 <= min <= max");
  if (spec.procedure_repeats == 0) throw SpecError("spec: procedure_repeats must be positive");
  if (!(spec.error_rate_per_min >= 0.0)) throw SpecError("spec: error_rate_per_min must be >= 0");
  if (!(spec.imu_rate_hz > 0.0 && spec.imu_rate_hz <= 1000.0) ||
      !(spec.gaze_rate_hz > 0.0 && spec.gaze_rate_hz <= 1000.0))
    throw SpecError("spec: sensor rates must be in (0, 1000] Hz");

  seen.clear();
  for (const auto& p : spec.profiles) {
    if (p.subject.empty() || !seen.insert(p.subject).second)
      throw SpecError("spec: profile subjects must be unique and non-empty");
    for (const auto& [cat, dist] : p.workload_bias) {
      double sum = 0.0;
      for (const auto& [_, prob] : dist) {
        if (!(prob >= 0.0)) throw SpecError("spec: workload_bias probabilities must be >= 0");
        sum += prob;
      }
      if (std::abs(sum - 1.0) > 1e-6)
        throw SpecError("spec: workload_bias for " + p.subject + "/" + std::string(to_string(cat)) +
                        " must sum to 1");
    }
    if (p.error_coupling) {
      const auto& c = *p.error_coupling;
      if (std::find(spec.procedures.begin(), spec.procedures.end(), c.procedure) == spec.procedures.end())
        throw SpecError("spec: error_coupling procedure '" + c.procedure + "' is not a procedure label");
      if (!(c.strength >= 0.0 && c.strength <= 1.0))
        throw SpecError("spec: error_coupling strength must be in [0, 1]");
    }
  }
  validate_degradations(spec, spec.degradations);
}

namespace {

MentalState draw_state(Rng& rng, const StateDistribution& dist) {
  double u = rng.uniform();
  MentalState last = MentalState::optimal;
  for (auto st : kAllStates) {
    auto it = dist.find(st);
    const double p = it == dist.end() ? 0.0 : it->second;
    if (p <= 0.0) continue;
    last = st;
    if (u < p) return st;
    u -= p;
  }
  return last;
}

struct Layout {
  double duration = 0.0;
  double preflight_end = 0.0;
  IntervalTrack procedures{TrackKind::procedure, {}};
  IntervalTrack phases{TrackKind::phase, {}};
};

Layout make_layout(const GeneratorSpec& spec, Rng& rng) {
  Layout l;
  l.duration = round_tenth(rng.uniform(spec.duration_min_s, spec.duration_max_s));
  l.preflight_end = round_tenth(kPreflightFraction * l.duration);

  std::vector<std::string> order;
  for (std::size_t r = 0; r < spec.procedure_repeats; ++r)
    order.insert(order.end(), spec.procedures.begin(), spec.procedures.end());
  rng.shuffle(order.begin(), order.end());

  std::vector<double> lengths(order.size()), gaps(order.size());
  double total = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    lengths[i] = rng.uniform(0.4, 1.6);
    gaps[i] = rng.uniform(0.0, 0.1);
    total += lengths[i] + gaps[i];
  }
  const double scale = l.preflight_end / total;
  double cursor = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    cursor += gaps[i] * scale;
    const double start = round_tenth(cursor);
    cursor += lengths[i] * scale;
    const double end = std::min(round_tenth(cursor), l.preflight_end);
    if (end - start >= 0.1 &&
        (l.procedures.intervals.empty() || start >= l.procedures.intervals.back().end_s))
      l.procedures.intervals.push_back(Interval{start, end, order[i]});
  }
  l.phases.intervals.push_back(Interval{0.0, l.preflight_end, "PF"});
  l.phases.intervals.push_back(Interval{l.preflight_end, l.duration, "FL"});
  return l;
}

WorkloadSeries make_workload(WorkloadCategory cat, const ProfileSpec& profile, const Layout& layout,
                             Rng& rng) {
  auto bias_it = profile.workload_bias.find(cat);
  const StateDistribution& bias = bias_it == profile.workload_bias.end() ? default_bias() : bias_it->second;

  const ErrorCoupling* coupling =
      profile.error_coupling && profile.error_coupling->category == cat ? &*profile.error_coupling : nullptr;
  // Coupling moves a `strength` share of the planted state's mass into the coupled
  // procedure: inside it the planted state dominates, elsewhere it is thinned.
  StateDistribution coupled, outside = bias;
  if (coupling) {
    double mass = 0.0;
    for (auto st : kAllStates) {
      auto it = bias.find(st);
      const double b = it == bias.end() ? 0.0 : it->second;
      coupled[st] = (1.0 - coupling->strength) * b + (st == coupling->state ? coupling->strength : 0.0);
      outside[st] = st == coupling->state ? (1.0 - coupling->strength) * b : b;
      mass += outside[st];
    }
    if (mass > 0.0) {
      for (auto& [_, p] : outside) p /= mass;
    } else {
      outside = bias;
    }
  }
  // Index of the coupled-procedure occurrence containing t, or -1.
  auto context = [&](double t) -> long {
    if (!coupling) return -1;
    const auto& ivs = layout.procedures.intervals;
    for (std::size_t i = 0; i < ivs.size(); ++i)
      if (ivs[i].label == coupling->procedure && t >= ivs[i].start_s && t < ivs[i].end_s)
        return static_cast<long>(i);
    return -1;
  };

  WorkloadSeries series{cat, {}, kWorkloadRateHz};
  const auto n = static_cast<std::size_t>(std::llround(layout.duration * kWorkloadRateHz));
  series.samples.reserve(n);
  const double switch_p = 1.0 / (kMeanDwellS * kWorkloadRateHz);
  MentalState state = MentalState::optimal;
  double base_conf = 0.8;
  long prev_ctx = -2;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / kWorkloadRateHz;
    const long ctx = context(t);
    const auto& dist = ctx >= 0 ? coupled : outside;
    if (k == 0 || (ctx != prev_ctx && (ctx >= 0 || prev_ctx >= 0))) {
      state = draw_state(rng, dist);
      base_conf = rng.uniform(0.6, 0.95);
    } else if (rng.bernoulli(switch_p)) {
      // a switch leaves the current state, so dwell times stay geometric
      StateDistribution others = dist;
      others.erase(state);
      double mass = 0.0;
      for (const auto& [_, p] : others) mass += p;
      if (mass > 0.0) {
        for (auto& [_, p] : others) p /= mass;
        state = draw_state(rng, others);
        base_conf = rng.uniform(0.6, 0.95);
      }
    }
    prev_ctx = ctx;
    const double conf = std::clamp(base_conf + rng.normal(0.0, 0.03), 0.0, 1.0);
    series.samples.push_back(WorkloadSample{t, state, std::round(conf * 1000.0) / 1000.0});
  }
  return series;
}

void add_error(std::vector<Interval>& errors, double start, double end) {
  for (const auto& e : errors)
    if (start < e.end_s && e.start_s < end) return;
  errors.push_back(Interval{start, end, "error"});
}

IntervalTrack make_errors(const GeneratorSpec& spec, const ProfileSpec& profile, const Layout& layout,
                          const std::map<WorkloadCategory, WorkloadSeries>& workload, Rng& rng) {
  std::vector<Interval> errors;
  double uniform_scale = profile.skill == Skill::expert ? 0.5 : 1.5;
  if (const auto& c = profile.error_coupling) {
    const auto runs = workload_runs(workload.at(c->category), layout.duration);
    for (const auto& iv : layout.procedures.intervals) {
      if (iv.label != c->procedure) continue;
      for (const auto& run : runs) {
        if (run.state != c->state) continue;
        const double a = round_tenth(std::max(run.start_s, iv.start_s));
        const double b = round_tenth(std::min(run.end_s, iv.end_s));
        if (b - a >= 0.1 && rng.bernoulli(c->strength)) add_error(errors, a, b);
      }
    }
    uniform_scale *= 1.0 - c->strength;
  }
  const double rate = spec.error_rate_per_min * uniform_scale / 60.0;
  if (rate > 0.0) {
    double t = rng.exponential(rate);
    while (t < layout.duration) {
      const double start = round_tenth(t);
      const double end = round_tenth(start + rng.uniform(1.0, 5.0));
      if (end <= layout.duration) add_error(errors, start, end);
      t += rng.exponential(rate);
    }
  }
  std::sort(errors.begin(), errors.end(),
            [](const Interval& a, const Interval& b) { return a.start_s < b.start_s; });
  return IntervalTrack{TrackKind::error, std::move(errors)};
}

// Samples at k / rate for every k with k / rate < duration.
std::size_t sample_count(double duration, double rate) {
  return static_cast<std::size_t>(std::floor(duration * rate - 1e-9)) + 1;
}

SensorSeries make_imu(MotionStyle style, double duration, double rate, Rng& rng) {
  SensorSeries s{SensorKind::imu, sensor_channel_names(SensorKind::imu), {}, {}};
  const auto n = sample_count(duration, rate);
  s.times.reserve(n);
  s.values.reserve(n * 9);

  double phase[6], freq[6];
  for (int i = 0; i < 6; ++i) {
    phase[i] = rng.uniform(0.0, 2.0 * M_PI);
    freq[i] = rng.uniform(0.02, 0.08);
  }
  bool moving = false;
  double segment_end = 0.0;
  double yaw = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / rate;
    double a[3], g[3];
    if (style == MotionStyle::smooth) {
      for (int i = 0; i < 3; ++i) {
        a[i] = 0.6 * std::sin(2.0 * M_PI * freq[i] * t + phase[i]) + rng.normal(0.0, 0.02);
        g[i] = 0.25 * std::sin(2.0 * M_PI * freq[i + 3] * t + phase[i + 3]) + rng.normal(0.0, 0.01);
      }
      yaw = 0.5 * std::sin(2.0 * M_PI * freq[0] * t + phase[3]);
    } else {
      if (t >= segment_end) {
        moving = !moving;
        segment_end = t + (moving ? rng.uniform(1.0, 4.0) : rng.uniform(3.0, 12.0));
      }
      const double amp = moving ? 2.5 : 0.02;
      const double gamp = moving ? 1.5 : 0.01;
      for (int i = 0; i < 3; ++i) {
        a[i] = rng.normal(0.0, amp);
        g[i] = rng.normal(0.0, gamp);
      }
      if (moving) yaw += rng.normal(0.0, 0.05);
    }
    a[2] += 9.81;
    s.times.push_back(t);
    for (double v : a) s.values.push_back(v);
    for (double v : g) s.values.push_back(v);
    s.values.push_back(30.0 * std::cos(yaw) + rng.normal(0.0, 0.2));
    s.values.push_back(30.0 * std::sin(yaw) + rng.normal(0.0, 0.2));
    s.values.push_back(-40.0 + rng.normal(0.0, 0.2));
  }
  return s;
}

SensorSeries make_gaze(MotionStyle style, double duration, double rate, Rng& rng) {
  SensorSeries s{SensorKind::gaze, sensor_channel_names(SensorKind::gaze), {}, {}};
  const auto n = sample_count(duration, rate);
  s.times.reserve(n);
  s.values.reserve(n * 6);
  double origin[3] = {0.0, 1.6, 0.0};
  double dir[3] = {0.0, 0.0, 1.0};
  const double step = style == MotionStyle::smooth ? 0.01 : 0.03;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / rate;
    if (k > 0) {
      for (double& o : origin) o += rng.normal(0.0, 0.002);
      const bool saccade = rng.bernoulli(0.01);
      double norm = 0.0;
      for (double& d : dir) {
        d += rng.normal(0.0, saccade ? 0.2 : step);
        norm += d * d;
      }
      norm = std::sqrt(norm);
      for (double& d : dir) d /= norm;
    }
    s.times.push_back(t);
    for (double o : origin) s.values.push_back(o);
    for (double d : dir) s.values.push_back(d);
  }
  return s;
}

}  // namespace

std::vector<Session> synthesize(const GeneratorSpec& spec) {
  validate_spec(spec);
  std::vector<Session> sessions;
  std::uint64_t index = 0;
  for (const auto& profile : spec.profiles) {
    for (const auto& trial : spec.trials) {
      const auto session_seed = mix_seed(spec.seed, index++);
      Rng layout_rng(mix_seed(session_seed, 1));
      Rng error_rng(mix_seed(session_seed, 2));
      Rng imu_rng(mix_seed(session_seed, 3));
      Rng gaze_rng(mix_seed(session_seed, 4));

      Session s;
      s.id = profile.subject + "_" + trial;
      s.subject = profile.subject;
      s.trial = trial;
      const auto layout = make_layout(spec, layout_rng);
      s.duration_s = layout.duration;
      s.procedures = layout.procedures;
      s.phases = layout.phases;
      for (auto cat : kAllCategories) {
        Rng rng(mix_seed(session_seed, 10 + static_cast<std::uint64_t>(cat)));
        s.workload[cat] = make_workload(cat, profile, layout, rng);
      }
      s.errors = make_errors(spec, profile, layout, s.workload, error_rng);
      s.imu = make_imu(profile.motion_style, layout.duration, spec.imu_rate_hz, imu_rng);
      s.gaze = make_gaze(profile.motion_style, layout.duration, spec.gaze_rate_hz, gaze_rng);
      sessions.push_back(std::move(s));
    }
  }
  return sessions;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string intervals_csv(const IntervalTrack& track, const char* header, bool with_label) {
  std::string out = std::string(header) + "\n";
  for (const auto& iv : track.intervals) {
    out += fmt::format("{:.3f},{:.3f}", iv.start_s, iv.end_s);
    if (with_label) out += "," + iv.label;
    out += "\n";
  }
  return out;
}

std::string sensor_csv(const SensorSeries& s, int precision) {
  std::string out = "t_s";
  for (const auto& c : s.channel_names) out += "," + c;
  out += "\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += fmt::format("{:.3f}", s.times[i]);
    for (double v : s.row(i)) out += fmt::format(",{:.{}f}", v, precision);
    out += "\n";
  }
  return out;
}

void remove_span(Session& s, const std::string& stream, double a, double b) {
  auto in_gap = [&](double t) { return t >= a && t < b; };
  if (stream == "workload" || stream.starts_with("workload.")) {
    for (auto& [cat, series] : s.workload) {
      if (stream != "workload" && stream.substr(9) != to_string(cat)) continue;
      std::erase_if(series.samples, [&](const WorkloadSample& w) { return in_gap(w.t_s); });
    }
    return;
  }
  auto& sensor = stream == "imu" ? s.imu : s.gaze;
  if (!sensor) return;
  SensorSeries kept{sensor->kind, sensor->channel_names, {}, {}};
  for (std::size_t i = 0; i < sensor->size(); ++i) {
    if (in_gap(sensor->times[i])) continue;
    kept.times.push_back(sensor->times[i]);
    auto row = sensor->row(i);
    kept.values.insert(kept.values.end(), row.begin(), row.end());
  }
  *sensor = std::move(kept);
}

void drop_stream(Session& s, const std::string& stream) {
  if (stream == "procedures") s.procedures.reset();
  else if (stream == "errors") s.errors.reset();
  else if (stream == "phases") s.phases.reset();
  else if (stream == "workload") s.workload.clear();
  else if (stream == "imu") s.imu.reset();
  else if (stream == "gaze") s.gaze.reset();
}

std::vector<GapInjection> place_random_gaps(const GeneratorSpec& spec, const RandomGaps& rg,
                                            const std::vector<Session>& sessions,
                                            const std::vector<GapInjection>& fixed) {
  std::vector<const Session*> targets;
  for (const auto& s : sessions)
    if (rg.sessions.empty() || std::find(rg.sessions.begin(), rg.sessions.end(), s.id) != rg.sessions.end())
      targets.push_back(&s);
  std::vector<GapInjection> placed;
  if (targets.empty()) return placed;
  Rng rng(mix_seed(spec.seed, 0xDE6A));
  auto conflicts = [&](const GapInjection& g) {
    auto clash = [&](const GapInjection& o) {
      return o.session == g.session && g.start_s < o.end_s + 2.0 && o.start_s < g.end_s + 2.0;
    };
    return std::any_of(placed.begin(), placed.end(), clash) || std::any_of(fixed.begin(), fixed.end(), clash);
  };
  for (std::size_t i = 0; i < rg.count; ++i) {
    const Session& s = *targets[i % targets.size()];
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      const double len = round_tenth(rng.uniform(rg.min_s, rg.max_s));
      const double start = round_tenth(rng.uniform(1.0, s.duration_s - len - 2.0));
      GapInjection g{s.id, rg.stream, start, start + len};
      g.end_s = round_tenth(g.end_s);
      if (!conflicts(g)) {
        placed.push_back(g);
        ok = true;
      }
    }
    if (!ok) throw SpecError("random_gaps: could not place gap " + std::to_string(i) + " in " + s.id);
  }
  return placed;
}

GroundTruth write_dataset(const GeneratorSpec& spec, std::vector<Session> sessions,
                          const Degradations& degradations, const fs::path& out_dir) {
  GroundTruth truth;
  truth.dataset_name = spec.dataset_name;
  truth.seed = spec.seed;
  std::size_t p = 0, t = 0;
  for (const auto& s : sessions) {
    const auto& profile = spec.profiles[p];
    truth.sessions.push_back(SessionTruth{s.id, s.subject, s.trial, profile.skill,
                                          profile.motion_style, profile.error_coupling, {}, {}});
    if (++t == spec.trials.size()) {
      t = 0;
      ++p;
    }
  }
  auto truth_for = [&](const SessionId& id) -> SessionTruth& {
    return *std::find_if(truth.sessions.begin(), truth.sessions.end(),
                         [&](const SessionTruth& st) { return st.id == id; });
  };
  auto session_for = [&](const SessionId& id) -> Session& {
    return *std::find_if(sessions.begin(), sessions.end(), [&](const Session& s) { return s.id == id; });
  };

  std::vector<GapInjection> gaps = degradations.inject_gaps;
  if (degradations.random_gaps) {
    auto random = place_random_gaps(spec, *degradations.random_gaps, sessions, gaps);
    gaps.insert(gaps.end(), random.begin(), random.end());
  }
  for (const auto& g : gaps) {
    remove_span(session_for(g.session), g.stream, g.start_s, g.end_s);
    truth_for(g.session).gaps.push_back(g);
  }
  for (const auto& drop : degradations.drop_streams) {
    for (const auto& stream : drop.streams) {
      drop_stream(session_for(drop.session), stream);
      auto& dropped = truth_for(drop.session).dropped_streams;
      if (std::find(dropped.begin(), dropped.end(), stream) == dropped.end()) dropped.push_back(stream);
    }
  }

  fs::create_directories(out_dir);
  ordered_json manifest;
  manifest["dataset_name"] = spec.dataset_name;
  manifest["procedure_labels"] = spec.procedures;
  manifest["sessions"] = ordered_json::array();
  for (const auto& s : sessions) {
    manifest["sessions"].push_back({{"id", s.id}, {"dir", s.id}});
    const auto dir = out_dir / s.id;
    fs::remove_all(dir);
    write_session_bundle(s, dir);
  }
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  write_text(out_dir / "ground_truth.json", to_json(truth).dump(2) + "\n");
  return truth;
}

}  // namespace

void write_session_bundle(const Session& s, const fs::path& dir) {
  fs::create_directories(dir);
  ordered_json meta;
  meta["subject"] = s.subject;
  meta["trial"] = s.trial;
  meta["duration_s"] = s.duration_s;
  if (s.video) {
    meta["video"] = {{"file", fs::path(s.video->file_path).filename().string()},
                     {"offset_s", s.video->offset_s}};
  } else {
    meta["video"] = nullptr;
  }
  write_text(dir / "session.json", meta.dump(2) + "\n");
  if (s.procedures) write_text(dir / "procedures.csv", intervals_csv(*s.procedures, "start_s,end_s,label", true));
  if (s.errors) write_text(dir / "errors.csv", intervals_csv(*s.errors, "start_s,end_s", false));
  if (s.phases) write_text(dir / "phases.csv", intervals_csv(*s.phases, "start_s,end_s,phase", true));
  if (!s.workload.empty()) {
    std::string out = "t_s,category,state,confidence\n";
    for (const auto& [cat, series] : s.workload)
      for (const auto& w : series.samples)
        out += fmt::format("{:.3f},{},{},{:.3f}\n", w.t_s, to_string(cat), to_string(w.state), w.confidence);
    write_text(dir / "workload.csv", out);
  }
  if (s.imu) write_text(dir / "imu.csv", sensor_csv(*s.imu, 4));
  if (s.gaze) write_text(dir / "gaze.csv", sensor_csv(*s.gaze, 5));
}

GroundTruth generate(const GeneratorSpec& spec, const fs::path& out_dir) {
  return write_dataset(spec, synthesize(spec), Degradations{}, out_dir);
}

GroundTruth generate_degraded(const GeneratorSpec& spec, const Degradations& degradations,
                              const fs::path& out_dir) {
  validate_spec(spec);
  validate_degradations(spec, degradations);
  return write_dataset(spec, synthesize(spec), degradations, out_dir);
}

ordered_json to_json(const GroundTruth& truth) {
  ordered_json j;
  j["dataset_name"] = truth.dataset_name;
  j["seed"] = truth.seed;
  j["sessions"] = ordered_json::array();
  for (const auto& s : truth.sessions) {
    ordered_json sj;
    sj["id"] = s.id;
    sj["subject"] = s.subject;
    sj["trial"] = s.trial;
    sj["skill"] = to_string(s.skill);
    sj["motion_style"] = to_string(s.motion_style);
    if (s.error_coupling) {
      sj["error_coupling"] = {{"procedure", s.error_coupling->procedure},
                              {"category", to_string(s.error_coupling->category)},
                              {"state", to_string(s.error_coupling->state)},
                              {"strength", s.error_coupling->strength}};
    } else {
      sj["error_coupling"] = nullptr;
    }
    sj["dropped_streams"] = s.dropped_streams;
    sj["gaps"] = ordered_json::array();
    for (const auto& g : s.gaps)
      sj["gaps"].push_back({{"stream", g.stream}, {"start_s", g.start_s}, {"end_s", g.end_s}});
    j["sessions"].push_back(std::move(sj));
  }
  return j;
}

GroundTruth read_ground_truth(const fs::path& root) {
  std::ifstream in(root / "ground_truth.json");
  if (!in) throw std::runtime_error("cannot open " + (root / "ground_truth.json").string());
  const json j = json::parse(in);
  GroundTruth truth;
  truth.dataset_name = j.at("dataset_name").get<std::string>();
  truth.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& sj : j.at("sessions")) {
    SessionTruth s;
    s.id = sj.at("id").get<std::string>();
    s.subject = sj.at("subject").get<std::string>();
    s.trial = sj.at("trial").get<std::string>();
    s.skill = sj.at("skill").get<std::string>() == "expert" ? Skill::expert : Skill::novice;
    s.motion_style = sj.at("motion_style").get<std::string>() == "smooth" ? MotionStyle::smooth
                                                                          : MotionStyle::stop_start;
    if (!sj.at("error_coupling").is_null()) {
      const auto& c = sj.at("error_coupling");
      s.error_coupling = ErrorCoupling{c.at("procedure").get<std::string>(),
                                       *parse_workload_category(c.at("category").get<std::string>()),
                                       *parse_mental_state(c.at("state").get<std::string>()),
                                       c.at("strength").get<double>()};
    }
    s.dropped_streams = sj.at("dropped_streams").get<std::vector<std::string>>();
    for (const auto& g : sj.at("gaps"))
      s.gaps.push_back(GapInjection{s.id, g.at("stream").get<std::string>(), g.at("start_s").get<double>(),
                                    g.at("end_s").get<double>()});
    truth.sessions.push_back(std::move(s));
  }
  return truth;
}

}  // namespace sessionlens::synth
