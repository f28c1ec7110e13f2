#include "sessionlens/ingest.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <variant>

#include "json.hpp"

namespace sessionlens {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& quality_stream_keys() {
  static const std::vector<std::string> keys{
      "procedures", "errors", "phases", "workload.attention", "workload.perception",
      "workload.memory", "imu", "gaze", "video"};
  return keys;
}

const Session* Dataset::find(const SessionId& id) const {
  for (const auto& s : sessions)
    if (s.id == id) return &s;
  return nullptr;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// A CSV stream failed to parse; the whole stream is treated as absent.
struct StreamError {
  std::string message;
};

struct CsvTable {
  // rows[i] holds the fields of data line i; line_numbers[i] is its 1-based line.
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

// Parses a header-checked CSV. Returns StreamError text on failure.
std::variant<CsvTable, StreamError> read_csv(const fs::path& path,
                                             const std::vector<std::string>& header) {
  CsvTable table;
  std::string contents;
  try {
    contents = read_file(path);
  } catch (const IngestError& e) {
    return StreamError{e.what()};
  }
  std::string_view text = contents;
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  const auto name = path.filename().string();
  std::size_t line_no = 0;
  bool saw_header = false;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.ends_with('\r')) line.remove_suffix(1);
    if (trim(line).empty()) continue;

    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      auto comma = line.find(',', pos);
      fields.emplace_back(trim(line.substr(pos, comma - pos)));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (!saw_header) {
      if (fields != header)
        return StreamError{name + ":" + std::to_string(line_no) + ": unexpected header"};
      saw_header = true;
      continue;
    }
    if (fields.size() != header.size())
      return StreamError{name + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(header.size()) + " fields, got " +
                         std::to_string(fields.size())};
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!saw_header) return StreamError{name + ": missing header"};
  return table;
}

std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  if (s.starts_with('+')) s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

double number_at(const CsvTable& t, std::size_t row, std::size_t col,
                 const std::vector<std::string>& header, const fs::path& path) {
  auto v = parse_number(t.rows[row][col]);
  if (!v)
    throw StreamError{path.filename().string() + ":" + std::to_string(t.line_numbers[row]) +
                      ": non-numeric value '" + std::string(t.rows[row][col]) + "' in column " +
                      header[col]};
  return *v;
}

std::string row_error(const CsvTable& t, std::size_t row, const fs::path& path,
                      const std::string& what) {
  return path.filename().string() + ":" + std::to_string(t.line_numbers[row]) + ": " + what;
}

IntervalTrack read_interval_csv(const fs::path& path, TrackKind kind,
                                const std::vector<std::string>& header, double duration_s) {
  auto parsed = read_csv(path, header);
  if (auto* err = std::get_if<StreamError>(&parsed)) throw *err;
  const auto& table = std::get<CsvTable>(parsed);

  IntervalTrack track{kind, {}};
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    Interval iv;
    iv.start_s = number_at(table, r, 0, header, path);
    iv.end_s = number_at(table, r, 1, header, path);
    iv.label = header.size() > 2 ? std::string(table.rows[r][2]) : std::string("error");
    if (iv.label.empty()) throw StreamError{row_error(table, r, path, "empty label")};
    if (kind == TrackKind::error && iv.end_s - iv.start_s < kMinErrorSpan && iv.end_s >= iv.start_s) {
      iv.end_s = iv.start_s + kMinErrorSpan;
      if (iv.end_s > duration_s) {
        iv.end_s = duration_s;
        iv.start_s = std::max(0.0, duration_s - kMinErrorSpan);
      }
    }
    track.intervals.push_back(std::move(iv));
  }
  std::stable_sort(track.intervals.begin(), track.intervals.end(),
                   [](const Interval& a, const Interval& b) { return a.start_s < b.start_s; });
  if (kind == TrackKind::error) {
    // Error marks are a union of spans: merge overlaps created by logging or widening.
    std::vector<Interval> merged;
    for (auto& iv : track.intervals) {
      if (!merged.empty() && iv.start_s < merged.back().end_s && iv.end_s > iv.start_s)
        merged.back().end_s = std::max(merged.back().end_s, iv.end_s);
      else
        merged.push_back(std::move(iv));
    }
    track.intervals = std::move(merged);
  }
  return track;
}

std::map<WorkloadCategory, WorkloadSeries> read_workload_csv(const fs::path& path) {
  static const std::vector<std::string> header{"t_s", "category", "state", "confidence"};
  auto parsed = read_csv(path, header);
  if (auto* err = std::get_if<StreamError>(&parsed)) throw *err;
  const auto& table = std::get<CsvTable>(parsed);

  std::map<WorkloadCategory, WorkloadSeries> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double t = number_at(table, r, 0, header, path);
    auto cat = parse_workload_category(table.rows[r][1]);
    if (!cat)
      throw StreamError{row_error(table, r, path,
                                  "unknown category '" + std::string(table.rows[r][1]) + "'")};
    auto state = parse_mental_state(table.rows[r][2]);
    if (!state)
      throw StreamError{
          row_error(table, r, path, "unknown state '" + std::string(table.rows[r][2]) + "'")};
    const double conf = number_at(table, r, 3, header, path);
    auto& series = out[*cat];
    series.category = *cat;
    series.samples.push_back(WorkloadSample{t, *state, conf});
  }
  return out;
}

SensorSeries read_sensor_csv(const fs::path& path, SensorKind kind) {
  const auto& channels = sensor_channel_names(kind);
  std::vector<std::string> header{"t_s"};
  header.insert(header.end(), channels.begin(), channels.end());
  auto parsed = read_csv(path, header);
  if (auto* err = std::get_if<StreamError>(&parsed)) throw *err;
  const auto& table = std::get<CsvTable>(parsed);

  SensorSeries series{kind, channels, {}, {}};
  series.times.reserve(table.rows.size());
  series.values.reserve(table.rows.size() * channels.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    series.times.push_back(number_at(table, r, 0, header, path));
    for (std::size_t c = 0; c < channels.size(); ++c)
      series.values.push_back(number_at(table, r, c + 1, header, path));
  }
  return series;
}

void add_gaps(QualityReport& report, const std::string& stream, const std::vector<double>& times,
              double duration_s, double rate_hz) {
  double missing = 0.0;
  for (auto [a, b] : detect_gaps(times, duration_s, rate_hz)) {
    report.gaps.push_back(Gap{stream, a, b});
    missing += b - a;
  }
  report.coverage[stream] = std::clamp(1.0 - missing / duration_s, 0.0, 1.0);
}

}  // namespace

DatasetManifest read_manifest(const fs::path& root) {
  const auto path = root / "manifest.json";
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw IngestError("unparsable manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.dataset_name = j.at("dataset_name").get<std::string>();
    m.procedure_labels = j.at("procedure_labels").get<std::vector<std::string>>();
    for (const auto& s : j.at("sessions"))
      m.sessions.push_back(ManifestEntry{s.at("id").get<std::string>(), s.at("dir").get<std::string>()});
  } catch (const json::exception& e) {
    throw IngestError("invalid manifest " + path.string() + ": " + e.what());
  }
  if (m.procedure_labels.empty()) throw IngestError("manifest procedure_labels is empty");
  std::vector<std::string> ids;
  for (const auto& e : m.sessions) ids.push_back(e.id);
  std::sort(ids.begin(), ids.end());
  if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end())
    throw IngestError("duplicate session id in manifest: " + *dup);
  return m;
}

std::pair<std::optional<Session>, QualityReport> load_session(
    const fs::path& dir, const SessionId& id, const std::vector<std::string>& procedure_labels) {
  QualityReport report;
  report.session_id = id;
  for (const auto& key : quality_stream_keys()) report.stream_presence[key] = Presence::absent;

  Session session;
  session.id = id;
  try {
    const json meta = json::parse(read_file(dir / "session.json"));
    session.subject = meta.at("subject").get<std::string>();
    session.trial = meta.at("trial").get<std::string>();
    session.duration_s = meta.at("duration_s").get<double>();
    if (meta.contains("video") && !meta.at("video").is_null()) {
      const auto& v = meta.at("video");
      session.video = VideoRef{(dir / v.at("file").get<std::string>()).string(),
                               v.at("offset_s").get<double>()};
    }
  } catch (const std::exception& e) {
    report.rejection = Violation{"session_json_invalid", e.what()};
    report.diagnostics.push_back(std::string("session.json: ") + e.what());
    return {std::nullopt, std::move(report)};
  }
  if (!std::isfinite(session.duration_s) || !(session.duration_s > 0.0)) {
    report.rejection = Violation{"duration_invalid", "duration_s must be positive and finite"};
    return {std::nullopt, std::move(report)};
  }

  auto attempt = [&](const std::string& file, auto&& load) {
    const auto path = dir / file;
    if (!fs::exists(path)) return;
    try {
      load(path);
    } catch (const StreamError& e) {
      report.diagnostics.push_back(e.message);
    }
  };
  attempt("procedures.csv", [&](const fs::path& p) {
    session.procedures = read_interval_csv(p, TrackKind::procedure, {"start_s", "end_s", "label"},
                                           session.duration_s);
  });
  attempt("errors.csv", [&](const fs::path& p) {
    session.errors = read_interval_csv(p, TrackKind::error, {"start_s", "end_s"}, session.duration_s);
  });
  attempt("phases.csv", [&](const fs::path& p) {
    session.phases = read_interval_csv(p, TrackKind::phase, {"start_s", "end_s", "phase"},
                                       session.duration_s);
  });
  attempt("workload.csv", [&](const fs::path& p) { session.workload = read_workload_csv(p); });
  attempt("imu.csv", [&](const fs::path& p) { session.imu = read_sensor_csv(p, SensorKind::imu); });
  attempt("gaze.csv", [&](const fs::path& p) { session.gaze = read_sensor_csv(p, SensorKind::gaze); });

  if (session.procedures) report.stream_presence["procedures"] = Presence::present;
  if (session.errors) report.stream_presence["errors"] = Presence::present;
  if (session.phases) report.stream_presence["phases"] = Presence::present;
  for (const auto& [cat, _] : session.workload)
    report.stream_presence["workload." + std::string(to_string(cat))] = Presence::present;
  if (session.imu) report.stream_presence["imu"] = Presence::present;
  if (session.gaze) report.stream_presence["gaze"] = Presence::present;
  if (session.video && fs::exists(session.video->file_path))
    report.stream_presence["video"] = Presence::present;

  if (auto v = validate_session(session, procedure_labels)) {
    report.rejection = *v;
    report.diagnostics.push_back("rejected: " + v->code + ": " + v->message);
    return {std::nullopt, std::move(report)};
  }

  for (auto cat : kAllCategories) {
    const auto key = "workload." + std::string(to_string(cat));
    const auto* series = session.workload_for(cat);
    if (!series) {
      report.coverage[key] = 0.0;
      continue;
    }
    std::vector<double> times;
    times.reserve(series->samples.size());
    for (const auto& s : series->samples) times.push_back(s.t_s);
    add_gaps(report, key, times, session.duration_s, series->nominal_rate_hz);
  }
  for (auto kind : {SensorKind::imu, SensorKind::gaze}) {
    const auto key = std::string(to_string(kind));
    const auto* series = session.sensor(kind);
    if (!series) {
      report.coverage[key] = 0.0;
      continue;
    }
    const double rate = series->estimated_rate_hz();
    if (rate > 0.0) {
      add_gaps(report, key, series->times, session.duration_s, rate);
    } else {
      report.diagnostics.push_back(key + ": too few samples to estimate a sampling rate");
      report.coverage[key] = 0.0;
    }
  }
  report.loaded = true;
  return {std::move(session), std::move(report)};
}

Dataset load_dataset(const fs::path& root) {
  Dataset ds;
  ds.root = root;
  ds.manifest = read_manifest(root);

  const auto n = ds.manifest.sessions.size();
  std::vector<std::pair<std::optional<Session>, QualityReport>> results(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& entry = ds.manifest.sessions[i];
      results[i] = load_session(root / entry.dir, entry.id, ds.manifest.procedure_labels);
    }
  };
  const auto workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(worker);
  pool.clear();

  for (auto& [session, report] : results) {
    if (session) ds.sessions.push_back(std::move(*session));
    ds.reports.push_back(std::move(report));
  }
  return ds;
}

std::vector<std::pair<double, double>> detect_gaps(const std::vector<double>& timestamps,
                                                   double duration_s, double nominal_rate_hz) {
  std::vector<std::pair<double, double>> gaps;
  if (timestamps.empty()) {
    gaps.emplace_back(0.0, duration_s);
    return gaps;
  }
  // The sample before a gap still covers one period, matching workload_runs.
  const double period = 1.0 / nominal_rate_hz;
  const double threshold = kGapFactor * period;
  if (timestamps.front() > threshold) gaps.emplace_back(0.0, timestamps.front());
  for (std::size_t i = 1; i < timestamps.size(); ++i)
    if (timestamps[i] - timestamps[i - 1] > threshold)
      gaps.emplace_back(timestamps[i - 1] + period, timestamps[i]);
  if (duration_s - timestamps.back() > threshold) gaps.emplace_back(timestamps.back() + period, duration_s);
  return gaps;
}

}  // namespace sessionlens
