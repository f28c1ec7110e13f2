#include "sessionlens/api.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include "sessionlens/analytics.hpp"
#include "sessionlens/query.hpp"

namespace sessionlens::service {

namespace fs = std::filesystem;

Json ApiError::to_json() const { return Json{{"code", code_}, {"message", what()}, {"detail", detail_}}; }

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json finite_or_null(const std::optional<double>& v) { return v ? finite_or_null(*v) : Json(nullptr); }

bool all_numbers_finite(const Json& j) {
  if (j.is_number_float()) return std::isfinite(j.get<double>());
  if (j.is_structured()) {
    for (const auto& v : j)
      if (!all_numbers_finite(v)) return false;
  }
  return true;
}

namespace {

std::optional<std::string> param(const QueryParams& params, const std::string& key) {
  auto it = params.find(key);
  if (it == params.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

std::vector<std::string> param_list(const QueryParams& params, const std::string& key) {
  std::vector<std::string> out;
  auto [lo, hi] = params.equal_range(key);
  for (auto it = lo; it != hi; ++it) {
    std::string_view rest = it->second;
    while (!rest.empty()) {
      auto comma = rest.find(',');
      auto item = rest.substr(0, comma);
      if (!item.empty()) out.emplace_back(item);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  }
  return out;
}

ApiError bad_parameter(const std::string& key, const std::string& value, const std::string& expected) {
  return ApiError(400, "invalid_parameter", "parameter '" + key + "' must be " + expected,
                  "got '" + value + "'");
}

std::optional<double> number_param(const QueryParams& params, const std::string& key) {
  auto raw = param(params, key);
  if (!raw) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), v);
  if (ec != std::errc{} || ptr != raw->data() + raw->size() || !std::isfinite(v))
    throw bad_parameter(key, *raw, "a finite number");
  return v;
}

std::optional<std::uint64_t> count_param(const QueryParams& params, const std::string& key) {
  auto raw = param(params, key);
  if (!raw) return std::nullopt;
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), v);
  if (ec != std::errc{} || ptr != raw->data() + raw->size()) throw bad_parameter(key, *raw, "a non-negative integer");
  return v;
}

WorkloadCategory category_param(const QueryParams& params) {
  auto raw = param(params, "category");
  if (!raw) return WorkloadCategory::attention;
  auto c = parse_workload_category(*raw);
  if (!c) throw bad_parameter("category", *raw, "one of perception, attention, memory");
  return *c;
}

const Session& require_session(const Dataset& ds, const std::string& id) {
  const auto* s = ds.find(id);
  if (!s) throw ApiError(404, "unknown_session", "unknown session id '" + id + "'", id);
  return *s;
}

Json intervals_json(const std::vector<Interval>& ivs, const char* label_key) {
  Json out = Json::array();
  for (const auto& iv : ivs) {
    Json j{{"start_s", iv.start_s}, {"end_s", iv.end_s}};
    if (label_key) j[label_key] = iv.label;
    out.push_back(std::move(j));
  }
  return out;
}

Json timeline_json(const query::TimelineBundle& tb) {
  Json workload = Json::array();
  for (const auto& run : tb.workload)
    workload.push_back({{"start_s", run.start_s}, {"end_s", run.end_s}, {"state", to_string(run.state)}});
  Json confidence = Json::array();
  for (const auto& p : tb.confidence) confidence.push_back({{"t_s", p.t_s}, {"confidence", p.confidence}});
  return Json{{"session_id", tb.session_id},
              {"duration_s", tb.duration_s},
              {"category", to_string(tb.category)},
              {"procedures", intervals_json(tb.procedures, "label")},
              {"errors", intervals_json(tb.errors, nullptr)},
              {"phases", intervals_json(tb.phases, "phase")},
              {"workload", std::move(workload)},
              {"confidence", std::move(confidence)}};
}

Json correlations_json(const analytics::StateCorrelations& corr) {
  Json out = Json::object();
  for (const auto& [state, c] : corr)
    out[std::string(to_string(state))] = {{"r", finite_or_null(c.r)}, {"n", c.n_samples}};
  return out;
}

Json proportions_json(const analytics::StateProportions& props) {
  Json out = Json::object();
  for (const auto& [cat, fractions] : props.categories) {
    Json f = Json::object();
    for (const auto& [state, v] : fractions) f[std::string(to_string(state))] = finite_or_null(v);
    out[std::string(to_string(cat))] = std::move(f);
  }
  return out;
}

std::string content_type_for(const fs::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".mp4" || ext == ".m4v") return "video/mp4";
  if (ext == ".webm") return "video/webm";
  if (ext == ".mov") return "video/quicktime";
  if (ext == ".mkv") return "video/x-matroska";
  return "application/octet-stream";
}

}  // namespace

Json quality_json(const QualityReport& report) {
  Json presence = Json::object();
  for (const auto& [key, p] : report.stream_presence) presence[key] = p == Presence::present ? "present" : "absent";
  Json gaps = Json::array();
  for (const auto& g : report.gaps) gaps.push_back({{"stream", g.stream}, {"start_s", g.start_s}, {"end_s", g.end_s}});
  Json coverage = Json::object();
  for (const auto& [key, v] : report.coverage) coverage[key] = finite_or_null(v);
  Json rejection = nullptr;
  if (report.rejection) rejection = {{"code", report.rejection->code}, {"message", report.rejection->message}};
  return Json{{"session_id", report.session_id}, {"loaded", report.loaded},     {"rejection", rejection},
              {"stream_presence", presence},      {"gaps", gaps},                {"coverage", coverage},
              {"diagnostics", report.diagnostics}};
}

Api::Api(std::shared_ptr<const Dataset> dataset, embed::EmbedParams embed_defaults)
    : embed_defaults_(embed_defaults), snapshot_{std::move(dataset), std::make_shared<EmbeddingCache>()} {}

Api::Snapshot Api::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

void Api::reload(std::shared_ptr<const Dataset> dataset) {
  Snapshot fresh{std::move(dataset), std::make_shared<EmbeddingCache>()};
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(fresh);
}

std::shared_ptr<const Dataset> Api::dataset() const { return snapshot().dataset; }

std::size_t Api::embedding_computations() const {
  auto snap = snapshot();
  std::lock_guard lock(snap.cache->mutex);
  return snap.cache->computations;
}

Json Api::health() const {
  return Json{{"status", "ok"}, {"sessions", snapshot().dataset->sessions.size()}};
}

Json Api::sessions(const QueryParams& params) const {
  const auto ds = snapshot().dataset;
  query::SessionFilter filter;
  if (auto subjects = param_list(params, "subject"); !subjects.empty())
    filter.subjects = std::set<SubjectId>(subjects.begin(), subjects.end());
  if (auto trials = param_list(params, "trial"); !trials.empty())
    filter.trials = std::set<TrialId>(trials.begin(), trials.end());
  if (auto k = count_param(params, "top_k_trials")) filter.top_k_trials = static_cast<std::size_t>(*k);

  Json list = Json::array();
  for (const auto& meta : query::list_sessions(*ds, filter)) {
    list.push_back({{"id", meta.id},
                    {"subject", meta.subject},
                    {"trial", meta.trial},
                    {"duration_s", meta.duration_s},
                    {"streams", meta.streams}});
  }
  return Json{{"dataset_name", ds->manifest.dataset_name},
              {"procedure_labels", ds->manifest.procedure_labels},
              {"sessions", std::move(list)}};
}

Json Api::quality() const {
  const auto ds = snapshot().dataset;
  Json reports = Json::array();
  for (const auto& r : ds->reports) reports.push_back(quality_json(r));
  return Json{{"reports", std::move(reports)}};
}

Json Api::embedding(const QueryParams& params) const {
  const auto raw_stream = param(params, "stream").value_or("imu");
  const auto stream = embed::parse_stream_kind(raw_stream);
  if (!stream) throw bad_parameter("stream", raw_stream, "one of imu, gaze, fnirs");
  auto p = embed_defaults_;
  if (auto k = count_param(params, "k")) p.shapelet_count = static_cast<std::size_t>(*k);
  if (auto m = count_param(params, "m")) p.shapelet_length = static_cast<std::size_t>(*m);
  if (auto len = count_param(params, "len")) p.series_length = static_cast<std::size_t>(*len);
  if (auto seed = count_param(params, "seed")) p.seed = *seed;
  if (p.shapelet_count == 0 || p.shapelet_count > 4096)
    throw bad_parameter("k", std::to_string(p.shapelet_count), "in [1, 4096]");
  if (p.series_length < 3 || p.series_length > 8192)
    throw bad_parameter("len", std::to_string(p.series_length), "in [3, 8192]");
  if (p.shapelet_length < 2 || p.shapelet_length >= p.series_length)
    throw bad_parameter("m", std::to_string(p.shapelet_length), "in [2, len)");

  const std::string key = std::string(embed::to_string(*stream)) + "|" + std::to_string(p.shapelet_count) + "|" +
                          std::to_string(p.shapelet_length) + "|" + std::to_string(p.series_length) + "|" +
                          std::to_string(p.seed);
  auto snap = snapshot();
  std::promise<Json> promise;
  std::shared_future<Json> future;
  bool fill = false;
  {
    std::lock_guard lock(snap.cache->mutex);
    auto it = snap.cache->entries.find(key);
    if (it == snap.cache->entries.end()) {
      future = promise.get_future().share();
      snap.cache->entries.emplace(key, future);
      ++snap.cache->computations;
      fill = true;
    } else {
      future = it->second;
    }
  }
  if (fill) {
    try {
      const auto emb = embed::embed_sessions(snap.dataset->sessions, *stream, p);
      Json points = Json::array();
      for (const auto& pt : emb.points)
        points.push_back({{"session_id", pt.session_id}, {"x", finite_or_null(pt.x)}, {"y", finite_or_null(pt.y)}});
      promise.set_value(Json{{"stream", embed::to_string(*stream)},
                             {"params",
                              {{"k", p.shapelet_count}, {"m", p.shapelet_length}, {"len", p.series_length},
                               {"seed", p.seed}}},
                             {"points", std::move(points)},
                             {"omitted", emb.omitted}});
    } catch (const embed::EmbedError& e) {
      promise.set_exception(std::make_exception_ptr(
          ApiError(422, "no_embeddable_sessions", e.what(), std::string(embed::to_string(*stream)))));
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
  }
  return future.get();
}

Json Api::aggregate(const Json& body) const {
  const auto ds = snapshot().dataset;
  if (!body.is_object() || !body.contains("session_ids") || !body.at("session_ids").is_array())
    throw ApiError(400, "bad_request", "body must be an object with a session_ids array");
  std::vector<const Session*> members;
  std::set<std::string> seen;
  for (const auto& idj : body.at("session_ids")) {
    if (!idj.is_string()) throw ApiError(400, "bad_request", "session_ids must be strings");
    const auto id = idj.get<std::string>();
    if (!seen.insert(id).second) continue;
    members.push_back(&require_session(*ds, id));
  }
  if (members.empty()) throw ApiError(400, "bad_request", "session_ids must be non-empty");

  const auto group_by_raw = body.value("group_by", std::string("subject"));
  if (group_by_raw != "subject" && group_by_raw != "trial")
    throw ApiError(400, "bad_request", "group_by must be subject or trial", group_by_raw);
  const auto category_raw = body.value("category", std::string("attention"));
  if (!parse_workload_category(category_raw))
    throw ApiError(400, "bad_request", "category must be perception, attention or memory", category_raw);

  const auto group_by = group_by_raw == "subject" ? analytics::GroupBy::subject : analytics::GroupBy::trial;
  Json groups = Json::array();
  for (const auto& g : analytics::aggregate_group(std::span<const Session* const>(members), group_by)) {
    Json contribution = Json::object();
    for (const auto& [cat, corr] : g.error_contribution.categories)
      contribution[std::string(to_string(cat))] = correlations_json(corr);
    groups.push_back({{"key", g.key},
                      {"session_ids", g.session_ids},
                      {"avg_duration_s", finite_or_null(g.avg_duration_s)},
                      {"proportions", proportions_json(g.proportions)},
                      {"error_contribution", std::move(contribution)}});
  }
  return Json{{"group_by", group_by_raw}, {"category", category_raw}, {"groups", std::move(groups)}};
}

Json Api::timeline(const std::string& id, const QueryParams& params) const {
  const auto ds = snapshot().dataset;
  const auto& s = require_session(*ds, id);
  return timeline_json(query::build_timeline(s, category_param(params)));
}

Json Api::matrix(const std::string& id, const QueryParams& params) const {
  const auto ds = snapshot().dataset;
  const auto& s = require_session(*ds, id);
  const auto category = category_param(params);

  Json procedures = Json::array();
  if (s.procedures) {
    for (const auto& p : analytics::procedure_summary(s, category).procedures) {
      Json partial = nullptr;
      if (p.partial_r) {
        partial = Json::object();
        for (const auto& [state, r] : *p.partial_r) partial[std::string(to_string(state))] = finite_or_null(r);
      }
      procedures.push_back({{"label", p.label},
                            {"prevalence", finite_or_null(p.prevalence)},
                            {"error_fraction", finite_or_null(p.error_fraction)},
                            {"partial_r", std::move(partial)}});
    }
  }
  const Session* self = &s;
  const std::span<const Session* const> one(&self, 1);
  const auto props = analytics::state_proportions(one);
  Json distribution = nullptr;
  if (auto it = props.categories.find(category); it != props.categories.end()) {
    distribution = Json::object();
    for (const auto& [state, v] : it->second) distribution[std::string(to_string(state))] = finite_or_null(v);
  }
  Json error_proportion = nullptr;
  if (s.errors) error_proportion = finite_or_null(overlap_seconds(*s.errors, 0.0, s.duration_s) / s.duration_s);

  return Json{{"session_id", s.id},
              {"category", to_string(category)},
              {"duration_s", s.duration_s},
              {"procedures_present", s.procedures.has_value()},
              {"procedures", std::move(procedures)},
              {"error_proportion", std::move(error_proportion)},
              {"state_distribution", std::move(distribution)},
              {"error_contribution", correlations_json(analytics::error_contribution(one, category))}};
}

Json Api::brush(const std::string& id, const QueryParams& params) const {
  const auto ds = snapshot().dataset;
  const auto& s = require_session(*ds, id);
  const auto t0 = number_param(params, "t0");
  const auto t1 = number_param(params, "t1");
  if (!t0 || !t1) throw ApiError(400, "invalid_parameter", "t0 and t1 are required");
  try {
    const auto b = query::brush(s, *t0, *t1, category_param(params));
    Json video = nullptr;
    if (b.video) video = {{"start_s", b.video->start_s}, {"end_s", b.video->end_s}};
    return Json{{"session_id", s.id},
                {"t0", b.t0},
                {"t1", b.t1},
                {"timeline", timeline_json(b.timeline)},
                {"labels_touched", b.labels_touched},
                {"video", std::move(video)}};
  } catch (const query::QueryError& e) {
    throw ApiError(400, e.code(), e.what());
  }
}

Json Api::series(const std::string& id, const QueryParams& params) const {
  const auto ds = snapshot().dataset;
  const auto& s = require_session(*ds, id);
  const auto stream_raw = param(params, "stream");
  if (!stream_raw || (*stream_raw != "imu" && *stream_raw != "gaze"))
    throw bad_parameter("stream", stream_raw.value_or(""), "imu or gaze");
  const auto stream = *stream_raw == "imu" ? SensorKind::imu : SensorKind::gaze;
  const auto channel = param(params, "channel");
  if (!channel) throw ApiError(400, "invalid_parameter", "channel is required");
  const double t0 = number_param(params, "t0").value_or(0.0);
  const double t1 = number_param(params, "t1").value_or(s.duration_s);
  const auto max_points = count_param(params, "max_points").value_or(query::kDefaultMaxPoints);
  try {
    const auto slice = query::slice_series(s, stream, *channel, t0, t1, static_cast<std::size_t>(max_points));
    Json points = Json::array();
    for (const auto& p : slice.points) points.push_back({{"t_s", p.t_s}, {"value", finite_or_null(p.value)}});
    return Json{{"session_id", s.id},   {"stream", to_string(stream)}, {"channel", slice.channel},
                {"t0", slice.t0},       {"t1", slice.t1},              {"decimated", slice.decimated},
                {"points", std::move(points)}};
  } catch (const query::QueryError& e) {
    const int status = e.code() == "stream_absent" ? 404 : 400;
    throw ApiError(status, e.code(), e.what());
  }
}

VideoFile Api::video(const std::string& id) const {
  const auto ds = snapshot().dataset;
  const auto& s = require_session(*ds, id);
  if (!s.video) throw ApiError(404, "video_absent", "session " + id + " has no video reference");
  const fs::path path = s.video->file_path;
  std::error_code ec;
  if (!fs::is_regular_file(path, ec))
    throw ApiError(404, "video_absent", "video file for session " + id + " is missing", path.filename().string());
  return VideoFile{path, content_type_for(path)};
}

}  // namespace sessionlens::service
