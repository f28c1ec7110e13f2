#include "sessionlens/embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include <Eigen/Dense>

#include "sessionlens/rng.hpp"

namespace sessionlens::embed {

std::string_view to_string(StreamKind k) {
  switch (k) {
    case StreamKind::imu: return "imu";
    case StreamKind::gaze: return "gaze";
    case StreamKind::fnirs: return "fnirs";
  }
  return "unknown";
}

std::optional<StreamKind> parse_stream_kind(std::string_view s) {
  for (auto k : {StreamKind::imu, StreamKind::gaze, StreamKind::fnirs})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

namespace {

double sample_time(std::span<const double> times, std::size_t j, std::size_t length) {
  if (j + 1 == length) return times.back();
  const double frac = static_cast<double>(j) / static_cast<double>(length - 1);
  return times.front() + (times.back() - times.front()) * frac;
}

void check_resample_args(std::span<const double> times, std::span<const double> values,
                         std::size_t length) {
  if (times.size() != values.size()) throw EmbedError("times and values differ in length");
  if (times.size() < 2) throw EmbedError("resampling needs at least two samples");
  if (length < 2) throw EmbedError("resampled length must be at least 2");
}

}  // namespace

std::vector<double> resample_linear(std::span<const double> times, std::span<const double> values,
                                    std::size_t length) {
  check_resample_args(times, values, length);
  std::vector<double> out(length);
  std::size_t k = 0;
  for (std::size_t j = 0; j < length; ++j) {
    const double t = sample_time(times, j, length);
    while (k + 2 < times.size() && times[k + 1] < t) ++k;
    const double span = times[k + 1] - times[k];
    const double w = std::clamp((t - times[k]) / span, 0.0, 1.0);
    out[j] = w == 0.0 ? values[k] : w == 1.0 ? values[k + 1] : values[k] + (values[k + 1] - values[k]) * w;
  }
  return out;
}

std::vector<double> resample_nearest(std::span<const double> times,
                                     std::span<const double> values, std::size_t length) {
  check_resample_args(times, values, length);
  std::vector<double> out(length);
  std::size_t k = 0;
  for (std::size_t j = 0; j < length; ++j) {
    const double t = sample_time(times, j, length);
    while (k + 2 < times.size() && times[k + 1] < t) ++k;
    out[j] = (t - times[k] <= times[k + 1] - t) ? values[k] : values[k + 1];
  }
  return out;
}

void z_normalize(std::vector<double>& values) {
  if (values.empty()) return;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  if (sd < 1e-12) {
    std::fill(values.begin(), values.end(), 0.0);
    return;
  }
  for (double& v : values) v = (v - mean) / sd;
}

namespace {

double norm3(std::span<const double> r, std::size_t first) {
  return std::sqrt(r[first] * r[first] + r[first + 1] * r[first + 1] + r[first + 2] * r[first + 2]);
}

std::optional<FeatureChannelSet> imu_channels(const Session& session, std::size_t length) {
  const auto* imu = session.sensor(SensorKind::imu);
  if (!imu || imu->size() < 2) return std::nullopt;
  FeatureChannelSet set{session.id, StreamKind::imu, length, {}};
  const char* names[] = {"accel_mag", "gyro_mag", "mag_mag"};
  for (std::size_t g = 0; g < 3; ++g) {
    std::vector<double> mags(imu->size());
    for (std::size_t i = 0; i < imu->size(); ++i) mags[i] = norm3(imu->row(i), 3 * g);
    auto resampled = resample_linear(imu->times, mags, length);
    z_normalize(resampled);
    set.channels.push_back(Channel{names[g], std::move(resampled)});
  }
  return set;
}

}  // namespace

std::vector<double> gaze_angular_speed(const SensorSeries& gaze) {
  std::vector<double> out(gaze.size(), 0.0);
  for (std::size_t i = 1; i < gaze.size(); ++i) {
    auto a = gaze.row(i - 1).subspan(3, 3);
    auto b = gaze.row(i).subspan(3, 3);
    const double cx = a[1] * b[2] - a[2] * b[1];
    const double cy = a[2] * b[0] - a[0] * b[2];
    const double cz = a[0] * b[1] - a[1] * b[0];
    const double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
    const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    out[i] = (cross == 0.0 && dot >= 0.0) ? 0.0 : std::atan2(cross, dot);
  }
  return out;
}

std::vector<double> gaze_origin_speed(const SensorSeries& gaze) {
  std::vector<double> out(gaze.size(), 0.0);
  for (std::size_t i = 1; i < gaze.size(); ++i) {
    auto a = gaze.row(i - 1);
    auto b = gaze.row(i);
    const double dx = b[0] - a[0], dy = b[1] - a[1], dz = b[2] - a[2];
    out[i] = std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return out;
}

std::optional<FeatureChannelSet> build_channels(const Session& session, StreamKind kind,
                                                std::size_t length) {
  if (length < 2) throw EmbedError("series length must be at least 2");
  switch (kind) {
    case StreamKind::imu:
      return imu_channels(session, length);
    case StreamKind::gaze: {
      const auto* gaze = session.sensor(SensorKind::gaze);
      if (!gaze || gaze->size() < 2) return std::nullopt;
      FeatureChannelSet set{session.id, kind, length, {}};
      auto angular = resample_linear(gaze->times, gaze_angular_speed(*gaze), length);
      auto origin = resample_linear(gaze->times, gaze_origin_speed(*gaze), length);
      z_normalize(angular);
      z_normalize(origin);
      set.channels.push_back(Channel{"gaze_angular_speed", std::move(angular)});
      set.channels.push_back(Channel{"gaze_origin_speed", std::move(origin)});
      return set;
    }
    case StreamKind::fnirs: {
      FeatureChannelSet set{session.id, kind, length, {}};
      for (auto cat : kAllCategories) {
        const auto* series = session.workload_for(cat);
        if (!series || series->samples.size() < 2) return std::nullopt;
        std::vector<double> times, codes;
        times.reserve(series->samples.size());
        codes.reserve(series->samples.size());
        for (const auto& s : series->samples) {
          times.push_back(s.t_s);
          codes.push_back(static_cast<double>(static_cast<int>(s.state) - 1));
        }
        // ordinal codes keep their scale: no normalization
        set.channels.push_back(
            Channel{std::string(to_string(cat)), resample_nearest(times, codes, length)});
      }
      return set;
    }
  }
  return std::nullopt;
}

double shapelet_distance(std::span<const double> shapelet, std::span<const double> channel) {
  const std::size_t m = shapelet.size();
  const std::size_t len = channel.size();
  if (m == 0) throw EmbedError("shapelet is empty");
  if (m > len) throw EmbedError("shapelet is longer than the channel");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t w = 0; w + m <= len; ++w) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m && sum < best; ++i) {
      const double d = shapelet[i] - channel[w + i];
      sum += d * d;
    }
    if (sum < best) best = sum;
  }
  return std::sqrt(best / static_cast<double>(m));
}

std::vector<Shapelet> fit_shapelets(std::span<const FeatureChannelSet> channel_sets,
                                    std::size_t count, std::size_t length, std::uint64_t seed) {
  if (count == 0) throw EmbedError("shapelet count must be positive");
  if (length < 2) throw EmbedError("shapelet length must be at least 2");
  if (channel_sets.empty()) throw EmbedError("no channel sets to sample shapelets from");

  std::vector<const FeatureChannelSet*> ordered;
  for (const auto& set : channel_sets) {
    if (length >= set.length)
      throw EmbedError("shapelet length must be shorter than the series length");
    ordered.push_back(&set);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->session_id < b->session_id; });

  // Candidate windows enumerated as (set, channel, offset) in canonical order.
  struct Block {
    const FeatureChannelSet* set;
    std::size_t channel;
    std::uint64_t first;
    std::uint64_t windows;
  };
  std::vector<Block> blocks;
  std::uint64_t total = 0;
  for (const auto* set : ordered) {
    for (std::size_t c = 0; c < set->channels.size(); ++c) {
      const auto windows = static_cast<std::uint64_t>(set->channels[c].values.size() - length + 1);
      blocks.push_back(Block{set, c, total, windows});
      total += windows;
    }
  }
  if (total == 0) throw EmbedError("channel sets contain no channels");

  auto make = [&](std::uint64_t index) {
    auto it = std::upper_bound(blocks.begin(), blocks.end(), index,
                               [](std::uint64_t i, const Block& b) { return i < b.first; });
    const Block& b = *std::prev(it);
    const auto offset = static_cast<std::size_t>(index - b.first);
    const auto& values = b.set->channels[b.channel].values;
    return Shapelet{std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(offset),
                                        values.begin() + static_cast<std::ptrdiff_t>(offset + length)),
                    ShapeletSource{b.set->session_id, b.channel, offset}};
  };

  std::vector<Shapelet> out;
  if (count >= total) {
    for (std::uint64_t i = 0; i < total; ++i) out.push_back(make(i));
    return out;
  }
  Rng rng(seed);
  std::unordered_set<std::uint64_t> taken;
  while (out.size() < count) {
    const auto index = rng.below(total);
    if (taken.insert(index).second) out.push_back(make(index));
  }
  return out;
}

std::vector<double> shapelet_transform(const FeatureChannelSet& channel_set,
                                       std::span<const Shapelet> shapelets) {
  const std::size_t channels = channel_set.channels.size();
  std::vector<double> features(shapelets.size() * channels);
  for (std::size_t k = 0; k < shapelets.size(); ++k)
    for (std::size_t c = 0; c < channels; ++c)
      features[k * channels + c] =
          shapelet_distance(shapelets[k].values, channel_set.channels[c].values);
  return features;
}

Projection project_2d(const std::vector<std::vector<double>>& features) {
  Projection out;
  const auto n = features.size();
  if (n == 0) return out;
  const auto dims = features.front().size();
  for (const auto& f : features)
    if (f.size() != dims) throw EmbedError("feature vectors differ in arity");
  out.coords.assign(n, {0.0, 0.0});
  if (dims == 0) return out;

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dims; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = features[i][j];
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;

  // Right singular vectors of the centered data are the covariance eigenvectors, ordered
  // by decreasing eigenvalue.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const auto& sigma = svd.singularValues();
  const double scale = std::max(1.0, sigma.size() > 0 ? sigma(0) : 0.0);
  for (Eigen::Index a = 0; a < std::min<Eigen::Index>(2, sigma.size()); ++a) {
    if (!(sigma(a) > 1e-10 * scale)) break;
    Eigen::VectorXd axis = svd.matrixV().col(a);
    Eigen::Index lead = 0;
    for (Eigen::Index j = 1; j < axis.size(); ++j)
      if (std::abs(axis(j)) > std::abs(axis(lead))) lead = j;
    if (axis(lead) < 0.0) axis = -axis;
    const Eigen::VectorXd proj = x * axis;
    auto& store = a == 0 ? out.axis_x : out.axis_y;
    store.assign(axis.data(), axis.data() + axis.size());
    for (std::size_t i = 0; i < n; ++i)
      (a == 0 ? out.coords[i].first : out.coords[i].second) = proj(static_cast<Eigen::Index>(i));
  }
  return out;
}

Embedding2D embed_sessions(std::span<const Session> sessions, StreamKind kind,
                           const EmbedParams& params) {
  if (params.series_length < 2) throw EmbedError("series length must be at least 2");
  if (params.shapelet_length < 2 || params.shapelet_length >= params.series_length)
    throw EmbedError("shapelet length must be in [2, series length)");
  if (params.shapelet_count == 0) throw EmbedError("shapelet count must be positive");

  std::vector<const Session*> ordered;
  for (const auto& s : sessions) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Session* a, const Session* b) { return a->id < b->id; });

  Embedding2D result;
  result.stream_kind = kind;
  result.seed = params.seed;
  std::vector<FeatureChannelSet> sets;
  for (const auto* s : ordered) {
    if (auto set = build_channels(*s, kind, params.series_length))
      sets.push_back(std::move(*set));
    else
      result.omitted.push_back(s->id);
  }
  if (sets.empty())
    throw EmbedError("no session carries the " + std::string(to_string(kind)) + " stream");

  const auto shapelets =
      fit_shapelets(sets, params.shapelet_count, params.shapelet_length, params.seed);
  std::vector<std::vector<double>> features;
  features.reserve(sets.size());
  for (const auto& set : sets) features.push_back(shapelet_transform(set, shapelets));
  const auto projection = project_2d(features);
  for (std::size_t i = 0; i < sets.size(); ++i)
    result.points.push_back(
        EmbeddedPoint{sets[i].session_id, projection.coords[i].first, projection.coords[i].second});
  return result;
}

}  // namespace sessionlens::embed
