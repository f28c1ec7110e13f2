#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sessionlens/model.hpp"

namespace sessionlens::embed {

enum class StreamKind { imu, gaze, fnirs };

std::string_view to_string(StreamKind k);
std::optional<StreamKind> parse_stream_kind(std::string_view s);

class EmbedError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Channel {
  std::string name;
  std::vector<double> values;
};

// Every channel has exactly `length` finite values.
struct FeatureChannelSet {
  SessionId session_id;
  StreamKind stream_kind = StreamKind::imu;
  std::size_t length = 0;
  std::vector<Channel> channels;
};

struct ShapeletSource {
  SessionId session_id;
  std::size_t channel = 0;
  std::size_t offset = 0;

  bool operator==(const ShapeletSource&) const = default;
};

struct Shapelet {
  std::vector<double> values;
  ShapeletSource source;

  bool operator==(const Shapelet&) const = default;
};

struct EmbeddedPoint {
  SessionId session_id;
  double x = 0.0;
  double y = 0.0;

  bool operator==(const EmbeddedPoint&) const = default;
};

struct Embedding2D {
  StreamKind stream_kind = StreamKind::imu;
  std::uint64_t seed = 0;
  std::vector<EmbeddedPoint> points;  // ordered by session id
  std::vector<SessionId> omitted;     // sessions lacking the stream

  bool operator==(const Embedding2D&) const = default;
};

struct EmbedParams {
  std::size_t shapelet_count = 64;   // K
  std::size_t shapelet_length = 32;  // m
  std::size_t series_length = 256;   // L
  std::uint64_t seed = 0;
};

// Values at `length` times uniformly spanning [times.front(), times.back()], linearly
// interpolated. Throws EmbedError for fewer than two samples.
std::vector<double> resample_linear(std::span<const double> times, std::span<const double> values,
                                    std::size_t length);

// Nearest sample at each of `length` uniform times; ties go to the earlier sample.
std::vector<double> resample_nearest(std::span<const double> times,
                                     std::span<const double> values, std::size_t length);

// Zero mean, unit population deviation; channels with deviation < 1e-12 become zeros.
void z_normalize(std::vector<double>& values);

// Per-sample derived gaze signals; the first sample is 0.
std::vector<double> gaze_angular_speed(const SensorSeries& gaze);  // radians per sample
std::vector<double> gaze_origin_speed(const SensorSeries& gaze);   // displacement per sample

// nullopt when the session cannot supply the stream.
std::optional<FeatureChannelSet> build_channels(const Session& session, StreamKind kind,
                                                std::size_t length);

// Minimum over windows of the root-mean-square difference.
double shapelet_distance(std::span<const double> shapelet, std::span<const double> channel);

// Samples `count` distinct windows uniformly from the pooled channels, pooling in
// session-id order. Fewer are returned only when fewer candidate windows exist.
std::vector<Shapelet> fit_shapelets(std::span<const FeatureChannelSet> channel_sets,
                                    std::size_t count, std::size_t length, std::uint64_t seed);

// Feature (k, c) at index k * channel_count + c.
std::vector<double> shapelet_transform(const FeatureChannelSet& channel_set,
                                       std::span<const Shapelet> shapelets);

struct Projection {
  // One (x, y) per input row.
  std::vector<std::pair<double, double>> coords;
  // Unit principal axes; an axis is empty when the data has no variance along it.
  std::vector<double> axis_x;
  std::vector<double> axis_y;
};

// PCA onto the top two principal axes, each signed so its largest-magnitude loading is
// positive. Missing axes yield zero coordinates.
Projection project_2d(const std::vector<std::vector<double>>& features);

Embedding2D embed_sessions(std::span<const Session> sessions, StreamKind kind,
                           const EmbedParams& params);

}  // namespace sessionlens::embed
