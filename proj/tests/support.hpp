#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "sessionlens/model.hpp"
#include "sessionlens/rng.hpp"

namespace testing {

namespace fs = std::filesystem;

// Directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("sessionlens-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct StateSpan {
  double start_s;
  double end_s;
  sessionlens::MentalState state;
};

// 10 Hz samples over [0, duration) following the given piecewise states.
inline sessionlens::WorkloadSeries workload_from_spans(sessionlens::WorkloadCategory cat,
                                                       const std::vector<StateSpan>& spans,
                                                       double duration_s) {
  sessionlens::WorkloadSeries w;
  w.category = cat;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * 10.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / 10.0;
    for (const auto& s : spans) {
      if (t >= s.start_s && t < s.end_s) {
        w.samples.push_back({t, s.state, 0.8});
        break;
      }
    }
  }
  return w;
}

inline sessionlens::Session bare_session(const std::string& id, double duration_s,
                                         const std::string& subject = "s", const std::string& trial = "t") {
  sessionlens::Session s;
  s.id = id;
  s.subject = subject;
  s.trial = trial;
  s.duration_s = duration_s;
  return s;
}

// Random session with tiled procedures, errors and a random workload chain.
inline sessionlens::Session random_session(sessionlens::Rng& rng, const std::string& id,
                                          const std::string& subject, const std::string& trial) {
  const double duration = std::round(rng.uniform(60, 120) * 10) / 10;
  auto s = bare_session(id, duration, subject, trial);
  s.procedures = sessionlens::IntervalTrack{sessionlens::TrackKind::procedure, {}};
  s.errors = sessionlens::IntervalTrack{sessionlens::TrackKind::error, {}};
  const char* labels[] = {"a", "b", "c", "d"};
  double t = 0;
  while (true) {
    const double a = t + rng.uniform(0, 2), b = a + rng.uniform(2, 10);
    if (b > duration) break;
    s.procedures->intervals.push_back({a, b, labels[rng.below(4)]});
    t = b;
  }
  t = 0;
  while (true) {
    const double a = t + rng.uniform(1, 15), b = a + rng.uniform(0.2, 4);
    if (b > duration) break;
    s.errors->intervals.push_back({a, b, "error"});
    t = b;
  }
  std::vector<StateSpan> spans;
  t = 0;
  while (t < duration) {
    const double e = std::min(duration, t + rng.uniform(1, 12));
    spans.push_back({t, e, static_cast<sessionlens::MentalState>(rng.below(3))});
    t = e;
  }
  for (auto cat : sessionlens::kAllCategories) s.workload[cat] = workload_from_spans(cat, spans, duration);
  return s;
}

}  // namespace testing
