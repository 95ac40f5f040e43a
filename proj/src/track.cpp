#include "terraga/track.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "terraga/angles.hpp"
#include "terraga/errors.hpp"

namespace terraga {

namespace {

constexpr double kTieTolerance = 1e-12;

}  // namespace

Track::Track(std::vector<Point2> waypoints, double desired_speed)
    : waypoints_(std::move(waypoints)), desired_speed_(desired_speed) {
  if (waypoints_.size() > 1 && waypoints_.front() == waypoints_.back()) waypoints_.pop_back();
  if (waypoints_.size() < 3) throw ConfigError("track needs at least 3 waypoints");
  if (!(desired_speed_ >= 0.0) || !std::isfinite(desired_speed_)) {
    throw ConfigError("track desired speed must be finite and >= 0");
  }
  cumulative_.reserve(waypoints_.size() + 1);
  cumulative_.push_back(0.0);
  for (std::size_t i = 0; i < waypoints_.size(); ++i) {
    const Point2 a = waypoints_[i];
    const Point2 b = waypoints_[(i + 1) % waypoints_.size()];
    if (!std::isfinite(a.x) || !std::isfinite(a.y)) throw ConfigError("track waypoint is not finite");
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (!(len > 0.0)) {
      throw ConfigError("track has a zero-length segment at waypoint " + std::to_string(i));
    }
    cumulative_.push_back(cumulative_.back() + len);
  }
}

Track Track::stadium(double length, double width, double heading, double spacing,
                     double desired_speed) {
  const double radius = 0.5 * width;
  const double straight = length - width;
  if (!(radius > 0.0) || straight < 0.0 || !(spacing > 0.0)) {
    throw ConfigError("stadium needs length >= width > 0 and spacing > 0");
  }
  std::vector<Point2> local;
  // Each helper emits its start point but not its end point.
  const auto add_straight = [&](Point2 from, Point2 to) {
    const double len = std::hypot(to.x - from.x, to.y - from.y);
    if (len <= 0.0) return;
    const int n = std::max(1, static_cast<int>(std::ceil(len / spacing - 1e-9)));
    for (int i = 0; i < n; ++i) {
      const double u = static_cast<double>(i) / n;
      local.push_back({from.x + u * (to.x - from.x), from.y + u * (to.y - from.y)});
    }
  };
  const auto add_arc = [&](Point2 center, double start_angle) {
    const int n = std::max(2, static_cast<int>(std::ceil(kPi * radius / spacing - 1e-9)));
    for (int i = 0; i < n; ++i) {
      const double a = start_angle + kPi * static_cast<double>(i) / n;
      local.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
    }
  };
  // Counter-clockwise, the lap starts at the middle of the lower straight.
  const double h = 0.5 * straight;
  add_straight({0.0, -radius}, {h, -radius});
  add_arc({h, 0.0}, -0.5 * kPi);
  add_straight({h, radius}, {-h, radius});
  add_arc({-h, 0.0}, 0.5 * kPi);
  add_straight({-h, -radius}, {0.0, -radius});

  const double c = std::cos(heading), s = std::sin(heading);
  std::vector<Point2> pts;
  pts.reserve(local.size());
  for (Point2 p : local) pts.push_back({c * p.x - s * p.y, s * p.x + c * p.y});
  return Track(std::move(pts), desired_speed);
}

Track Track::load(const std::filesystem::path& path, double desired_speed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read track file: " + path.string());
  std::vector<Point2> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    Point2 p;
    if (!(ss >> p.x)) continue;
    std::string rest;
    if (!(ss >> p.y) || (ss >> rest)) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'x y'");
    }
    pts.push_back(p);
  }
  return Track(std::move(pts), desired_speed);
}

double Track::wrap_arc(double arc) const {
  const double len = length();
  double w = std::fmod(arc, len);
  if (w < 0.0) w += len;
  if (w >= len) w = 0.0;
  return w;
}

std::size_t Track::segment_at(double arc) const {
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), arc);
  const auto idx = static_cast<std::size_t>(it - cumulative_.begin());
  return std::min(idx == 0 ? 0 : idx - 1, waypoints_.size() - 1);
}

Point2 Track::point_at(double arc) const {
  const double a = wrap_arc(arc);
  const std::size_t i = segment_at(a);
  const Point2 p = waypoints_[i];
  const Point2 q = waypoints_[(i + 1) % waypoints_.size()];
  const double u = (a - cumulative_[i]) / (cumulative_[i + 1] - cumulative_[i]);
  return {p.x + u * (q.x - p.x), p.y + u * (q.y - p.y)};
}

Point2 Track::tangent_at(double arc) const {
  const std::size_t i = segment_at(wrap_arc(arc));
  const Point2 p = waypoints_[i];
  const Point2 q = waypoints_[(i + 1) % waypoints_.size()];
  const double len = cumulative_[i + 1] - cumulative_[i];
  return {(q.x - p.x) / len, (q.y - p.y) / len};
}

PathQuery Track::nearest(Point2 pos) const {
  PathQuery best;
  double best_d2 = std::numeric_limits<double>::infinity();
  const std::size_t n = waypoints_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p = waypoints_[i];
    const Point2 q = waypoints_[(i + 1) % n];
    const double len = cumulative_[i + 1] - cumulative_[i];
    const double tx = (q.x - p.x) / len, ty = (q.y - p.y) / len;
    const double along = std::clamp((pos.x - p.x) * tx + (pos.y - p.y) * ty, 0.0, len);
    const Point2 foot{p.x + along * tx, p.y + along * ty};
    const double dx = pos.x - foot.x, dy = pos.y - foot.y;
    const double d2 = dx * dx + dy * dy;
    // Segments are visited in arc order, so a strict improvement keeps the
    // lowest arc position on ties.
    if (d2 < best_d2 - kTieTolerance) {
      best_d2 = d2;
      best.nearest_point = foot;
      best.tangent = {tx, ty};
      best.arc_position = wrap_arc(cumulative_[i] + along);
      best.cross_track = std::sqrt(d2);
      best.signed_offset = tx * dy - ty * dx;
    }
  }
  return best;
}

Point2 lookahead(const Track& track, const Pose2& pose, double lookahead_distance) {
  const PathQuery q = track.nearest({pose.x, pose.y});
  return track.point_at(q.arc_position + lookahead_distance);
}

double intersection_angle(const Pose2& pose, Point2 target) {
  return wrap_angle(std::atan2(target.y - pose.y, target.x - pose.x) - pose.psi);
}

std::vector<ReferenceState> reference_states(const Track& track, const Pose2& pose, int n,
                                             double dt) {
  const PathQuery q = track.nearest({pose.x, pose.y});
  const double speed = track.desired_speed();
  std::vector<ReferenceState> refs;
  refs.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int j = 1; j <= n; ++j) {
    const double arc = q.arc_position + speed * dt * j;
    const Point2 p = track.point_at(arc);
    const Point2 t = track.tangent_at(arc);
    refs.push_back({p.x, p.y, speed * t.x, speed * t.y, std::atan2(t.y, t.x)});
  }
  return refs;
}

}  // namespace terraga
