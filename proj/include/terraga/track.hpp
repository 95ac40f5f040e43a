#pragma once

#include <filesystem>
#include <vector>

namespace terraga {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
};

struct PathQuery {
  Point2 nearest_point;
  double cross_track = 0.0;  // unsigned distance, m
  double signed_offset = 0.0;  // positive when the query point is left of the tangent
  Point2 tangent;              // unit
  double arc_position = 0.0;   // m, in [0, length)
};

/// Reference sample marching along the track at the desired speed.
struct ReferenceState {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double psi = 0.0;  // tangent heading
};

/// Closed polyline with a desired along-track speed. Immutable after
/// construction.
class Track {
 public:
  /// Throws ConfigError unless there are >= 3 waypoints, no zero-length
  /// segment and a non-negative speed. A duplicated closing waypoint is
  /// dropped.
  Track(std::vector<Point2> waypoints, double desired_speed);

  /// Two straights joined by semicircles, `length` x `width` footprint, the
  /// long axis rotated by `heading` from +x, sampled every `spacing` m.
  static Track stadium(double length, double width, double heading, double spacing,
                       double desired_speed);

  /// Reads "x y" pairs, one per line; '#' starts a comment.
  static Track load(const std::filesystem::path& path, double desired_speed);

  const std::vector<Point2>& waypoints() const { return waypoints_; }
  double desired_speed() const { return desired_speed_; }
  double length() const { return cumulative_.back(); }

  /// Point and unit tangent at an arc position (wrapped into the lap).
  Point2 point_at(double arc) const;
  Point2 tangent_at(double arc) const;

  PathQuery nearest(Point2 pos) const;

  /// Wraps an arc position into [0, length).
  double wrap_arc(double arc) const;

 private:
  std::size_t segment_at(double arc) const;

  std::vector<Point2> waypoints_;
  std::vector<double> cumulative_;  // size n + 1, cumulative_[0] = 0
  double desired_speed_;
};

Point2 lookahead(const Track& track, const Pose2& pose, double lookahead_distance);

/// Signed angle from the body forward axis to the line of sight, (-pi, pi].
double intersection_angle(const Pose2& pose, Point2 target);

std::vector<ReferenceState> reference_states(const Track& track, const Pose2& pose, int n,
                                             double dt);

}  // namespace terraga
