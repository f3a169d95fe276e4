#pragma once

// Angles, pinhole geometry, box projection and overlap measures.
//
// Camera frame follows the KITTI convention: X right, Y down, Z forward.
// Yaw is a rotation about the camera Y axis; a box with yaw 0 has its length
// along +X and a box with yaw `ry` has its length along (cos ry, 0, -sin ry).

#include <array>
#include <numbers>
#include <vector>

namespace egoyaw {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Reduce x to (-pi, pi]. Throws std::invalid_argument for non-finite input.
double wrap_radians(double x);

/// Wrapped absolute difference |wrap(a - b)|, in [0, pi].
double circ_dist(double a, double b);

/// An angle in radians, always kept in (-pi, pi].
class Angle {
 public:
  constexpr Angle() = default;
  explicit Angle(double radians) : value_(wrap_radians(radians)) {}

  static Angle from_degrees(double deg) { return Angle(deg2rad(deg)); }

  double rad() const { return value_; }
  double deg() const { return rad2deg(value_); }

  Angle operator+(Angle o) const { return Angle(value_ + o.value_); }
  Angle operator-(Angle o) const { return Angle(value_ - o.value_); }
  Angle operator-() const { return Angle(-value_); }

  bool operator==(const Angle&) const = default;

 private:
  double value_ = 0.0;
};

inline Angle wrap_angle(double x) { return Angle(x); }

/// wrap(a - b).
inline Angle angle_diff(Angle a, Angle b) { return a - b; }

struct Vec2 {
  double x = 0.0;
  double z = 0.0;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

class CameraIntrinsics {
 public:
  CameraIntrinsics(double fx, double fy, double cx, double cy);

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }

  bool operator==(const CameraIntrinsics&) const = default;

 private:
  double fx_;
  double fy_;
  double cx_;
  double cy_;
};

/// Axis-aligned image rectangle in pixels.
struct Box2D {
  double u_min = 0.0;
  double v_min = 0.0;
  double u_max = 0.0;
  double v_max = 0.0;

  double width() const { return u_max - u_min; }
  double height() const { return v_max - v_min; }
  double area() const { return width() * height(); }
  double center_u() const { return 0.5 * (u_min + u_max); }
  double center_v() const { return 0.5 * (v_min + v_max); }
  bool valid() const { return u_min < u_max && v_min < v_max; }

  bool operator==(const Box2D&) const = default;
};

struct BoxSize {
  double h = 0.0;
  double w = 0.0;
  double l = 0.0;

  bool operator==(const BoxSize&) const = default;
};

/// Upright cuboid; `center` is the geometric center in the camera frame.
struct Box3D {
  Vec3 center;
  BoxSize size;
  Angle yaw;

  bool valid() const { return size.h > 0.0 && size.w > 0.0 && size.l > 0.0; }
};

/// Ego pose in the planar world frame (x lateral, z forward at yaw 0).
struct EgoPose {
  double x = 0.0;
  double z = 0.0;
  Angle yaw;
};

/// Angle of the camera ray through the horizontal center of `box`.
Angle ray_angle(const Box2D& box, const CameraIntrinsics& cam);

/// theta_g = theta_r + theta_l.
inline Angle global_from_local(Angle local, Angle ray) { return ray + local; }
inline Angle local_from_global(Angle global, Angle ray) { return global - ray; }

/// Corner order: bottom face (larger Y) counterclockwise seen from above,
/// starting at (+l/2, +w/2) in the box frame, then the top face in the same
/// order. Box frame axes are (length, width) mapped through the yaw rotation.
std::array<Vec3, 8> box3d_corners(const Box3D& box);

/// Footprint in the X-Z plane, counterclockwise seen from above.
std::array<Vec2, 4> box_footprint(const Box3D& box);

/// Axis-aligned hull of the 8 projected corners. Throws ProjectionError when
/// a corner has Z <= 1e-6 m.
Box2D project_box3d(const Box3D& box, const CameraIntrinsics& cam);

double iou_2d(const Box2D& a, const Box2D& b);

/// Area of a simple polygon (shoelace), positive for counterclockwise order.
double polygon_area(const std::vector<Vec2>& poly);

/// Sutherland-Hodgman clip of `subject` against the convex counterclockwise
/// polygon `clip`.
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip);

/// Footprint intersection area in m^2 (0 when below 1e-12).
double bev_intersection_area(const Box3D& a, const Box3D& b);

double iou_bev(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

}  // namespace egoyaw
