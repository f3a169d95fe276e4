#include "egoyaw/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "egoyaw/errors.hpp"

namespace egoyaw {

namespace {

constexpr double kMinProjectionDepth = 1e-6;
constexpr double kAreaEpsilon = 1e-12;

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.z - o.z) - (a.z - o.z) * (b.x - o.x);
}

Vec2 segment_line_intersection(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
  // Intersection of segment pq with the infinite line ab.
  const double dp = cross(a, b, p);
  const double dq = cross(a, b, q);
  const double t = dp / (dp - dq);
  return {p.x + t * (q.x - p.x), p.z + t * (q.z - p.z)};
}

double vertical_overlap(const Box3D& a, const Box3D& b) {
  const double a_top = a.center.y - 0.5 * a.size.h;
  const double a_bottom = a.center.y + 0.5 * a.size.h;
  const double b_top = b.center.y - 0.5 * b.size.h;
  const double b_bottom = b.center.y + 0.5 * b.size.h;
  return std::max(0.0, std::min(a_bottom, b_bottom) - std::max(a_top, b_top));
}

}  // namespace

double wrap_radians(double x) {
  if (!std::isfinite(x)) {
    throw std::invalid_argument("wrap_radians: non-finite angle");
  }
  double r = std::remainder(x, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  if (r > kPi) r -= kTwoPi;
  return r;
}

double circ_dist(double a, double b) { return std::abs(wrap_radians(a - b)); }

CameraIntrinsics::CameraIntrinsics(double fx, double fy, double cx, double cy)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy) {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
      !std::isfinite(cx) || !std::isfinite(cy)) {
    throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive and finite");
  }
}

Angle ray_angle(const Box2D& box, const CameraIntrinsics& cam) {
  return Angle(std::atan2(box.center_u() - cam.cx(), cam.fx()));
}

std::array<Vec3, 8> box3d_corners(const Box3D& box) {
  const double c = std::cos(box.yaw.rad());
  const double s = std::sin(box.yaw.rad());
  const double hl = 0.5 * box.size.l;
  const double hw = 0.5 * box.size.w;
  const double hh = 0.5 * box.size.h;
  // (length, width) offsets, counterclockwise seen from above.
  constexpr std::array<std::array<double, 2>, 4> kSigns{{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};

  std::array<Vec3, 8> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    const double a = kSigns[i][0] * hl;
    const double b = kSigns[i][1] * hw;
    const double dx = a * c + b * s;
    const double dz = -a * s + b * c;
    out[i] = {box.center.x + dx, box.center.y + hh, box.center.z + dz};
    out[i + 4] = {box.center.x + dx, box.center.y - hh, box.center.z + dz};
  }
  return out;
}

std::array<Vec2, 4> box_footprint(const Box3D& box) {
  const auto corners = box3d_corners(box);
  std::array<Vec2, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) out[i] = {corners[i].x, corners[i].z};
  return out;
}

Box2D project_box3d(const Box3D& box, const CameraIntrinsics& cam) {
  Box2D out{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& p : box3d_corners(box)) {
    if (!(p.z > kMinProjectionDepth)) {
      throw ProjectionError("project_box3d: corner at depth " + std::to_string(p.z) +
                            " m is not in front of the camera");
    }
    const double u = cam.fx() * p.x / p.z + cam.cx();
    const double v = cam.fy() * p.y / p.z + cam.cy();
    out.u_min = std::min(out.u_min, u);
    out.u_max = std::max(out.u_max, u);
    out.v_min = std::min(out.v_min, v);
    out.v_max = std::max(out.v_max, v);
  }
  return out;
}

double iou_2d(const Box2D& a, const Box2D& b) {
  const double iw = std::min(a.u_max, b.u_max) - std::max(a.u_min, b.u_min);
  const double ih = std::min(a.v_max, b.v_max) - std::max(a.v_min, b.v_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    sum += p.x * q.z - q.x * p.z;
  }
  return 0.5 * sum;
}

std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip) {
  std::vector<Vec2> output = subject;
  for (std::size_t e = 0; e < clip.size() && !output.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % clip.size()];
    std::vector<Vec2> input;
    input.swap(output);
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vec2& cur = input[i];
      const Vec2& prev = input[(i + input.size() - 1) % input.size()];
      const bool cur_in = cross(a, b, cur) >= 0.0;
      const bool prev_in = cross(a, b, prev) >= 0.0;
      if (cur_in) {
        if (!prev_in) output.push_back(segment_line_intersection(prev, cur, a, b));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(segment_line_intersection(prev, cur, a, b));
      }
    }
  }
  return output;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const auto fa = box_footprint(a);
  const auto fb = box_footprint(b);
  const std::vector<Vec2> pa(fa.begin(), fa.end());
  const std::vector<Vec2> pb(fb.begin(), fb.end());
  const double area = polygon_area(clip_convex(pa, pb));
  return area < kAreaEpsilon ? 0.0 : area;
}

double iou_bev(const Box3D& a, const Box3D& b) {
  const double inter = bev_intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  const double area_a = a.size.l * a.size.w;
  const double area_b = b.size.l * b.size.w;
  return std::clamp(inter / (area_a + area_b - inter), 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double dy = vertical_overlap(a, b);
  if (dy <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b) * dy;
  if (inter == 0.0) return 0.0;
  const double vol_a = a.size.l * a.size.w * a.size.h;
  const double vol_b = b.size.l * b.size.w * b.size.h;
  return std::clamp(inter / (vol_a + vol_b - inter), 0.0, 1.0);
}

}  // namespace egoyaw
