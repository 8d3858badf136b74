#include "spnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "spnet/errors.hpp"

namespace spnet {
namespace {

constexpr double kPi = 3.14159265358979323846;

struct Primitive {
  PrimitiveClass cls;
  double radius = 0.0;  // bounding sphere
  Vec3 center{};
  Vec3 size{};          // plane: (W, H, 0); sphere: (r, r, r); box: edge lengths
  Vec3 axis_u{}, axis_v{}, axis_n{};
  double yaw = 0.0;
  Vec3 rgb{};
};

Vec3 unit(const Vec3& a) { return (1.0 / norm(a)) * a; }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    const Vec3 d{g(rng), g(rng), g(rng)};
    const double n = norm(d);
    if (n > 1e-9) return (1.0 / n) * d;
  }
}

Vec3 hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double x = h * 6.0;
  const int sector = static_cast<int>(x) % 6;
  const double f = x - std::floor(x);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

void place(std::vector<Primitive>& prims, const Vec3& bounds, std::mt19937_64& rng) {
  std::vector<Primitive> placed;
  for (Primitive& prim : prims) {
    Vec3 best{};
    double best_gap = -1e300;
    for (int attempt = 0; attempt < 200; ++attempt) {
      Vec3 c{};
      for (int a = 0; a < 3; ++a) {
        const double m = std::min(prim.radius, bounds[a] / 2);
        c[a] = std::uniform_real_distribution<double>(m, bounds[a] - m)(rng);
      }
      double gap = 1e300;
      for (const Primitive& other : placed) {
        gap = std::min(gap, distance(c, other.center) - other.radius - prim.radius);
      }
      if (gap > best_gap) {
        best_gap = gap;
        best = c;
      }
      if (gap >= 0.05) break;
    }
    prim.center = best;
    placed.push_back(prim);
  }
}

Vec3 sample_box(const Primitive& b, std::mt19937_64& rng, Vec3& normal) {
  const double ex = b.size[0], ey = b.size[1], ez = b.size[2];
  const double areas[3] = {ey * ez, ex * ez, ex * ey};  // faces orthogonal to x, y, z
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double pick = u(rng) * (areas[0] + areas[1] + areas[2]);
  const int axis = pick < areas[0] ? 0 : (pick < areas[0] + areas[1] ? 1 : 2);
  const double sign = u(rng) < 0.5 ? -1.0 : 1.0;
  Vec3 local{(u(rng) - 0.5) * ex, (u(rng) - 0.5) * ey, (u(rng) - 0.5) * ez};
  local[axis] = sign * 0.5 * b.size[axis];
  Vec3 n{0, 0, 0};
  n[axis] = sign;
  const double cy = std::cos(b.yaw), sy = std::sin(b.yaw);
  auto rot = [&](const Vec3& v) { return Vec3{cy * v[0] - sy * v[1], sy * v[0] + cy * v[1], v[2]}; };
  normal = rot(n);
  return b.center + rot(local);
}

}  // namespace

std::uint64_t scene_seed(std::uint64_t dataset_seed, std::size_t index) {
  // splitmix64 of the pair
  std::uint64_t z = dataset_seed * 0x9E3779B97F4A7C15ULL + index + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void quantize_positions(PointCloud& cloud, double step) {
  if (!(step > 0.0)) throw ParameterError("quantization step must be positive");
  for (Vec3& p : cloud.positions) {
    for (double& c : p) c = std::round(c / step) * step;
  }
}

PointCloud generate_scene(const SyntheticSceneSpec& spec) {
  if (spec.planes + spec.spheres + spec.boxes == 0) {
    throw ParameterError("a synthetic scene needs at least one primitive");
  }
  if (spec.noise < 0.0 || spec.quantum < 0.0 || spec.color_jitter < 0.0) {
    throw ParameterError("noise, jitter and quantum must be non-negative");
  }
  for (double b : spec.bounds) {
    if (!(b > 0.0)) throw ParameterError("scene bounds must be positive");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  std::vector<Primitive> prims;
  auto add = [&](PrimitiveClass cls, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      Primitive p;
      p.cls = cls;
      if (cls == PrimitiveClass::plane) {
        p.size = {uniform(1.2, 1.8), uniform(1.2, 1.8), 0.0};
        p.axis_n = random_direction(rng);
        if (p.axis_n[2] < 0) p.axis_n = -1.0 * p.axis_n;
        const Vec3 helper = std::abs(p.axis_n[2]) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
        p.axis_u = unit(cross(helper, p.axis_n));
        p.axis_v = cross(p.axis_n, p.axis_u);
        p.radius = 0.5 * std::hypot(p.size[0], p.size[1]);
      } else if (cls == PrimitiveClass::sphere) {
        const double r = uniform(0.35, 0.5);
        p.size = {r, r, r};
        p.radius = r;
      } else {
        p.size = {uniform(0.5, 0.8), uniform(0.5, 0.8), uniform(0.5, 0.8)};
        p.yaw = uniform(0.0, 2.0 * kPi);
        p.radius = 0.5 * norm(p.size);
      }
      const double class_hue = static_cast<double>(static_cast<int>(cls)) / 3.0;
      p.rgb = hsv_to_rgb(class_hue + uniform(-spec.hue_spread, spec.hue_spread), uniform(0.35, 0.85),
                         uniform(0.45, 0.95));
      prims.push_back(p);
    }
  };
  add(PrimitiveClass::plane, spec.planes);
  add(PrimitiveClass::sphere, spec.spheres);
  add(PrimitiveClass::box, spec.boxes);
  place(prims, spec.bounds, rng);

  PointCloud cloud;
  const std::size_t total = prims.size() * spec.points_per_primitive;
  cloud.positions.reserve(total);
  cloud.colors.reserve(total);
  cloud.normals.reserve(total);
  cloud.labels.reserve(total);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (const Primitive& prim : prims) {
    for (std::size_t i = 0; i < spec.points_per_primitive; ++i) {
      Vec3 p{}, n{};
      switch (prim.cls) {
        case PrimitiveClass::plane:
          p = prim.center + ((u(rng) - 0.5) * prim.size[0]) * prim.axis_u +
              ((u(rng) - 0.5) * prim.size[1]) * prim.axis_v;
          n = prim.axis_n;
          break;
        case PrimitiveClass::sphere:
          n = random_direction(rng);
          p = prim.center + prim.size[0] * n;
          break;
        case PrimitiveClass::box:
          p = sample_box(prim, rng, n);
          break;
      }
      if (spec.noise > 0.0) {
        for (double& c : p) c += spec.noise * noise(rng);
      }
      Vec3 rgb = prim.rgb;
      for (double& c : rgb) {
        if (spec.color_jitter > 0.0) c += spec.color_jitter * noise(rng);
        c = std::round(std::clamp(c, 0.0, 1.0) * 255.0) / 255.0;
      }
      // Normals go through float32 so that a PLY round trip is lossless.
      for (double& c : n) c = static_cast<double>(static_cast<float>(c));
      cloud.positions.push_back(p);
      cloud.colors.push_back(rgb);
      cloud.normals.push_back(n);
      cloud.labels.push_back(static_cast<std::int32_t>(prim.cls));
    }
  }
  if (spec.quantum > 0.0) quantize_positions(cloud, spec.quantum);
  return cloud;
}

}  // namespace spnet
