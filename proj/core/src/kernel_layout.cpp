#include "spnet/kernel_layout.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "spnet/errors.hpp"

namespace spnet {
namespace {

constexpr char kCacheMagic[4] = {'S', 'P', 'K', 'L'};
constexpr std::uint32_t kCacheVersion = 1;

Vec3 normalized(const Vec3& v) { return (1.0 / norm(v)) * v; }

// Tangential component of the energy gradient at every point.
double tangential_gradient(std::span<const Vec3> pts, std::vector<Vec3>& grad) {
  const std::size_t n = pts.size();
  grad.assign(n, Vec3{0, 0, 0});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec3 d = pts[i] - pts[j];
      const double r = norm(d);
      const Vec3 f = (1.0 / (r * r * r)) * d;
      grad[i] = grad[i] - f;
      grad[j] = grad[j] + f;
    }
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    grad[i] = grad[i] - dot(grad[i], pts[i]) * pts[i];
    sq += squared_norm(grad[i]);
  }
  return std::sqrt(sq);
}

template <class T>
void put(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host expected");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
bool get(std::istream& in, T& value) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&value), sizeof(T)));
}

}  // namespace

void KernelLayout::validate() const {
  if (shells.empty() || shells[0].count != 1 || squared_norm(points.at(0)) != 0.0) {
    throw ParameterError("first shell must hold exactly the central kernel point");
  }
  if (!(influence > 0.0)) throw ParameterError("kernel influence must be positive");
  std::size_t expected_first = 0;
  for (std::size_t s = 0; s < shells.size(); ++s) {
    const KernelShell& shell = shells[s];
    if (shell.first != expected_first) throw ParameterError("kernel shells are not contiguous");
    expected_first += shell.count;
    if (s > 0 && !(shell.radius > shells[s - 1].radius)) {
      throw ParameterError("kernel shell radii must increase strictly");
    }
    for (std::size_t k = shell.first; k < shell.first + shell.count; ++k) {
      if (shell_of.at(k) != s) throw ParameterError("kernel shell membership mismatch");
      if (s > 0 && std::abs(norm(points[k]) - shell.radius) > 1e-9) {
        throw ParameterError("kernel point off its shell sphere");
      }
    }
  }
  if (expected_first != points.size()) throw ParameterError("kernel point count mismatch");
}

std::vector<Vec3> random_sphere_points(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec3> pts;
  pts.reserve(count);
  while (pts.size() < count) {
    Vec3 v{gauss(rng), gauss(rng), gauss(rng)};
    const double len = norm(v);
    if (len > 1e-12) pts.push_back((1.0 / len) * v);
  }
  return pts;
}

double repulsion_energy(std::span<const Vec3> points) {
  double e = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      e += 1.0 / distance(points[i], points[j]);
    }
  }
  return e;
}

std::vector<Vec3> repulsion_sphere_points(std::size_t count, std::uint64_t seed,
                                          const RepulsionOptions& options) {
  std::vector<Vec3> pts = random_sphere_points(count, seed);
  if (count < 2) return pts;

  std::vector<Vec3> grad, trial(count);
  double energy = repulsion_energy(pts);
  double step = options.step;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    if (tangential_gradient(pts, grad) < options.gradient_tolerance) break;
    // Backtrack until the energy does not increase.
    for (int attempt = 0; attempt < 60; ++attempt) {
      for (std::size_t i = 0; i < count; ++i) trial[i] = normalized(pts[i] - step * grad[i]);
      const double e = repulsion_energy(trial);
      if (e <= energy) {
        pts.swap(trial);
        energy = e;
        step *= 1.1;
        break;
      }
      step *= 0.5;
    }
  }
  return pts;
}

double correlation(const Vec3& kernel_point, const Vec3& neighbor_offset, double influence) {
  return std::max(0.0, 1.0 - distance(kernel_point, neighbor_offset) / influence);
}

std::string LayoutCacheKey::file_name() const {
  // FNV-1a over the key fields.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::uint64_t ns = num_shells, pp = points_per_outer_shell;
  mix(&ns, sizeof ns);
  mix(&pp, sizeof pp);
  mix(shell_radii.data(), shell_radii.size() * sizeof(double));
  mix(&influence, sizeof influence);
  mix(&seed, sizeof seed);
  std::ostringstream name;
  name << "layout_" << std::hex << h << ".bin";
  return name.str();
}

void write_layout_cache(const std::filesystem::path& file, const LayoutCacheKey& key,
                        std::span<const Vec3> offsets) {
  const std::filesystem::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write layout cache " + tmp.string());
    out.write(kCacheMagic, 4);
    put(out, kCacheVersion);
    put(out, static_cast<std::uint32_t>(key.num_shells));
    put(out, static_cast<std::uint32_t>(key.points_per_outer_shell));
    put(out, static_cast<std::uint32_t>(offsets.size()));
    put(out, key.seed);
    put(out, key.influence);
    for (double r : key.shell_radii) put(out, r);
    for (const Vec3& p : offsets) {
      for (double v : p) put(out, v);
    }
    if (!out) throw InputError("failed writing layout cache " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

std::optional<std::vector<Vec3>> read_layout_cache(const std::filesystem::path& file,
                                                   const LayoutCacheKey& key) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[4];
  std::uint32_t version = 0, shells = 0, per_shell = 0, total = 0;
  std::uint64_t seed = 0;
  double influence = 0.0;
  if (!in.read(magic, 4) || std::memcmp(magic, kCacheMagic, 4) != 0) return std::nullopt;
  if (!get(in, version) || version != kCacheVersion) return std::nullopt;
  if (!get(in, shells) || !get(in, per_shell) || !get(in, total) || !get(in, seed) ||
      !get(in, influence)) {
    return std::nullopt;
  }
  if (shells != key.num_shells || per_shell != key.points_per_outer_shell || seed != key.seed ||
      influence != key.influence) {
    return std::nullopt;
  }
  for (double r : key.shell_radii) {
    double stored = 0.0;
    if (!get(in, stored) || stored != r) return std::nullopt;
  }
  std::vector<Vec3> offsets(total);
  for (Vec3& p : offsets) {
    for (double& v : p) {
      if (!get(in, v)) return std::nullopt;
    }
  }
  return offsets;
}

std::filesystem::path default_cache_dir() {
  if (const char* env = std::getenv("SPNET_CACHE_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return std::filesystem::temp_directory_path() / "spnet-cache";
}

KernelLayout build_layout(std::size_t num_shells, std::size_t points_per_outer_shell,
                          std::span<const double> shell_radii, double influence,
                          std::uint64_t seed,
                          const std::optional<std::filesystem::path>& cache_dir) {
  if (num_shells < 1) throw ParameterError("a kernel needs at least one shell");
  if (num_shells > 1 && points_per_outer_shell < 1) {
    throw ParameterError("outer shells need at least one kernel point");
  }
  if (shell_radii.size() != num_shells - 1) {
    throw ParameterError("expected " + std::to_string(num_shells - 1) + " outer shell radii");
  }
  if (!(influence > 0.0) || !std::isfinite(influence)) {
    throw ParameterError("kernel influence must be positive");
  }
  double previous = 0.0;
  for (double r : shell_radii) {
    if (!(r > previous) || !std::isfinite(r)) {
      throw ParameterError("shell radii must be positive and strictly increasing");
    }
    previous = r;
  }

  const LayoutCacheKey key{num_shells, points_per_outer_shell,
                           std::vector<double>(shell_radii.begin(), shell_radii.end()),
                           influence, seed};
  std::optional<std::vector<Vec3>> offsets;
  std::filesystem::path cache_file;
  if (cache_dir) {
    cache_file = *cache_dir / key.file_name();
    offsets = read_layout_cache(cache_file, key);
  }
  if (!offsets) {
    std::vector<Vec3> pts{{0.0, 0.0, 0.0}};
    if (num_shells > 1) {
      const std::vector<Vec3> unit = repulsion_sphere_points(points_per_outer_shell, seed);
      for (double r : shell_radii) {
        for (const Vec3& u : unit) pts.push_back(r * u);
      }
    }
    offsets = std::move(pts);
    if (cache_dir) {
      std::filesystem::create_directories(*cache_dir);
      write_layout_cache(cache_file, key, *offsets);
    }
  }

  KernelLayout layout;
  layout.points = std::move(*offsets);
  layout.influence = influence;
  layout.shells.push_back({0.0, 0, 1});
  layout.shell_of.push_back(0);
  for (std::size_t s = 1; s < num_shells; ++s) {
    layout.shells.push_back({shell_radii[s - 1], 1 + (s - 1) * points_per_outer_shell,
                             points_per_outer_shell});
    layout.shell_of.insert(layout.shell_of.end(), points_per_outer_shell,
                           static_cast<std::uint16_t>(s));
  }
  layout.validate();
  return layout;
}

}  // namespace spnet
