#include "spnet/pyramid.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "spnet/errors.hpp"
#include "spnet/neighborhood.hpp"
#include "spnet/sampling.hpp"

namespace spnet {
namespace {

Matrix<double> attributes_of(const PointCloud& cloud) {
  Matrix<double> a(static_cast<Eigen::Index>(cloud.size()), 6);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      a(static_cast<Eigen::Index>(i), c) = cloud.colors[i][c];
      a(static_cast<Eigen::Index>(i), 3 + c) = cloud.normals[i][c];
    }
  }
  return a;
}

LevelPoints next_level(const NetworkSpec& spec, const LevelPoints& prev, std::size_t l) {
  const LevelConfig cfg = spec.level(l);
  LevelPoints out;
  if (spec.sampler == Sampler::pds) {
    out.parent = poisson_disk_sample(prev.positions, cfg.pds_radius, spec.sampler_seed + l);
    out.positions.reserve(out.parent.size());
    out.attributes.resize(static_cast<Eigen::Index>(out.parent.size()), prev.attributes.cols());
    for (std::size_t i = 0; i < out.parent.size(); ++i) {
      out.positions.push_back(prev.positions[out.parent[i]]);
      out.attributes.row(static_cast<Eigen::Index>(i)) =
          prev.attributes.row(static_cast<Eigen::Index>(out.parent[i]));
    }
    return out;
  }
  PointCloud cloud;
  cloud.positions = prev.positions;
  cloud.colors.resize(prev.positions.size());
  cloud.normals.resize(prev.positions.size());
  for (std::size_t i = 0; i < prev.positions.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      cloud.colors[i][c] = prev.attributes(static_cast<Eigen::Index>(i), c);
      cloud.normals[i][c] = prev.attributes(static_cast<Eigen::Index>(i), 3 + c);
    }
  }
  const PointCloud sub = grid_subsample(cloud, cfg.pds_radius);
  out.positions = sub.positions;
  out.attributes = attributes_of(sub);
  return out;
}

}  // namespace

std::vector<KernelLayout> build_level_layouts(const NetworkSpec& spec,
                                              const std::optional<std::filesystem::path>& cache_dir) {
  spec.validate();
  std::vector<KernelLayout> layouts;
  for (std::size_t l = 0; l < spec.levels; ++l) {
    const std::vector<double> radii = spec.shell_radii(l);
    layouts.push_back(build_layout(spec.num_shells, spec.points_per_shell, radii, spec.level(l).v,
                                   spec.layout_seed, cache_dir));
  }
  return layouts;
}

std::vector<std::size_t> canonical_order(const PointCloud& cloud) {
  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool colors = cloud.has_colors();
  const bool normals = cloud.has_normals();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cloud.positions[a] != cloud.positions[b]) return cloud.positions[a] < cloud.positions[b];
    if (colors && cloud.colors[a] != cloud.colors[b]) return cloud.colors[a] < cloud.colors[b];
    if (normals && cloud.normals[a] != cloud.normals[b]) return cloud.normals[a] < cloud.normals[b];
    return a < b;
  });
  return order;
}

Pyramid build_pyramid(const NetworkSpec& spec, std::span<const KernelLayout> layouts,
                      const PointCloud& cloud) {
  std::string missing;
  if (!cloud.has_colors()) missing += "colors";
  if (!cloud.has_normals()) missing += missing.empty() ? "normals" : ", normals";
  if (!missing.empty()) throw InputError("point cloud is missing attributes: " + missing);
  if (cloud.empty()) throw DegenerateInputError("level 0 is empty");
  cloud.validate();
  if (layouts.size() != spec.levels) throw ShapeError("one kernel layout per level expected");

  const bool own_features = cloud.feature_width == spec.input_features && !cloud.features.empty();
  if (!own_features && spec.input_features != 7) {
    throw ShapeError("cloud features do not match the network input width");
  }

  Pyramid p;
  p.order = canonical_order(cloud);
  const PointCloud sorted = cloud.subset(p.order);
  p.scene_sizes = {sorted.size()};
  p.labels = sorted.labels;

  LevelPoints base;
  base.positions = sorted.positions;
  base.attributes = attributes_of(sorted);
  p.input_features.resize(static_cast<Eigen::Index>(sorted.size()),
                          static_cast<Eigen::Index>(spec.input_features));
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (own_features) {
      const auto row = sorted.feature_row(i);
      for (std::size_t c = 0; c < row.size(); ++c) p.input_features(r, static_cast<Eigen::Index>(c)) = row[c];
    } else {
      p.input_features.row(r).head(6) = base.attributes.row(r);
      p.input_features(r, 6) = 1.0;
    }
  }
  p.levels.push_back(std::move(base));

  for (std::size_t l = 1; l < spec.levels; ++l) {
    p.levels.push_back(next_level(spec, p.levels[l - 1], l));
    if (p.levels[l].positions.empty()) {
      throw DegenerateInputError("level " + std::to_string(l) + " is empty");
    }
  }

  for (std::size_t l = 0; l < spec.levels; ++l) {
    const double radius = spec.level(l).query_radius;
    const auto& pts = p.levels[l].positions;
    p.conv.push_back(build_conv_geometry(layouts[l], pts, pts, radius_search(pts, pts, radius)));
    if (l + 1 == spec.levels) break;
    const auto& next = p.levels[l + 1].positions;
    p.strided.push_back(build_conv_geometry(layouts[l], next, pts, radius_search(next, pts, radius)));
    const KnnResult nearest = knn_search(next, pts, 1);
    p.pool.push_back(nearest.indices);
    p.up.push_back(compute_fp_weights(next, pts, spec.fp_k, spec.fp_weighting));
  }
  return p;
}

Pyramid merge_pyramids(std::span<const Pyramid* const> parts) {
  if (parts.empty()) throw InputError("nothing to merge");
  if (parts.size() == 1) return *parts.front();
  Pyramid out;
  const std::size_t levels = parts.front()->levels.size();
  for (const Pyramid* p : parts) {
    if (p->levels.size() != levels) throw ShapeError("pyramids differ in depth");
  }
  out.levels.resize(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    std::size_t rows = 0;
    for (const Pyramid* p : parts) rows += p->levels[l].positions.size();
    LevelPoints& lp = out.levels[l];
    lp.attributes.resize(static_cast<Eigen::Index>(rows), parts.front()->levels[l].attributes.cols());
    std::size_t at = 0, prev_base = 0;
    for (const Pyramid* p : parts) {
      const LevelPoints& src = p->levels[l];
      lp.positions.insert(lp.positions.end(), src.positions.begin(), src.positions.end());
      lp.attributes.middleRows(static_cast<Eigen::Index>(at), src.attributes.rows()) = src.attributes;
      for (std::size_t idx : src.parent) lp.parent.push_back(prev_base + idx);
      at += src.positions.size();
      if (l > 0) prev_base += p->levels[l - 1].positions.size();
    }
  }

  auto gather_geoms = [&](auto member, std::size_t l) {
    std::vector<const ConvGeometry*> g;
    for (const Pyramid* p : parts) g.push_back(&(p->*member)[l]);
    return concat_geometries(g);
  };
  for (std::size_t l = 0; l < levels; ++l) {
    out.conv.push_back(gather_geoms(&Pyramid::conv, l));
    if (l + 1 == levels) break;
    out.strided.push_back(gather_geoms(&Pyramid::strided, l));
    std::vector<std::uint32_t> pool;
    std::vector<const FpWeights*> ups;
    std::uint32_t base = 0;
    for (const Pyramid* p : parts) {
      for (std::uint32_t idx : p->pool[l]) pool.push_back(base + idx);
      base += static_cast<std::uint32_t>(p->levels[l].positions.size());
      ups.push_back(&p->up[l]);
    }
    out.pool.push_back(std::move(pool));
    out.up.push_back(concat_fp_weights(ups));
  }

  std::size_t rows = 0;
  for (const Pyramid* p : parts) rows += p->point_count();
  out.input_features.resize(static_cast<Eigen::Index>(rows), parts.front()->input_features.cols());
  std::size_t at = 0;
  for (const Pyramid* p : parts) {
    out.input_features.middleRows(static_cast<Eigen::Index>(at), p->input_features.rows()) =
        p->input_features;
    out.labels.insert(out.labels.end(), p->labels.begin(), p->labels.end());
    for (std::size_t o : p->order) out.order.push_back(at + o);
    out.scene_sizes.insert(out.scene_sizes.end(), p->scene_sizes.begin(), p->scene_sizes.end());
    at += p->point_count();
  }
  if (out.labels.size() != rows) out.labels.clear();
  return out;
}

}  // namespace spnet
