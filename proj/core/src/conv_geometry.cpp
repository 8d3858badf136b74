#include "spnet/conv_geometry.hpp"

#include <limits>

#include "spnet/errors.hpp"

namespace spnet {

ConvGeometry build_conv_geometry(const KernelLayout& layout, std::span<const Vec3> queries,
                                 std::span<const Vec3> supports,
                                 const NeighborhoodIndex& neighbors) {
  if (neighbors.query_count() != queries.size()) {
    throw ShapeError("neighbourhood index does not match the query set");
  }
  if (layout.total_kernel_count() > std::numeric_limits<std::uint16_t>::max()) {
    throw ParameterError("too many kernel points");
  }
  ConvGeometry g;
  g.query_count = queries.size();
  g.support_count = supports.size();
  g.query_offsets.reserve(queries.size() + 1);

  const double v = layout.influence;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::uint32_t s : neighbors.neighbors(q)) {
      const Vec3 offset = supports[s] - queries[q];
      const std::size_t before = g.entry_kernel.size();
      for (std::size_t k = 0; k < layout.total_kernel_count(); ++k) {
        const double w = correlation(layout.points[k], offset, v);
        if (w > 0.0) {
          g.entry_kernel.push_back(static_cast<std::uint16_t>(k));
          g.entry_weight.push_back(w);
        }
      }
      if (g.entry_kernel.size() != before) {
        g.pair_query.push_back(static_cast<std::uint32_t>(q));
        g.pair_support.push_back(s);
        g.pair_offsets.push_back(g.entry_kernel.size());
      }
    }
    g.query_offsets.push_back(g.pair_support.size());
  }
  index_supports(g);
  return g;
}

void index_supports(ConvGeometry& g) {
  g.support_offsets.assign(g.support_count + 1, 0);
  for (std::uint32_t s : g.pair_support) ++g.support_offsets[s + 1];
  for (std::size_t s = 0; s < g.support_count; ++s) g.support_offsets[s + 1] += g.support_offsets[s];
  g.support_pairs.resize(g.pair_support.size());
  std::vector<std::size_t> cursor(g.support_offsets.begin(), g.support_offsets.end() - 1);
  for (std::size_t p = 0; p < g.pair_support.size(); ++p) {
    g.support_pairs[cursor[g.pair_support[p]]++] = static_cast<std::uint32_t>(p);
  }
}

ConvGeometry concat_geometries(std::span<const ConvGeometry* const> parts) {
  ConvGeometry out;
  for (const ConvGeometry* part : parts) {
    const auto query_base = static_cast<std::uint32_t>(out.query_count);
    const auto support_base = static_cast<std::uint32_t>(out.support_count);
    const std::size_t pair_base = out.pair_support.size();
    const std::size_t entry_base = out.entry_kernel.size();
    for (std::size_t q = 1; q < part->query_offsets.size(); ++q) {
      out.query_offsets.push_back(pair_base + part->query_offsets[q]);
    }
    for (std::size_t p = 0; p < part->pair_support.size(); ++p) {
      out.pair_query.push_back(query_base + part->pair_query[p]);
      out.pair_support.push_back(support_base + part->pair_support[p]);
      out.pair_offsets.push_back(entry_base + part->pair_offsets[p + 1]);
    }
    out.entry_kernel.insert(out.entry_kernel.end(), part->entry_kernel.begin(),
                            part->entry_kernel.end());
    out.entry_weight.insert(out.entry_weight.end(), part->entry_weight.begin(),
                            part->entry_weight.end());
    out.query_count += part->query_count;
    out.support_count += part->support_count;
  }
  index_supports(out);
  return out;
}

}  // namespace spnet
