#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spnet/kernel_layout.hpp"
#include "spnet/neighborhood.hpp"

namespace spnet {

// Precomputed geometry of one convolution: for every query, its (query,
// support) pairs in ascending support order, and for every pair the kernel
// points whose influence ball contains the support offset together with the
// correlation weight. Pairs outside every influence ball are dropped, since
// they contribute nothing. Geometry never depends on learned parameters, so
// it is built once per cloud and reused across passes.
struct ConvGeometry {
  std::size_t query_count = 0;
  std::size_t support_count = 0;

  std::vector<std::size_t> query_offsets{0};  // CSR into pairs
  std::vector<std::uint32_t> pair_query;
  std::vector<std::uint32_t> pair_support;

  std::vector<std::size_t> pair_offsets{0};  // CSR into entries
  std::vector<std::uint16_t> entry_kernel;
  std::vector<double> entry_weight;

  // Transposed pair lists per support, ascending pair id.
  std::vector<std::size_t> support_offsets{0};
  std::vector<std::uint32_t> support_pairs;

  std::size_t pair_count() const { return pair_support.size(); }
};

// `neighbors` lists supports per query (e.g. from radius_search).
ConvGeometry build_conv_geometry(const KernelLayout& layout, std::span<const Vec3> queries,
                                 std::span<const Vec3> supports,
                                 const NeighborhoodIndex& neighbors);

// Block-diagonal union of independent geometries (one per scene of a batch).
ConvGeometry concat_geometries(std::span<const ConvGeometry* const> parts);

// Rebuilds the transposed support lists from the pair arrays.
void index_supports(ConvGeometry& geometry);

}  // namespace spnet
