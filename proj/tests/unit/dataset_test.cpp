#include <gtest/gtest.h>

#include <fstream>

#include "spnet/dataset.hpp"
#include "spnet/errors.hpp"
#include "spnet/ply.hpp"
#include "test_support.hpp"

namespace spnet {
namespace {

SyntheticSceneSpec small() {
  SyntheticSceneSpec s;
  s.points_per_primitive = 60;
  return s;
}

TEST(Dataset, WrittenDatasetLoadsBack) {
  test::TempDir d("data");
  const Dataset written = write_synthetic_dataset(d.path(), 3, 5, small());
  const Dataset loaded = load_dataset(d.path());
  ASSERT_EQ(loaded.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(loaded.scenes[i].labels, written.scenes[i].labels);
    EXPECT_EQ(loaded.scenes[i].size(), written.scenes[i].size());
  }
  EXPECT_EQ(load_dataset(d.path() / "manifest.txt").size(), 3u);
  EXPECT_EQ(load_dataset(d.path() / "scene_001.ply").size(), 1u);
}

TEST(Dataset, DirectoryWithoutManifestUsesSortedPly) {
  test::TempDir d("data");
  const Dataset data = make_synthetic_dataset(2, 1, small());
  write_ply(d.path() / "b.ply", data.scenes[0]);
  write_ply(d.path() / "a.ply", data.scenes[1]);
  const Dataset loaded = load_dataset(d.path());
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded.scenes[0].labels, data.scenes[1].labels);
}

TEST(Dataset, InMemoryMatchesWritten) {
  test::TempDir d("data");
  const Dataset a = make_synthetic_dataset(2, 9, small());
  const Dataset b = write_synthetic_dataset(d.path(), 2, 9, small());
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(a.scenes[i].positions, b.scenes[i].positions);
}

TEST(Dataset, MissingPathIsAnInputError) {
  EXPECT_THROW(load_dataset("/nonexistent/spnet/data"), InputError);
}

}  // namespace
}  // namespace spnet
