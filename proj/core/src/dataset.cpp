#include "spnet/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spnet/errors.hpp"
#include "spnet/ply.hpp"

namespace spnet {
namespace {

Dataset load_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw InputError("cannot open manifest " + manifest.string());
  Dataset d;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string file;
    if (!(ss >> file)) continue;
    const std::filesystem::path p = manifest.parent_path() / file;
    d.names.push_back(file);
    d.scenes.push_back(read_ply(p));
  }
  return d;
}

std::string scene_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%03zu.ply", i);
  return buf;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw InputError("dataset path does not exist: " + path.string());
  if (fs::is_directory(path)) {
    if (fs::exists(path / kManifestName)) return load_manifest(path / kManifestName);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".ply") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    Dataset d;
    for (const auto& f : files) {
      d.names.push_back(f.filename().string());
      d.scenes.push_back(read_ply(f));
    }
    return d;
  }
  if (path.extension() == ".ply") {
    Dataset d;
    d.names.push_back(path.filename().string());
    d.scenes.push_back(read_ply(path));
    return d;
  }
  return load_manifest(path);
}

Dataset make_synthetic_dataset(std::size_t count, std::uint64_t seed, const SyntheticSceneSpec& base) {
  Dataset d;
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticSceneSpec spec = base;
    spec.seed = scene_seed(seed, i);
    d.names.push_back(scene_name(i));
    d.scenes.push_back(generate_scene(spec));
  }
  return d;
}

Dataset write_synthetic_dataset(const std::filesystem::path& dir, std::size_t count,
                                std::uint64_t seed, const SyntheticSceneSpec& base) {
  std::filesystem::create_directories(dir);
  Dataset d = make_synthetic_dataset(count, seed, base);
  std::ostringstream manifest;
  manifest << "# file\tseed\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    write_ply(dir / d.names[i], d.scenes[i]);
    manifest << d.names[i] << '\t' << scene_seed(seed, i) << '\n';
  }
  std::ofstream out(dir / kManifestName, std::ios::trunc);
  out << manifest.str();
  if (!out) throw InputError("cannot write manifest in " + dir.string());
  return d;
}

}  // namespace spnet
