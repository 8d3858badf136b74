#pragma once

#include <filesystem>
#include <string>

#include "spnet/network.hpp"

namespace spnet {

// Binary checkpoint: magic "SPNETCKP", u32 version, u64 length + NetworkSpec
// text, u64 tensor count, then per tensor u32 name length, name, u64 rows,
// u64 cols and rows * cols float32 values. Little-endian, tensors in
// declaration order (batch-norm running statistics included). Written to a
// temporary file and renamed into place.
template <class T>
void save_checkpoint(const std::filesystem::path& path, Network<T>& network);

// Throws InputError for a malformed file or a tensor that does not fit the
// network described by the embedded spec.
Network<float> load_checkpoint(const std::filesystem::path& path);

// Replaces the network's tensors with the checkpoint's (the specs must agree).
template <class T>
void load_parameters(const std::filesystem::path& path, Network<T>& network);

NetworkSpec read_checkpoint_spec(const std::filesystem::path& path);

// Writes `content` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace spnet
