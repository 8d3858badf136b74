#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spnet/dataset.hpp"
#include "spnet/metrics.hpp"
#include "spnet/network.hpp"

namespace spnet {

struct TrainConfig {
  std::size_t batch_size = 8;
  double lr0 = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lr_decay_factor = 0.3;
  std::size_t decay_every = 50;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  bool class_weighting = false;   // inverse-frequency cross-entropy weights
  bool augment_rotate = true;     // random rotation about z per scene and epoch
  double augment_jitter = 0.0;    // Gaussian position jitter (m), 0 disables
  std::string train_data;         // dataset path (see load_dataset)
  std::string test_data;          // optional
  NetworkSpec network;            // attention_variant and sampler live here

  void validate() const;
  // `key = value` text; network keys are accepted too. Throws InputError for
  // unknown keys or malformed values.
  static TrainConfig from_text(std::string_view text);
  static TrainConfig from_file(const std::filesystem::path& path);
  std::string to_text() const;
};

// lr0 * factor^floor(epoch / decay_every)
double lr_schedule(std::size_t epoch, const TrainConfig& config);

template <class T>
struct AdamState {
  std::vector<Matrix<T>> m, v;
  std::size_t step = 0;
};

// One bias-corrected Adam update of every trainable parameter. Throws
// NonFiniteError naming the first tensor with a non-finite gradient, before
// touching any parameter.
template <class T>
void adam_step(const ParameterList<T>& params, AdamState<T>& state, double lr, double beta1,
               double beta2, double eps = 1e-8);

template <class T>
struct LossResult {
  double loss = 0.0;
  Matrix<T> grad;  // dL/dlogits
};

// Mean softmax cross-entropy. `class_weights` (empty = all ones) scales each
// point's term; the mean divides by the point count. Throws InputError for a
// label outside [0, classes).
template <class T>
LossResult<T> cross_entropy_loss(const Matrix<T>& logits, std::span<const std::int32_t> labels,
                                 std::span<const double> class_weights = {});

// Inverse-frequency weights normalised to mean 1 over present classes.
std::vector<double> inverse_frequency_weights(const Dataset& data, std::size_t classes);

std::vector<std::string> synthetic_class_names();

// Eval-mode predictions scene by scene. Throws InputError when a label does
// not fit the network's class count and UndefinedMetricError for an empty
// dataset.
ConfusionMatrix confusion_on(Network<float>& network, const Dataset& data);
EvalReport evaluate(Network<float>& network, const Dataset& data);

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double train_oa = 0.0, train_miou = 0.0;
  std::optional<double> test_oa, test_miou;
};

struct TrainResult {
  std::vector<EpochMetrics> epochs;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics_log;
};

inline constexpr const char* kCheckpointName = "model.ckpt";
inline constexpr const char* kMetricsLogName = "metrics.tsv";

// Trains from config.seed, writing `model.ckpt` after every epoch and the
// tab-separated `metrics.tsv` log to `out_dir`. A non-finite loss aborts with
// NonFiniteError after writing the batch's scene ids to `failed_batch.txt`.
// `progress` (optional) sees every finished epoch.
TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset* test_set,
                  const std::filesystem::path& out_dir,
                  const std::function<void(const EpochMetrics&)>& progress = {},
                  const std::optional<std::filesystem::path>& layout_cache = std::nullopt);

std::string metrics_log_header(bool with_test);
std::string metrics_log_row(const EpochMetrics& m);

}  // namespace spnet
