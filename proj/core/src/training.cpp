#include "spnet/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "spnet/checkpoint.hpp"
#include "spnet/errors.hpp"

namespace spnet {
namespace {

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InputError("bad boolean '" + std::string(v) + "' for key '" + std::string(key) + "'");
}

template <class N>
N parse_num(std::string_view key, std::string_view value) {
  N out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw InputError("bad value '" + std::string(value) + "' for key '" + std::string(key) + "'");
  }
  return out;
}

std::string shortest(double v) {
  char buf[64];
  return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.8f", v);
  return buf;
}

// Confusion of eval-mode predictions over prepared scenes.
ConfusionMatrix confusion_on_pyramids(Network<float>& network, const std::vector<Pyramid>& pyramids) {
  ConfusionMatrix cm(network.spec().num_classes);
  for (const Pyramid& p : pyramids) {
    const Matrix<float> logits = network.forward(p, NormMode::eval);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      Eigen::Index best = 0;
      logits.row(i).maxCoeff(&best);
      cm.add(static_cast<std::size_t>(p.labels[static_cast<std::size_t>(i)]), static_cast<std::size_t>(best));
    }
  }
  return cm;
}

void check_labels(const Dataset& data, std::size_t classes, const std::string& what) {
  for (std::size_t s = 0; s < data.size(); ++s) {
    const PointCloud& c = data.scenes[s];
    if (!c.has_labels()) throw InputError(what + " scene '" + data.names[s] + "' has no labels");
    for (std::int32_t l : c.labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= classes) {
        throw InputError(what + " scene '" + data.names[s] + "' has label " + std::to_string(l) +
                         " but the network has " + std::to_string(classes) + " classes");
      }
    }
  }
}

PointCloud augmented(const PointCloud& cloud, const TrainConfig& cfg, std::uint64_t seed) {
  PointCloud out = cloud;
  std::mt19937_64 rng(seed);
  if (cfg.augment_rotate) {
    const double angle = std::uniform_real_distribution<double>(0.0, 2.0 * 3.14159265358979323846)(rng);
    const double c = std::cos(angle), s = std::sin(angle);
    auto rot = [&](Vec3& v) { v = {c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]}; };
    for (Vec3& p : out.positions) rot(p);
    for (Vec3& n : out.normals) {
      rot(n);
      n = (1.0 / norm(n)) * n;
    }
  }
  if (cfg.augment_jitter > 0.0) {
    std::normal_distribution<double> g(0.0, cfg.augment_jitter);
    for (Vec3& p : out.positions) {
      for (double& x : p) x += g(rng);
    }
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ParameterError("batch_size must be positive");
  if (!(lr0 > 0.0)) throw ParameterError("lr0 must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ParameterError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ParameterError("adam_eps must be positive");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) {
    throw ParameterError("lr_decay_factor must lie in (0, 1)");
  }
  if (decay_every == 0) throw ParameterError("decay_every must be positive");
  if (epochs == 0) throw ParameterError("epochs must be positive");
  if (augment_jitter < 0.0) throw ParameterError("augment_jitter must be non-negative");
  network.validate();
}

TrainConfig TrainConfig::from_text(std::string_view text) {
  TrainConfig c;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "batch_size") c.batch_size = parse_num<std::size_t>(key, value);
    else if (key == "lr0" || key == "lr") c.lr0 = parse_num<double>(key, value);
    else if (key == "beta1") c.beta1 = parse_num<double>(key, value);
    else if (key == "beta2") c.beta2 = parse_num<double>(key, value);
    else if (key == "adam_eps") c.adam_eps = parse_num<double>(key, value);
    else if (key == "lr_decay_factor") c.lr_decay_factor = parse_num<double>(key, value);
    else if (key == "decay_every") c.decay_every = parse_num<std::size_t>(key, value);
    else if (key == "epochs") c.epochs = parse_num<std::size_t>(key, value);
    else if (key == "seed") c.seed = parse_num<std::uint64_t>(key, value);
    else if (key == "class_weighting") c.class_weighting = parse_bool(key, value);
    else if (key == "augment_rotate") c.augment_rotate = parse_bool(key, value);
    else if (key == "augment_jitter") c.augment_jitter = parse_num<double>(key, value);
    else if (key == "train_data") c.train_data = value;
    else if (key == "test_data") c.test_data = value;
    else if (!c.network.set(key, value)) throw InputError("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  TrainConfig c = from_text(ss.str());
  // Relative data paths are taken relative to the config file.
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) {
      p = (path.parent_path() / p).lexically_normal().string();
    }
  };
  resolve(c.train_data);
  resolve(c.test_data);
  return c;
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "batch_size = " << batch_size << '\n'
     << "lr0 = " << shortest(lr0) << '\n'
     << "beta1 = " << shortest(beta1) << '\n'
     << "beta2 = " << shortest(beta2) << '\n'
     << "adam_eps = " << shortest(adam_eps) << '\n'
     << "lr_decay_factor = " << shortest(lr_decay_factor) << '\n'
     << "decay_every = " << decay_every << '\n'
     << "epochs = " << epochs << '\n'
     << "seed = " << seed << '\n'
     << "class_weighting = " << (class_weighting ? "true" : "false") << '\n'
     << "augment_rotate = " << (augment_rotate ? "true" : "false") << '\n'
     << "augment_jitter = " << shortest(augment_jitter) << '\n';
  if (!train_data.empty()) os << "train_data = " << train_data << '\n';
  if (!test_data.empty()) os << "test_data = " << test_data << '\n';
  os << network.to_text();
  return os.str();
}

double lr_schedule(std::size_t epoch, const TrainConfig& config) {
  return config.lr0 * std::pow(config.lr_decay_factor, static_cast<double>(epoch / config.decay_every));
}

template <class T>
void adam_step(const ParameterList<T>& params, AdamState<T>& state, double lr, double beta1,
               double beta2, double eps) {
  std::vector<Parameter<T>*> trainable;
  for (Parameter<T>* p : params) {
    if (p->trainable) trainable.push_back(p);
  }
  for (Parameter<T>* p : trainable) {
    if (!p->grad.allFinite()) throw NonFiniteError("non-finite gradient in tensor '" + p->name + "'");
  }
  if (state.m.empty()) {
    for (Parameter<T>* p : trainable) {
      state.m.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != trainable.size()) throw ShapeError("Adam state does not match the parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(beta1), b2 = static_cast<T>(beta2);
  const T step = static_cast<T>(lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T e = static_cast<T>(eps);
  for (std::size_t i = 0; i < trainable.size(); ++i) {
    Parameter<T>& p = *trainable[i];
    if (state.m[i].rows() != p.value.rows() || state.m[i].cols() != p.value.cols()) {
      throw ShapeError("Adam state shape mismatch for '" + p.name + "'");
    }
    T* w = p.value.data();
    const T* g = p.grad.data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    for (Eigen::Index j = 0; j < p.value.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      w[j] -= step * m[j] / (std::sqrt(v[j] * inv_c2) + e);
    }
  }
}

template <class T>
LossResult<T> cross_entropy_loss(const Matrix<T>& logits, std::span<const std::int32_t> labels,
                                 std::span<const double> class_weights) {
  const auto n = logits.rows();
  const auto c = logits.cols();
  if (static_cast<std::size_t>(n) != labels.size()) throw ShapeError("one label per logit row expected");
  if (!class_weights.empty() && class_weights.size() != static_cast<std::size_t>(c)) {
    throw ShapeError("one class weight per class expected");
  }
  LossResult<T> r;
  r.grad.resize(n, c);
  if (n == 0) return r;
  double total = 0.0;
  std::vector<double> prob(static_cast<std::size_t>(c));
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::int32_t y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c) throw InputError("label " + std::to_string(y) + " out of range");
    double mx = -INFINITY;
    for (Eigen::Index j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(logits(i, j)));
    double sum = 0.0;
    for (Eigen::Index j = 0; j < c; ++j) {
      prob[j] = std::exp(static_cast<double>(logits(i, j)) - mx);
      sum += prob[j];
    }
    const double lse = mx + std::log(sum);
    const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(y)];
    total += w * (lse - static_cast<double>(logits(i, y)));
    for (Eigen::Index j = 0; j < c; ++j) {
      const double onehot = j == y ? 1.0 : 0.0;
      r.grad(i, j) = static_cast<T>(w * (prob[j] / sum - onehot) / static_cast<double>(n));
    }
  }
  r.loss = total / static_cast<double>(n);
  return r;
}

std::vector<double> inverse_frequency_weights(const Dataset& data, std::size_t classes) {
  std::vector<double> count(classes, 0.0);
  for (const PointCloud& c : data.scenes) {
    for (std::int32_t l : c.labels) {
      if (l >= 0 && static_cast<std::size_t>(l) < classes) count[l] += 1.0;
    }
  }
  std::vector<double> w(classes, 0.0);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    if (count[k] > 0) {
      w[k] = 1.0 / count[k];
      sum += w[k];
      ++present;
    }
  }
  if (present == 0) return std::vector<double>(classes, 1.0);
  for (double& x : w) x *= static_cast<double>(present) / sum;
  return w;
}

std::vector<std::string> synthetic_class_names() { return {"plane", "sphere", "box"}; }

ConfusionMatrix confusion_on(Network<float>& network, const Dataset& data) {
  if (data.empty()) throw UndefinedMetricError("cannot evaluate an empty dataset");
  check_labels(data, network.spec().num_classes, "evaluation");
  std::vector<Pyramid> one(1);
  ConfusionMatrix cm(network.spec().num_classes);
  for (const PointCloud& cloud : data.scenes) {
    one[0] = network.prepare(cloud);
    cm.merge(confusion_on_pyramids(network, one));
  }
  return cm;
}

EvalReport evaluate(Network<float>& network, const Dataset& data) {
  const ConfusionMatrix cm = confusion_on(network, data);
  std::vector<std::string> names;
  if (network.spec().num_classes == kSyntheticClasses) names = synthetic_class_names();
  return make_report(cm, names);
}

std::string metrics_log_header(bool with_test) {
  std::string h = "epoch\tlr\tloss\toa\tmiou";
  if (with_test) h += "\ttest_oa\ttest_miou";
  return h + "\n";
}

std::string metrics_log_row(const EpochMetrics& m) {
  std::string row = std::to_string(m.epoch) + "\t" + shortest(m.lr) + "\t" + fixed(m.loss) + "\t" +
                    fixed(m.train_oa) + "\t" + fixed(m.train_miou);
  if (m.test_oa) row += "\t" + fixed(*m.test_oa) + "\t" + fixed(*m.test_miou);
  return row + "\n";
}

TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset* test_set,
                  const std::filesystem::path& out_dir,
                  const std::function<void(const EpochMetrics&)>& progress,
                  const std::optional<std::filesystem::path>& layout_cache) {
  config.validate();
  if (train_set.empty()) throw InputError("training set is empty");
  const std::size_t classes = config.network.num_classes;
  check_labels(train_set, classes, "training");
  if (test_set != nullptr && test_set->empty()) test_set = nullptr;
  if (test_set != nullptr) check_labels(*test_set, classes, "test");
  std::filesystem::create_directories(out_dir);

  Network<float> net(config.network, config.seed, layout_cache);
  const bool augment = config.augment_rotate || config.augment_jitter > 0.0;

  std::vector<Pyramid> train_pyramids, test_pyramids;
  for (const PointCloud& c : train_set.scenes) train_pyramids.push_back(net.prepare(c));
  if (test_set != nullptr) {
    for (const PointCloud& c : test_set->scenes) test_pyramids.push_back(net.prepare(c));
  }
  std::vector<double> weights;
  if (config.class_weighting) weights = inverse_frequency_weights(train_set, classes);

  TrainResult result;
  result.checkpoint = out_dir / kCheckpointName;
  result.metrics_log = out_dir / kMetricsLogName;
  std::string log = metrics_log_header(test_set != nullptr);

  AdamState<float> adam;
  std::mt19937_64 shuffle_rng(config.seed ^ 0x6a09e667f3bcc909ULL);
  std::vector<std::size_t> perm(train_set.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr_schedule(epoch, config);
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < perm.size(); start += config.batch_size) {
      const std::size_t end = std::min(perm.size(), start + config.batch_size);
      std::vector<Pyramid> fresh;
      std::vector<const Pyramid*> parts;
      if (augment) {
        for (std::size_t i = start; i < end; ++i) {
          const std::uint64_t s = scene_seed(config.seed + epoch * 0x10001ULL, perm[i]);
          fresh.push_back(net.prepare(augmented(train_set.scenes[perm[i]], config, s)));
        }
        for (const Pyramid& p : fresh) parts.push_back(&p);
      } else {
        for (std::size_t i = start; i < end; ++i) parts.push_back(&train_pyramids[perm[i]]);
      }
      const Pyramid batch = merge_pyramids(parts);
      net.zero_grad();
      const Matrix<float> logits = net.forward(batch, NormMode::train);
      const LossResult<float> loss = cross_entropy_loss(logits, batch.labels, weights);
      if (!std::isfinite(loss.loss) || !loss.grad.allFinite()) {
        std::ostringstream ids;
        for (std::size_t i = start; i < end; ++i) ids << train_set.names[perm[i]] << '\n';
        std::ofstream(out_dir / "failed_batch.txt") << ids.str();
        throw NonFiniteError("non-finite loss at epoch " + std::to_string(epoch) + "; batch scenes:\n" +
                             ids.str());
      }
      net.backward(loss.grad);
      adam_step(net.parameters(), adam, m.lr, config.beta1, config.beta2, config.adam_eps);
      loss_sum += loss.loss;
      ++batches;
    }
    m.loss = loss_sum / static_cast<double>(batches);

    const ConfusionMatrix train_cm = confusion_on_pyramids(net, train_pyramids);
    m.train_oa = overall_accuracy(train_cm);
    m.train_miou = mean_iou(train_cm);
    if (test_set != nullptr) {
      const ConfusionMatrix test_cm = confusion_on_pyramids(net, test_pyramids);
      m.test_oa = overall_accuracy(test_cm);
      m.test_miou = mean_iou(test_cm);
    }
    log += metrics_log_row(m);
    save_checkpoint(result.checkpoint, net);
    write_file_atomic(result.metrics_log, log);
    result.epochs.push_back(m);
    if (progress) progress(m);
  }
  return result;
}

template void adam_step(const ParameterList<float>&, AdamState<float>&, double, double, double, double);
template void adam_step(const ParameterList<double>&, AdamState<double>&, double, double, double, double);
template LossResult<float> cross_entropy_loss(const Matrix<float>&, std::span<const std::int32_t>,
                                              std::span<const double>);
template LossResult<double> cross_entropy_loss(const Matrix<double>&, std::span<const std::int32_t>,
                                               std::span<const double>);

}  // namespace spnet
