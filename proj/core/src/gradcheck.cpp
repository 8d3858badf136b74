#include "spnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "spnet/errors.hpp"
#include "spnet/layers.hpp"
#include "spnet/network.hpp"
#include "spnet/sampling.hpp"
#include "spnet/training.hpp"

namespace spnet {

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradcheckEntry& e) { return e.passed; });
}

std::string GradcheckReport::to_text() const {
  std::size_t width = 6;
  for (const auto& e : entries) width = std::max(width, e.name.size());
  std::ostringstream os;
  char line[512];
  std::snprintf(line, sizeof line, "gradcheck %s (tolerance %.0e)\n", target.c_str(), tolerance);
  os << line;
  std::snprintf(line, sizeof line, "%-*s  %8s  %12s  %12s  %9s  %s\n", static_cast<int>(width), "tensor",
                "size", "max_rel_err", "max_abs_err", "kink", "status");
  os << line;
  for (const auto& e : entries) {
    std::snprintf(line, sizeof line, "%-*s  %8zu  %12.3e  %12.3e  %4zu/%-4zu  %s\n", static_cast<int>(width),
                  e.name.c_str(), e.size, e.max_relative_error, e.max_abs_error, e.one_sided, e.skipped,
                  e.passed ? "ok" : "FAIL");
    os << line;
  }
  os << (passed() ? "PASS" : "FAIL") << '\n';
  return os.str();
}

GradcheckReport gradcheck(GradcheckProblem& problem, const GradcheckOptions& options) {
  GradcheckReport report;
  report.tolerance = options.tolerance;
  ParameterList<double> tensors;
  for (Parameter<double>* t : problem.tensors()) {
    if (t->trainable) tensors.push_back(t);
  }
  problem.gradients();
  std::vector<Matrix<double>> analytic;
  if (options.tamper) options.tamper(tensors);
  double scale = 1.0;
  for (const Parameter<double>* t : tensors) {
    analytic.push_back(t->grad);
    if (t->grad.size() > 0) scale = std::max(scale, t->grad.cwiseAbs().maxCoeff());
  }
  const double floor = options.floor * scale;

  // Loss plus the rectifier sign pattern it was evaluated under.
  detail::KinkProbe& probe = detail::kink_probe();
  auto evaluate = [&](std::uint64_t& pattern) {
    probe.enabled = true;
    probe.reset();
    const double l = problem.loss();
    pattern = probe.hash;
    probe.enabled = false;
    return l;
  };
  std::uint64_t base_pattern = 0;
  const double base = evaluate(base_pattern);

  std::mt19937_64 pick(options.entry_seed);
  const double h = options.step;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    Parameter<double>& t = *tensors[ti];
    GradcheckEntry e;
    e.name = t.name;
    e.size = t.size();
    std::vector<Eigen::Index> entries(static_cast<std::size_t>(t.value.size()));
    std::iota(entries.begin(), entries.end(), Eigen::Index{0});
    if (options.max_entries > 0 && entries.size() > options.max_entries) {
      std::shuffle(entries.begin(), entries.end(), pick);
      entries.resize(options.max_entries);
      std::sort(entries.begin(), entries.end());
    }
    for (Eigen::Index i : entries) {
      double& x = t.value.data()[i];
      const double saved = x;
      auto at = [&](double offset, std::uint64_t& pattern) {
        x = saved + offset;
        const double l = evaluate(pattern);
        x = saved;
        return l;
      };
      std::uint64_t p_up = 0, p_down = 0, p_far = 0;
      const double up = at(h, p_up);
      const double down = at(-h, p_down);
      double numeric = 0.0;
      if (p_up == base_pattern && p_down == base_pattern) {
        numeric = (up - down) / (2.0 * h);
      } else {
        // A kink lies within the step: use a one-sided second-order
        // difference on a side that stays in x's activation region.
        bool found = false;
        for (const double dir : {1.0, -1.0}) {
          if ((dir > 0 ? p_up : p_down) != base_pattern) continue;
          const double far = at(2.0 * dir * h, p_far);
          if (p_far != base_pattern) continue;
          numeric = dir * (-3.0 * base + 4.0 * (dir > 0 ? up : down) - far) / (2.0 * h);
          found = true;
          break;
        }
        if (!found) {
          ++e.skipped;
          continue;
        }
        ++e.one_sided;
      }
      const double a = analytic[ti].data()[i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), floor});
      e.max_abs_error = std::max(e.max_abs_error, abs_err);
      e.max_relative_error = std::max(e.max_relative_error, rel);
      e.max_abs_gradient = std::max(e.max_abs_gradient, std::abs(a));
    }
    e.passed = e.max_relative_error <= options.tolerance;
    report.entries.push_back(e);
  }
  return report;
}

namespace {

Matrix<double> gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

std::vector<Vec3> cube_points(std::size_t n, double side, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, side);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

// RGB in [0, 1] and a unit normal per row.
Matrix<double> random_attributes(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix<double> a(static_cast<Eigen::Index>(n), 6);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Eigen::Vector3d nrm(g(rng), g(rng), g(rng));
    nrm.normalize();
    a.row(i) << u(rng), u(rng), u(rng), nrm(0), nrm(1), nrm(2);
  }
  return a;
}

// Zero biases put every zero attribute difference (a point paired with
// itself) exactly on a ReLU kink, where finite differences are meaningless.
void randomize_biases(AttentionMlp<double>& mlp, std::mt19937_64& rng) {
  for (auto& b : mlp.biases) b.value = gaussian_matrix(1, b.value.cols(), rng, 0.1);
}

KernelLayout test_layout(double v) {
  const double radii[] = {1.5 * v, 3.0 * v};
  return build_layout(3, 14, radii, v, 42);
}

double weighted_sum(const Matrix<double>& out, const Matrix<double>& r) { return out.cwiseProduct(r).sum(); }

class SPConvProblem : public GradcheckProblem {
 public:
  SPConvProblem(std::uint64_t seed, AttentionVariant variant, std::size_t points) : rng_(seed) {
    const double v = 0.04;
    layout_ = test_layout(v);
    positions_ = cube_points(points, 3.0 * v, rng_);
    geometry_ = build_conv_geometry(layout_, positions_, positions_, radius_search(positions_, positions_, 4.0 * v));
    attributes_ = random_attributes(points, rng_);
    AttentionConfig a;
    a.variant = variant;
    a.sigma = v;
    if (variant == AttentionVariant::gaussian) a.sigma = 0.6;  // keeps omega away from 0 on colour noise
    conv_ = SPConv<double>("spconv", layout_, 4, 8, a, {}, rng_);
    if (conv_.mlp) randomize_biases(*conv_.mlp, rng_);
    input_ = Parameter<double>("input", static_cast<Eigen::Index>(points), 4);
    input_.value = gaussian_matrix(input_.value.rows(), 4, rng_);
    r_ = gaussian_matrix(static_cast<Eigen::Index>(points), 8, rng_);
  }
  ParameterList<double> tensors() override {
    ParameterList<double> t;
    conv_.collect(t);
    t.push_back(&input_);
    return t;
  }
  double loss() override { return weighted_sum(forward(), r_); }
  void gradients() override {
    for (Parameter<double>* p : tensors()) p->zero_grad();
    forward();
    input_.grad = conv_.backward(r_);
  }

 private:
  Matrix<double> forward() {
    return conv_.forward(input_.value, geometry_, {&attributes_, &attributes_}, NormMode::identity);
  }
  std::mt19937_64 rng_;
  KernelLayout layout_;
  std::vector<Vec3> positions_;
  ConvGeometry geometry_;
  Matrix<double> attributes_;
  SPConv<double> conv_;
  Parameter<double> input_;
  Matrix<double> r_;
};

class AttentionProblem : public GradcheckProblem {
 public:
  explicit AttentionProblem(std::uint64_t seed) : rng_(seed), mlp_("attention", 6, 8, 2, rng_) {
    randomize_biases(mlp_, rng_);
    diffs_ = Parameter<double>("diffs", 40, 6);
    diffs_.value = gaussian_matrix(40, 6, rng_, 0.5);
    r_ = gaussian_matrix(40, 1, rng_);
  }
  ParameterList<double> tensors() override {
    ParameterList<double> t;
    mlp_.collect(t);
    return t;
  }
  double loss() override {
    typename AttentionMlp<double>::Cache cache;
    return weighted_sum(mlp_.forward(diffs_.value, cache), r_);
  }
  void gradients() override {
    for (Parameter<double>* p : tensors()) p->zero_grad();
    typename AttentionMlp<double>::Cache cache;
    mlp_.forward(diffs_.value, cache);
    mlp_.backward(diffs_.value, cache, r_);
  }

 private:
  std::mt19937_64 rng_;
  AttentionMlp<double> mlp_;
  Parameter<double> diffs_;
  Matrix<double> r_;
};

class BlockProblem : public GradcheckProblem {
 public:
  BlockProblem(std::uint64_t seed, bool strided) : rng_(seed), strided_(strided) {
    const double v = 0.04;
    const std::size_t points = 64;
    layout_ = test_layout(v);
    supports_ = cube_points(points, 4.0 * v, rng_);
    if (strided) {
      const auto idx = poisson_disk_sample(supports_, 0.75 * 2 * v, seed);
      for (std::size_t i : idx) queries_.push_back(supports_[i]);
      pool_ = knn_search(queries_, supports_, 1).indices;
    } else {
      queries_ = supports_;
    }
    geometry_ = build_conv_geometry(layout_, queries_, supports_, radius_search(queries_, supports_, 4.0 * v));
    support_attr_ = random_attributes(points, rng_);
    query_attr_.resize(static_cast<Eigen::Index>(queries_.size()), 6);
    for (std::size_t i = 0; i < queries_.size(); ++i) {
      query_attr_.row(static_cast<Eigen::Index>(i)) = strided ? support_attr_.row(pool_[i]) : support_attr_.row(static_cast<Eigen::Index>(i));
    }
    AttentionConfig a;
    a.variant = AttentionVariant::mlp3;
    a.sigma = v;
    NetworkSpec spec;
    block_ = ResidualBlock<double>("block", layout_, 4, 8, spec.mid_channels(8), a, {}, rng_);
    randomize_biases(*block_.conv.mlp, rng_);
    input_ = Parameter<double>("input", static_cast<Eigen::Index>(points), 4);
    input_.value = gaussian_matrix(input_.value.rows(), 4, rng_);
    r_ = gaussian_matrix(static_cast<Eigen::Index>(queries_.size()), 8, rng_);
  }
  ParameterList<double> tensors() override {
    ParameterList<double> t;
    block_.collect(t);
    t.push_back(&input_);
    return t;
  }
  double loss() override { return weighted_sum(forward(), r_); }
  void gradients() override {
    for (Parameter<double>* p : tensors()) p->zero_grad();
    forward();
    input_.grad = block_.backward(r_);
  }

 private:
  Matrix<double> forward() {
    return block_.forward(input_.value, geometry_, {&query_attr_, &support_attr_},
                          strided_ ? &pool_ : nullptr, NormMode::identity);
  }
  std::mt19937_64 rng_;
  bool strided_;
  KernelLayout layout_;
  std::vector<Vec3> supports_, queries_;
  std::vector<std::uint32_t> pool_;
  ConvGeometry geometry_;
  Matrix<double> support_attr_, query_attr_;
  ResidualBlock<double> block_;
  Parameter<double> input_;
  Matrix<double> r_;
};

class BatchNormProblem : public GradcheckProblem {
 public:
  explicit BatchNormProblem(std::uint64_t seed) : rng_(seed), bn_("bn", 5, 0.1, 1e-5) {
    bn_.gamma.value = gaussian_matrix(1, 5, rng_);
    bn_.beta.value = gaussian_matrix(1, 5, rng_);
    input_ = Parameter<double>("input", 20, 5);
    input_.value = gaussian_matrix(20, 5, rng_);
    r_ = gaussian_matrix(20, 5, rng_);
  }
  ParameterList<double> tensors() override {
    ParameterList<double> t;
    bn_.collect(t);
    t.push_back(&input_);
    return t;
  }
  double loss() override { return weighted_sum(bn_.forward(input_.value, NormMode::train), r_); }
  void gradients() override {
    for (Parameter<double>* p : tensors()) p->zero_grad();
    bn_.forward(input_.value, NormMode::train);
    input_.grad = bn_.backward(r_);
  }

 private:
  std::mt19937_64 rng_;
  BatchNorm<double> bn_;
  Parameter<double> input_;
  Matrix<double> r_;
};

class LossProblem : public GradcheckProblem {
 public:
  explicit LossProblem(std::uint64_t seed) : rng_(seed) {
    logits_ = Parameter<double>("logits", 30, 4);
    logits_.value = gaussian_matrix(30, 4, rng_, 2.0);
    std::uniform_int_distribution<std::int32_t> d(0, 3);
    for (int i = 0; i < 30; ++i) labels_.push_back(d(rng_));
    weights_ = {0.5, 1.0, 1.5, 2.0};
  }
  ParameterList<double> tensors() override { return {&logits_}; }
  double loss() override { return cross_entropy_loss(logits_.value, labels_, weights_).loss; }
  void gradients() override { logits_.grad = cross_entropy_loss(logits_.value, labels_, weights_).grad; }

 private:
  std::mt19937_64 rng_;
  Parameter<double> logits_;
  std::vector<std::int32_t> labels_;
  std::vector<double> weights_;
};

class ModelProblem : public GradcheckProblem {
 public:
  explicit ModelProblem(std::uint64_t seed) : rng_(seed), net_(spec(), seed) {
    PointCloud cloud;
    const std::size_t n = 64;
    cloud.positions = cube_points(n, 0.5, rng_);
    const Matrix<double> attr = random_attributes(n, rng_);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      cloud.colors.push_back({attr(r, 0), attr(r, 1), attr(r, 2)});
      cloud.normals.push_back({attr(r, 3), attr(r, 4), attr(r, 5)});
    }
    pyramid_ = net_.prepare(cloud);
    input_ = Parameter<double>("input", pyramid_.input_features.rows(), pyramid_.input_features.cols());
    input_.value = pyramid_.input_features;
    for (Parameter<double>* p : net_.parameters()) {
      // Non-zero BN shifts and head bias so that every tensor is exercised.
      if (p->trainable && p->value.rows() == 1) p->value = gaussian_matrix(1, p->value.cols(), rng_, 0.1);
    }
    r_ = gaussian_matrix(input_.value.rows(), static_cast<Eigen::Index>(net_.spec().num_classes), rng_);
  }
  static NetworkSpec spec() {
    NetworkSpec s;
    s.base_channels = 2;
    s.encoder_blocks = 1;
    s.num_classes = 3;
    return s;
  }
  ParameterList<double> tensors() override {
    ParameterList<double> t = net_.parameters();
    t.push_back(&input_);
    return t;
  }
  double loss() override { return weighted_sum(forward(), r_); }
  void gradients() override {
    for (Parameter<double>* p : tensors()) p->zero_grad();
    forward();
    input_.grad = net_.backward(r_);
  }

 private:
  Matrix<double> forward() {
    pyramid_.input_features = input_.value;
    return net_.forward(pyramid_, NormMode::identity);
  }
  std::mt19937_64 rng_;
  Network<double> net_;
  Pyramid pyramid_;
  Parameter<double> input_;
  Matrix<double> r_;
};

}  // namespace

std::vector<std::string> gradcheck_targets() {
  return {"spconv", "gaussian", "attention", "block", "strided", "batchnorm", "loss", "model"};
}

std::unique_ptr<GradcheckProblem> make_gradcheck_problem(std::string_view target, std::uint64_t seed) {
  if (target == "spconv") return std::make_unique<SPConvProblem>(seed, AttentionVariant::mlp3, 32);
  if (target == "gaussian") return std::make_unique<SPConvProblem>(seed, AttentionVariant::gaussian, 32);
  if (target == "attention") return std::make_unique<AttentionProblem>(seed);
  if (target == "block") return std::make_unique<BlockProblem>(seed, false);
  if (target == "strided") return std::make_unique<BlockProblem>(seed, true);
  if (target == "batchnorm") return std::make_unique<BatchNormProblem>(seed);
  if (target == "loss") return std::make_unique<LossProblem>(seed);
  if (target == "model") return std::make_unique<ModelProblem>(seed);
  throw ParameterError("unknown gradcheck target '" + std::string(target) + "'");
}

}  // namespace spnet
