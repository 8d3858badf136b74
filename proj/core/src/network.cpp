#include "spnet/network.hpp"

#include "spnet/errors.hpp"

namespace spnet {

template <class T>
ResidualBlock<T>::ResidualBlock(const std::string& name, const KernelLayout& layout,
                                std::size_t in, std::size_t out, std::size_t mid,
                                const AttentionConfig& attention, const SPConvOptions& options,
                                std::mt19937_64& rng)
    : down(name + ".down", in, mid, rng),
      down_bn(name + ".down_bn", mid, options.bn_momentum, options.bn_eps),
      conv(name + ".conv", layout, mid, mid, attention, options, rng),
      up(name + ".up", mid, out, rng),
      up_bn(name + ".up_bn", out, options.bn_momentum, options.bn_eps),
      slope_(static_cast<T>(options.leaky_slope)) {
  if (in != out) {
    proj.emplace(name + ".proj", in, out, rng);
    proj_bn.emplace(name + ".proj_bn", out, options.bn_momentum, options.bn_eps);
  }
}

template <class T>
Matrix<T> ResidualBlock<T>::forward(const Matrix<T>& x, const ConvGeometry& geometry,
                                    const AttentionInputs<T>& attributes,
                                    const std::vector<std::uint32_t>* pool, NormMode mode) {
  pool_ = pool;
  support_rows_ = static_cast<std::size_t>(x.rows());
  mid_ = down_bn.forward(down.forward(x), mode);
  leaky_relu_inplace(mid_, slope_);
  Matrix<T> y = up_bn.forward(up.forward(conv.forward(mid_, geometry, attributes, mode)), mode);

  Matrix<T> shortcut;
  if (pool != nullptr) {
    if (pool->size() != geometry.query_count) throw ShapeError("pool indices do not match the queries");
    shortcut.resize(static_cast<Eigen::Index>(pool->size()), x.cols());
    for (std::size_t i = 0; i < pool->size(); ++i) {
      shortcut.row(static_cast<Eigen::Index>(i)) = x.row((*pool)[i]);
    }
  }
  const Matrix<T>& skip_in = pool != nullptr ? shortcut : x;
  if (proj) {
    y += proj_bn->forward(proj->forward(skip_in), mode);
  } else {
    y += skip_in;
  }
  leaky_relu_inplace(y, slope_);
  output_ = y;
  return y;
}

template <class T>
Matrix<T> ResidualBlock<T>::backward(const Matrix<T>& grad_out) {
  const Matrix<T> d = leaky_relu_backward(output_, grad_out, slope_);
  Matrix<T> dmid = conv.backward(up.backward(up_bn.backward(d)));
  dmid = leaky_relu_backward(mid_, dmid, slope_);
  Matrix<T> dx = down.backward(down_bn.backward(dmid));

  Matrix<T> dskip = proj ? proj->backward(proj_bn->backward(d)) : d;
  if (pool_ != nullptr) {
    for (std::size_t i = 0; i < pool_->size(); ++i) {
      dx.row((*pool_)[i]) += dskip.row(static_cast<Eigen::Index>(i));
    }
  } else {
    dx += dskip;
  }
  return dx;
}

template <class T>
void ResidualBlock<T>::collect(ParameterList<T>& out) {
  down.collect(out);
  down_bn.collect(out);
  conv.collect(out);
  up.collect(out);
  up_bn.collect(out);
  if (proj) {
    proj->collect(out);
    proj_bn->collect(out);
  }
}

template <class T>
Network<T>::Network(const NetworkSpec& spec, std::uint64_t seed,
                    const std::optional<std::filesystem::path>& layout_cache)
    : spec_(spec) {
  spec_.validate();
  if (spec_.levels > 1 && spec_.decoder_blocks == 0) {
    throw ParameterError("decoder_blocks must be positive when there is more than one level");
  }
  layouts_ = build_level_layouts(spec_, layout_cache);
  std::mt19937_64 rng(seed);

  SPConvOptions options;
  options.leaky_slope = spec_.leaky_slope;
  options.bn_momentum = spec_.bn_momentum;
  auto attention = [&](std::size_t l) {
    AttentionConfig a;
    a.variant = spec_.attention;
    a.sigma = spec_.level(l).v;
    a.hidden_width = spec_.attention_hidden;
    return a;
  };

  const std::size_t c0 = spec_.level(0).channels;
  stem = SPConv<T>("stem", layouts_[0], spec_.input_features, c0, attention(0), options, rng);

  encoder.resize(spec_.levels);
  for (std::size_t l = 0; l < spec_.levels; ++l) {
    const std::size_t out = spec_.level(l).channels;
    for (std::size_t b = 0; b < spec_.encoder_blocks; ++b) {
      const std::size_t in = (l > 0 && b == 0) ? spec_.level(l - 1).channels : out;
      // Strided blocks convolve on the finer level's layout.
      const std::size_t layout_level = (l > 0 && b == 0) ? l - 1 : l;
      encoder[l].emplace_back("enc" + std::to_string(l) + "." + std::to_string(b),
                              layouts_[layout_level], in, out, spec_.mid_channels(out),
                              attention(layout_level), options, rng);
    }
  }

  for (std::size_t step = 0; step + 1 < spec_.levels; ++step) {
    const std::size_t fine = spec_.levels - 2 - step;
    const std::size_t out = spec_.level(fine).channels;
    decoder.emplace_back();
    for (std::size_t b = 0; b < spec_.decoder_blocks; ++b) {
      const std::size_t in = b == 0 ? spec_.level(fine + 1).channels + out : out;
      decoder.back().emplace_back("dec" + std::to_string(fine) + "." + std::to_string(b),
                                  layouts_[fine], in, out, spec_.mid_channels(out),
                                  attention(fine), options, rng);
    }
  }

  head1 = Linear<T>("head.fc1", c0, c0, rng);
  head_bn = BatchNorm<T>("head.bn", c0, spec_.bn_momentum, 1e-5);
  head2 = Linear<T>("head.fc2", c0, spec_.num_classes, rng);
  head_bias = Parameter<T>("head.bias", 1, static_cast<Eigen::Index>(spec_.num_classes));
}

template <class T>
std::vector<Matrix<T>> Network<T>::encode(const Pyramid& pyramid, NormMode mode) {
  if (pyramid.levels.size() != spec_.levels) throw ShapeError("pyramid depth does not match the network");
  if (static_cast<std::size_t>(pyramid.input_features.cols()) != spec_.input_features) {
    throw ShapeError("pyramid input width does not match the network");
  }
  pyramid_ = &pyramid;
  attributes_.clear();
  for (const LevelPoints& lp : pyramid.levels) attributes_.push_back(lp.attributes.template cast<T>());
  skips_.clear();

  Matrix<T> x = stem.forward(pyramid.input_features.template cast<T>(), pyramid.conv[0],
                             {&attributes_[0], &attributes_[0]}, mode);
  for (std::size_t l = 0; l < spec_.levels; ++l) {
    for (std::size_t b = 0; b < encoder[l].size(); ++b) {
      if (l > 0 && b == 0) {
        x = encoder[l][b].forward(x, pyramid.strided[l - 1], {&attributes_[l], &attributes_[l - 1]},
                                  &pyramid.pool[l - 1], mode);
      } else {
        x = encoder[l][b].forward(x, pyramid.conv[l], {&attributes_[l], &attributes_[l]}, nullptr,
                                  mode);
      }
    }
    skips_.push_back(x);
  }
  return skips_;
}

template <class T>
Matrix<T> Network<T>::forward(const Pyramid& pyramid, NormMode mode) {
  encode(pyramid, mode);
  Matrix<T> x = skips_.back();
  for (std::size_t step = 0; step < decoder.size(); ++step) {
    const std::size_t fine = spec_.levels - 2 - step;
    const Matrix<T> upsampled = apply_fp(pyramid.up[fine], x);
    x.resize(upsampled.rows(), upsampled.cols() + skips_[fine].cols());
    x << upsampled, skips_[fine];
    for (auto& block : decoder[step]) {
      x = block.forward(x, pyramid.conv[fine], {&attributes_[fine], &attributes_[fine]}, nullptr, mode);
    }
  }
  head_hidden_ = head_bn.forward(head1.forward(x), mode);
  leaky_relu_inplace(head_hidden_, static_cast<T>(spec_.leaky_slope));
  Matrix<T> logits = head2.forward(head_hidden_);
  logits.rowwise() += head_bias.value.row(0);
  return logits;
}

template <class T>
Matrix<T> Network<T>::backward_decoder(const Matrix<T>& grad_logits) {
  head_bias.grad.row(0) += grad_logits.colwise().sum();
  Matrix<T> d = head2.backward(grad_logits);
  d = leaky_relu_backward(head_hidden_, d, static_cast<T>(spec_.leaky_slope));
  d = head1.backward(head_bn.backward(d));

  dskip_.assign(spec_.levels, Matrix<T>());
  for (std::size_t step = decoder.size(); step-- > 0;) {
    const std::size_t fine = spec_.levels - 2 - step;
    for (std::size_t b = decoder[step].size(); b-- > 0;) d = decoder[step][b].backward(d);
    const auto coarse_width = static_cast<Eigen::Index>(spec_.level(fine + 1).channels);
    dskip_[fine] = d.rightCols(d.cols() - coarse_width);
    d = apply_fp_backward<T>(pyramid_->up[fine], d.leftCols(coarse_width));
  }
  return d;  // gradient w.r.t. the deepest encoder output
}

template <class T>
Matrix<T> Network<T>::backward(const Matrix<T>& grad_logits) {
  if (pyramid_ == nullptr) throw StateError("network backward called before forward");
  Matrix<T> d = backward_decoder(grad_logits);
  for (std::size_t l = spec_.levels; l-- > 0;) {
    if (l + 1 < spec_.levels) d += dskip_[l];
    for (std::size_t b = encoder[l].size(); b-- > 0;) d = encoder[l][b].backward(d);
  }
  return stem.backward(d);
}

template <class T>
Matrix<T> Network<T>::predict(const PointCloud& cloud, NormMode mode) {
  const Pyramid pyramid = prepare(cloud);
  const Matrix<T> canonical = forward(pyramid, mode);
  Matrix<T> out(canonical.rows(), canonical.cols());
  for (std::size_t i = 0; i < pyramid.order.size(); ++i) {
    out.row(static_cast<Eigen::Index>(pyramid.order[i])) = canonical.row(static_cast<Eigen::Index>(i));
  }
  pyramid_ = nullptr;
  return out;
}

template <class T>
ParameterList<T> Network<T>::parameters() {
  ParameterList<T> out;
  stem.collect(out);
  for (auto& level : encoder) {
    for (auto& block : level) block.collect(out);
  }
  for (auto& step : decoder) {
    for (auto& block : step) block.collect(out);
  }
  head1.collect(out);
  head_bn.collect(out);
  head2.collect(out);
  out.push_back(&head_bias);
  return out;
}

template <class T>
std::size_t Network<T>::parameter_count() {
  std::size_t n = 0;
  for (const Parameter<T>* p : parameters()) {
    if (p->trainable) n += p->size();
  }
  return n;
}

template <class T>
void Network<T>::zero_grad() {
  for (Parameter<T>* p : parameters()) p->zero_grad();
}

std::size_t attention_parameter_count(AttentionVariant variant, std::size_t input_width,
                                      std::size_t hidden_width) {
  switch (variant) {
    case AttentionVariant::mlp2:
      return input_width * hidden_width + hidden_width + hidden_width + 1;
    case AttentionVariant::mlp3:
      return input_width * hidden_width + hidden_width + hidden_width * hidden_width +
             hidden_width + hidden_width + 1;
    default:
      return 0;
  }
}

std::size_t residual_block_parameter_count(std::size_t in, std::size_t out, std::size_t mid,
                                           std::size_t kernel_points, std::size_t shells,
                                           std::size_t attention_parameters) {
  const std::size_t half = mid / 2;
  std::size_t n = mid * in                       // down
                  + kernel_points * mid * half   // W1
                  + shells * half * mid          // W2
                  + mid * out                    // up
                  + 2 * mid                      // down BN
                  + 2 * shells * half + 2 * mid  // SPConv BNs
                  + 2 * out                      // up BN
                  + attention_parameters;
  if (in != out) n += in * out + 2 * out;  // projection shortcut
  return n;
}

template class ResidualBlock<float>;
template class ResidualBlock<double>;
template class Network<float>;
template class Network<double>;

}  // namespace spnet
