#include "spnet/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "spnet/errors.hpp"

namespace spnet {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class N>
N parse_number(std::string_view key, std::string_view value) {
  N out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw InputError("bad value '" + std::string(value) + "' for key '" + std::string(key) + "'");
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

LevelConfig level_config(std::size_t level, double v0, std::size_t base_channels) {
  if (!(v0 > 0.0) || !std::isfinite(v0)) throw ParameterError("v0 must be positive");
  LevelConfig c;
  c.level = level;
  c.v = std::ldexp(v0, static_cast<int>(level));
  c.query_radius = 4.0 * c.v;
  c.r2 = 1.5 * c.v;
  c.r3 = 3.0 * c.v;
  c.pds_radius = 0.75 * c.v;
  c.channels = base_channels << level;
  return c;
}

std::string_view to_string(Sampler s) { return s == Sampler::grid ? "grid" : "pds"; }

Sampler parse_sampler(std::string_view name) {
  if (name == "pds") return Sampler::pds;
  if (name == "grid") return Sampler::grid;
  throw ParameterError("unknown sampler '" + std::string(name) + "'");
}

std::size_t NetworkSpec::mid_channels(std::size_t out_channels) const {
  std::size_t mid = (out_channels + bottleneck_ratio - 1) / bottleneck_ratio;
  if (mid % 2 != 0) ++mid;
  return std::max<std::size_t>(mid, 2);
}

std::vector<double> NetworkSpec::shell_radii(std::size_t l) const {
  const LevelConfig c = level(l);
  std::vector<double> radii;
  if (num_shells == 2) radii.push_back(c.r2);
  if (num_shells >= 3) {
    for (std::size_t n = 1; n < num_shells; ++n) {
      if (n == 1) {
        radii.push_back(c.r2);
      } else if (n + 1 == num_shells) {
        radii.push_back(c.r3);
      } else {
        const double t = static_cast<double>(n - 1) / static_cast<double>(num_shells - 2);
        radii.push_back(c.r2 + t * (c.r3 - c.r2));
      }
    }
  }
  return radii;
}

void NetworkSpec::validate() const {
  if (input_features == 0) throw ParameterError("input_features must be positive");
  if (num_classes < 2) throw ParameterError("num_classes must be at least 2");
  if (levels == 0) throw ParameterError("levels must be positive");
  if (!(v0 > 0.0) || !std::isfinite(v0)) throw ParameterError("v0 must be positive");
  if (base_channels == 0) throw ParameterError("base_channels must be positive");
  if (encoder_blocks == 0) throw ParameterError("encoder_blocks must be positive");
  if (bottleneck_ratio == 0) throw ParameterError("bottleneck_ratio must be positive");
  if (num_shells == 0) throw ParameterError("num_shells must be positive");
  if (num_shells > 1 && points_per_shell == 0) throw ParameterError("points_per_shell must be positive");
  if (fp_k == 0) throw ParameterError("fp_k must be positive");
  if (attention_hidden == 0) throw ParameterError("attention_hidden must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ParameterError("leaky_slope must be in [0, 1)");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) throw ParameterError("bn_momentum must be in (0, 1]");
  if ((base_channels << (levels - 1)) > (std::size_t{1} << 20)) throw ParameterError("channel count too large");
}

std::string NetworkSpec::to_text() const {
  std::ostringstream os;
  os << "input_features = " << input_features << '\n'
     << "num_classes = " << num_classes << '\n'
     << "levels = " << levels << '\n'
     << "v0 = " << format_double(v0) << '\n'
     << "base_channels = " << base_channels << '\n'
     << "encoder_blocks = " << encoder_blocks << '\n'
     << "decoder_blocks = " << decoder_blocks << '\n'
     << "bottleneck_ratio = " << bottleneck_ratio << '\n'
     << "num_shells = " << num_shells << '\n'
     << "points_per_shell = " << points_per_shell << '\n'
     << "layout_seed = " << layout_seed << '\n'
     << "attention = " << to_string(attention) << '\n'
     << "attention_hidden = " << attention_hidden << '\n'
     << "fp_k = " << fp_k << '\n'
     << "fp_weighting = " << to_string(fp_weighting) << '\n'
     << "sampler = " << to_string(sampler) << '\n'
     << "sampler_seed = " << sampler_seed << '\n'
     << "leaky_slope = " << format_double(leaky_slope) << '\n'
     << "bn_momentum = " << format_double(bn_momentum) << '\n';
  return os.str();
}

bool NetworkSpec::set(std::string_view key, std::string_view value) {
  auto size = [&] { return parse_number<std::size_t>(key, value); };
  auto real = [&] { return parse_number<double>(key, value); };
  if (key == "input_features") input_features = size();
  else if (key == "num_classes") num_classes = size();
  else if (key == "levels") levels = size();
  else if (key == "v0") v0 = real();
  else if (key == "base_channels") base_channels = size();
  else if (key == "encoder_blocks") encoder_blocks = size();
  else if (key == "decoder_blocks") decoder_blocks = size();
  else if (key == "bottleneck_ratio") bottleneck_ratio = size();
  else if (key == "num_shells") num_shells = size();
  else if (key == "points_per_shell") points_per_shell = size();
  else if (key == "layout_seed") layout_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "attention" || key == "attention_variant") attention = parse_attention_variant(value);
  else if (key == "attention_hidden") attention_hidden = size();
  else if (key == "fp_k") fp_k = size();
  else if (key == "fp_weighting") fp_weighting = parse_fp_weighting(value);
  else if (key == "sampler") sampler = parse_sampler(value);
  else if (key == "sampler_seed") sampler_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "leaky_slope") leaky_slope = real();
  else if (key == "bn_momentum") bn_momentum = real();
  else return false;
  return true;
}

NetworkSpec NetworkSpec::from_text(std::string_view text) {
  NetworkSpec spec;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (!spec.set(key, value)) throw InputError("unknown network key '" + key + "'");
  }
  spec.validate();
  return spec;
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InputError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw InputError("line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second) {
      throw InputError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

}  // namespace spnet
