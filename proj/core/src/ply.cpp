#include "spnet/ply.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spnet/errors.hpp"

namespace spnet {
namespace {

enum class ScalarType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<ScalarType> parse_type(std::string_view name) {
  if (name == "char" || name == "int8") return ScalarType::i8;
  if (name == "uchar" || name == "uint8") return ScalarType::u8;
  if (name == "short" || name == "int16") return ScalarType::i16;
  if (name == "ushort" || name == "uint16") return ScalarType::u16;
  if (name == "int" || name == "int32") return ScalarType::i32;
  if (name == "uint" || name == "uint32") return ScalarType::u32;
  if (name == "float" || name == "float32") return ScalarType::f32;
  if (name == "double" || name == "float64") return ScalarType::f64;
  return std::nullopt;
}

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::i8:
    case ScalarType::u8:
      return 1;
    case ScalarType::i16:
    case ScalarType::u16:
      return 2;
    case ScalarType::i32:
    case ScalarType::u32:
    case ScalarType::f32:
      return 4;
    case ScalarType::f64:
      return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::f32;
  bool is_list = false;
  ScalarType count_type = ScalarType::u8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

template <class T>
T load_le(const char* bytes) {
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* raw = reinterpret_cast<unsigned char*>(&value);
    std::reverse(raw, raw + sizeof(T));
  }
  return value;
}

template <class T>
void store_le(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.append(bytes, sizeof(T));
}

double decode(ScalarType t, const char* bytes) {
  switch (t) {
    case ScalarType::i8:
      return load_le<std::int8_t>(bytes);
    case ScalarType::u8:
      return load_le<std::uint8_t>(bytes);
    case ScalarType::i16:
      return load_le<std::int16_t>(bytes);
    case ScalarType::u16:
      return load_le<std::uint16_t>(bytes);
    case ScalarType::i32:
      return load_le<std::int32_t>(bytes);
    case ScalarType::u32:
      return load_le<std::uint32_t>(bytes);
    case ScalarType::f32:
      return load_le<float>(bytes);
    case ScalarType::f64:
      return load_le<double>(bytes);
  }
  return 0.0;
}

// Sequential reader over the body of a PLY file in either encoding.
class BodyReader {
 public:
  BodyReader(std::string body, bool ascii) : body_(std::move(body)), ascii_(ascii) {}

  double next(ScalarType t) {
    if (ascii_) {
      skip_space();
      if (pos_ >= body_.size()) throw InputError("PLY body ends prematurely");
      double value = 0.0;
      const char* first = body_.data() + pos_;
      const char* last = body_.data() + body_.size();
      auto [ptr, ec] = std::from_chars(first, last, value);
      if (ec != std::errc()) throw InputError("malformed number in PLY body");
      pos_ = static_cast<std::size_t>(ptr - body_.data());
      return value;
    }
    const std::size_t n = type_size(t);
    if (pos_ + n > body_.size()) throw InputError("PLY body ends prematurely");
    const double value = decode(t, body_.data() + pos_);
    pos_ += n;
    return value;
  }

 private:
  void skip_space() {
    while (pos_ < body_.size() && std::isspace(static_cast<unsigned char>(body_[pos_]))) {
      ++pos_;
    }
  }

  std::string body_;
  bool ascii_;
  std::size_t pos_ = 0;
};

std::vector<std::string_view> split_words(std::string_view line) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) words.push_back(line.substr(i, j - i));
    i = j;
  }
  return words;
}

template <class T>
void append_ascii(std::string& out, T value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

}  // namespace

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open PLY file " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const std::string marker = "end_header";
  const std::size_t header_end = content.find(marker);
  if (content.rfind("ply", 0) != 0 || header_end == std::string::npos) {
    throw InputError("not a PLY file: " + path.string());
  }
  std::size_t body_start = content.find('\n', header_end);
  body_start = body_start == std::string::npos ? content.size() : body_start + 1;

  bool ascii = false;
  std::vector<Element> elements;
  std::istringstream header(content.substr(0, header_end));
  std::string line;
  while (std::getline(header, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto words = split_words(line);
    if (words.empty() || words[0] == "ply" || words[0] == "comment" ||
        words[0] == "obj_info") {
      continue;
    }
    if (words[0] == "format") {
      if (words.size() < 2) throw InputError("malformed PLY format line");
      if (words[1] == "ascii") {
        ascii = true;
      } else if (words[1] == "binary_little_endian") {
        ascii = false;
      } else {
        throw InputError("unsupported PLY format: " + std::string(words[1]));
      }
    } else if (words[0] == "element") {
      if (words.size() != 3) throw InputError("malformed PLY element line");
      Element e;
      e.name = words[1];
      e.count = std::stoull(std::string(words[2]));
      elements.push_back(std::move(e));
    } else if (words[0] == "property") {
      if (elements.empty()) throw InputError("PLY property before any element");
      Property p;
      if (words.size() == 5 && words[1] == "list") {
        auto ct = parse_type(words[2]);
        auto it = parse_type(words[3]);
        if (!ct || !it) throw InputError("unknown PLY list type");
        p.is_list = true;
        p.count_type = *ct;
        p.type = *it;
        p.name = words[4];
      } else if (words.size() == 3) {
        auto t = parse_type(words[1]);
        if (!t) throw InputError("unknown PLY property type " + std::string(words[1]));
        p.type = *t;
        p.name = words[2];
      } else {
        throw InputError("malformed PLY property line");
      }
      elements.back().properties.push_back(std::move(p));
    }
  }

  BodyReader body(content.substr(body_start), ascii);
  PointCloud cloud;
  bool found_vertex = false;
  for (const Element& e : elements) {
    if (e.name != "vertex") {
      for (std::size_t i = 0; i < e.count; ++i) {
        for (const Property& p : e.properties) {
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(body.next(p.count_type));
            for (std::size_t j = 0; j < n; ++j) body.next(p.type);
          } else {
            body.next(p.type);
          }
        }
      }
      continue;
    }
    found_vertex = true;

    auto slot = [&](std::string_view name) -> int {
      for (std::size_t i = 0; i < e.properties.size(); ++i) {
        if (e.properties[i].name == name && !e.properties[i].is_list) return static_cast<int>(i);
      }
      return -1;
    };
    const std::array<int, 3> pos_slot{slot("x"), slot("y"), slot("z")};
    const std::array<int, 3> col_slot{slot("red"), slot("green"), slot("blue")};
    const std::array<int, 3> nrm_slot{slot("nx"), slot("ny"), slot("nz")};
    const int label_slot = slot("label");
    if (std::find(pos_slot.begin(), pos_slot.end(), -1) != pos_slot.end()) {
      throw InputError("PLY vertex element lacks x, y or z");
    }
    const bool has_color = std::find(col_slot.begin(), col_slot.end(), -1) == col_slot.end();
    const bool has_normal = std::find(nrm_slot.begin(), nrm_slot.end(), -1) == nrm_slot.end();

    std::vector<double> row(e.properties.size());
    for (std::size_t i = 0; i < e.count; ++i) {
      for (std::size_t j = 0; j < e.properties.size(); ++j) {
        const Property& p = e.properties[j];
        if (p.is_list) {
          const auto n = static_cast<std::size_t>(body.next(p.count_type));
          for (std::size_t m = 0; m < n; ++m) body.next(p.type);
          row[j] = 0.0;
        } else {
          row[j] = body.next(p.type);
        }
      }
      cloud.positions.push_back({row[pos_slot[0]], row[pos_slot[1]], row[pos_slot[2]]});
      if (has_color) {
        Vec3 c;
        for (int d = 0; d < 3; ++d) {
          const bool bytes = e.properties[col_slot[d]].type == ScalarType::u8;
          c[d] = bytes ? row[col_slot[d]] / 255.0 : row[col_slot[d]];
        }
        cloud.colors.push_back(c);
      }
      if (has_normal) {
        cloud.normals.push_back({row[nrm_slot[0]], row[nrm_slot[1]], row[nrm_slot[2]]});
      }
      if (label_slot >= 0) {
        cloud.labels.push_back(static_cast<std::int32_t>(row[label_slot]));
      }
    }
  }
  if (!found_vertex) throw InputError("PLY file has no vertex element");
  for (const Vec3& p : cloud.positions) {
    if (!is_finite(p)) throw InputError("non-finite coordinates in " + path.string());
  }
  return cloud;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud, PlyFormat format) {
  cloud.validate();
  const bool ascii = format == PlyFormat::ascii;
  bool float_positions = true;
  for (const Vec3& p : cloud.positions) {
    for (double v : p) {
      if (static_cast<double>(static_cast<float>(v)) != v) float_positions = false;
    }
  }

  std::string out;
  out += "ply\n";
  out += ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  const char* pos_type = float_positions ? "float" : "double";
  for (const char* axis : {"x", "y", "z"}) {
    out += std::string("property ") + pos_type + " " + axis + "\n";
  }
  if (cloud.has_colors()) {
    out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  }
  if (cloud.has_normals()) {
    out += "property float nx\nproperty float ny\nproperty float nz\n";
  }
  if (cloud.has_labels()) out += "property int label\n";
  out += "end_header\n";

  auto to_byte = [](double c) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
  };

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (ascii) {
      std::string line;
      for (double v : cloud.positions[i]) {
        if (float_positions) {
          append_ascii(line, static_cast<float>(v));
        } else {
          append_ascii(line, v);
        }
        line += ' ';
      }
      if (cloud.has_colors()) {
        for (double c : cloud.colors[i]) {
          append_ascii(line, static_cast<int>(to_byte(c)));
          line += ' ';
        }
      }
      if (cloud.has_normals()) {
        for (double v : cloud.normals[i]) {
          append_ascii(line, static_cast<float>(v));
          line += ' ';
        }
      }
      if (cloud.has_labels()) {
        append_ascii(line, cloud.labels[i]);
        line += ' ';
      }
      line.back() = '\n';
      out += line;
    } else {
      for (double v : cloud.positions[i]) {
        if (float_positions) {
          store_le(out, static_cast<float>(v));
        } else {
          store_le(out, v);
        }
      }
      if (cloud.has_colors()) {
        for (double c : cloud.colors[i]) store_le(out, to_byte(c));
      }
      if (cloud.has_normals()) {
        for (double v : cloud.normals[i]) store_le(out, static_cast<float>(v));
      }
      if (cloud.has_labels()) store_le(out, cloud.labels[i]);
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw InputError("cannot write PLY file " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw InputError("failed writing PLY file " + path.string());
}

}  // namespace spnet
