#include "spnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spnet/errors.hpp"

namespace spnet {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

constexpr char kMagic[8] = {'S', 'P', 'N', 'E', 'T', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <class V>
void put(std::string& out, V v) {
  char buf[sizeof(V)];
  std::memcpy(buf, &v, sizeof(V));
  out.append(buf, sizeof(V));
}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    data_ = ss.str();
  }

  template <class V>
  V get() {
    V v;
    std::memcpy(&v, take(sizeof(V)), sizeof(V));
    return v;
  }
  std::string bytes(std::size_t n) { return std::string(take(n), n); }
  bool done() const { return pos_ == data_.size(); }

 private:
  const char* take(std::size_t n) {
    if (data_.size() - pos_ < n) throw InputError("truncated checkpoint " + path_.string());
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::filesystem::path path_;
  std::string data_;
  std::size_t pos_ = 0;
};

NetworkSpec read_header(Reader& r) {
  if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw InputError("not an spnet checkpoint");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw InputError("unsupported checkpoint version " + std::to_string(version));
  const auto len = r.get<std::uint64_t>();
  return NetworkSpec::from_text(r.bytes(len));
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InputError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, Network<T>& network) {
  std::string out(kMagic, sizeof kMagic);
  put(out, kVersion);
  const std::string spec = network.spec().to_text();
  put(out, static_cast<std::uint64_t>(spec.size()));
  out += spec;
  const ParameterList<T> params = network.parameters();
  put(out, static_cast<std::uint64_t>(params.size()));
  for (const Parameter<T>* p : params) {
    put(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    put(out, static_cast<std::uint64_t>(p->value.rows()));
    put(out, static_cast<std::uint64_t>(p->value.cols()));
    for (Eigen::Index i = 0; i < p->value.size(); ++i) put(out, static_cast<float>(p->value.data()[i]));
  }
  write_file_atomic(path, out);
}

template <class T>
void load_parameters(const std::filesystem::path& path, Network<T>& network) {
  Reader r(path);
  const NetworkSpec spec = read_header(r);
  if (spec.to_text() != network.spec().to_text()) {
    throw InputError("checkpoint was written for a different network configuration");
  }
  const ParameterList<T> params = network.parameters();
  const auto count = r.get<std::uint64_t>();
  if (count != params.size()) throw InputError("checkpoint tensor count does not match the network");
  for (Parameter<T>* p : params) {
    const auto name_len = r.get<std::uint32_t>();
    const std::string name = r.bytes(name_len);
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (name != p->name || rows != static_cast<std::uint64_t>(p->value.rows()) ||
        cols != static_cast<std::uint64_t>(p->value.cols())) {
      throw InputError("checkpoint tensor '" + name + "' does not fit parameter '" + p->name + "'");
    }
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = static_cast<T>(r.get<float>());
  }
  if (!r.done()) throw InputError("trailing bytes in checkpoint");
}

NetworkSpec read_checkpoint_spec(const std::filesystem::path& path) {
  Reader r(path);
  return read_header(r);
}

Network<float> load_checkpoint(const std::filesystem::path& path) {
  Network<float> network(read_checkpoint_spec(path), 0);
  load_parameters(path, network);
  return network;
}

template void save_checkpoint(const std::filesystem::path&, Network<float>&);
template void save_checkpoint(const std::filesystem::path&, Network<double>&);
template void load_parameters(const std::filesystem::path&, Network<float>&);
template void load_parameters(const std::filesystem::path&, Network<double>&);

}  // namespace spnet
