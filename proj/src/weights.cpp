#include "hrsar/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

namespace hrsar {

template <typename T>
void ParamStore<T>::add(std::string name, std::vector<std::uint32_t> shape, std::vector<T> values) {
  for (const auto& t : tensors_)
    if (t.name == name) throw ShapeError("duplicate parameter name '" + name + "'");
  NamedTensor<T> t{std::move(name), std::move(shape), std::move(values)};
  if (t.values.size() != t.element_count())
    throw ShapeError("parameter '" + t.name + "': " + std::to_string(t.values.size()) + " values for shape of " +
                     std::to_string(t.element_count()));
  tensors_.push_back(std::move(t));
}

template <typename T>
void ParamStore<T>::add_zero(std::string name, std::vector<std::uint32_t> shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  add(std::move(name), std::move(shape), std::vector<T>(n, T(0)));
}

template <typename T>
std::size_t ParamStore<T>::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name == name) return i;
  throw ShapeError("no parameter named '" + name + "'");
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.values.size();
  return n;
}

template <typename T>
ParamStore<T> ParamStore<T>::zeros_like() const {
  ParamStore out;
  out.tensors_.reserve(tensors_.size());
  for (const auto& t : tensors_) out.tensors_.push_back({t.name, t.shape, std::vector<T>(t.values.size(), T(0))});
  return out;
}

template <typename T>
void ParamStore<T>::check_congruent(const ParamStore& other) const {
  if (tensors_.size() != other.tensors_.size())
    throw ShapeError("parameter sets differ in tensor count (" + std::to_string(tensors_.size()) + " vs " +
                     std::to_string(other.tensors_.size()) + ")");
  auto shape_str = [](const std::vector<std::uint32_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
  };
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& a = tensors_[i];
    const auto& b = other.tensors_[i];
    if (a.name != b.name) throw ShapeError("tensor " + std::to_string(i) + ": expected '" + b.name + "', found '" + a.name + "'");
    if (a.shape != b.shape)
      throw ShapeError("tensor '" + a.name + "': shape " + shape_str(a.shape) + " does not match expected " +
                       shape_str(b.shape));
  }
}

template <typename T>
void ParamStore<T>::fill(T v) {
  for (auto& t : tensors_) std::fill(t.values.begin(), t.values.end(), v);
}

template class ParamStore<float>;
template class ParamStore<double>;

namespace {

static_assert(std::endian::native == std::endian::little, "WTS payloads are memcpy'd");

constexpr char kMagic[4] = {'W', 'T', 'S', '1'};

template <typename U>
void put(std::vector<std::uint8_t>& out, U v) {
  std::uint8_t buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.insert(out.end(), buf, buf + sizeof(U));
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  void copy(void* dst, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("WTS truncated while reading ") + what, pos_);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
};

}  // namespace

std::vector<std::uint8_t> encode_wts(const WeightStore& w) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(w.size()));
  for (const auto& t : w) {
    if (t.name.size() > 0xffff) throw ShapeError("parameter name too long: " + t.name.substr(0, 32));
    if (t.shape.size() > 0xff) throw ShapeError("parameter rank too large: " + t.name);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint32_t>(out, d);
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.values.data());
    out.insert(out.end(), p, p + t.values.size() * sizeof(float));
  }
  return out;
}

WeightStore decode_wts(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad WTS magic", 0);
  Reader in(bytes, 4);
  const auto count = in.get<std::uint32_t>("tensor count");
  WeightStore w;
  std::unordered_set<std::string> names;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto start = in.pos();
    const auto len = in.get<std::uint16_t>("name length");
    std::string name(len, '\0');
    in.copy(name.data(), len, "name");
    if (!names.insert(name).second) throw FormatError("duplicate tensor name '" + name + "'", start);
    const auto rank = in.get<std::uint8_t>("rank");
    std::vector<std::uint32_t> shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      d = in.get<std::uint32_t>("dims");
      n *= d;
    }
    if (n * sizeof(float) > bytes.size()) throw FormatError("tensor '" + name + "' larger than the file", start);
    std::vector<float> values(static_cast<std::size_t>(n));
    const auto payload_at = in.pos();
    in.copy(values.data(), values.size() * sizeof(float), "payload");
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!std::isfinite(values[i])) throw FormatError("non-finite value in '" + name + "'", payload_at + 4 * i);
    w.add(std::move(name), std::move(shape), std::move(values));
  }
  return w;
}

void save_weights(const WeightStore& w, const std::filesystem::path& path) {
  const auto bytes = encode_wts(w);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

WeightStore load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return decode_wts(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string(), e);
  }
}

}  // namespace hrsar
