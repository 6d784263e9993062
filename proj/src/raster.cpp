#include "hrsar/raster.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hrsar/rng.hpp"

namespace hrsar {

namespace {

static_assert(std::endian::native == std::endian::little,
              "SRF payloads are memcpy'd; a big-endian port needs byte swapping here");

constexpr char kMagic[4] = {'S', 'R', 'F', '1'};
constexpr std::uint16_t kVersion = 1;

template <typename U>
void put(std::vector<std::uint8_t>& out, U v) {
  std::uint8_t buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.insert(out.end(), buf, buf + sizeof(U));
}

template <typename U>
U get(std::span<const std::uint8_t> bytes, std::size_t offset) {
  U v;
  std::memcpy(&v, bytes.data() + offset, sizeof(U));
  return v;
}

template <typename G>
std::vector<std::uint8_t> encode(const G& r, SrfType type) {
  using T = typename G::value_type;
  if (r.data.size() != r.width * r.height * r.channels)
    throw ShapeError("raster data length does not match width*height*channels");
  std::vector<std::uint8_t> out;
  out.reserve(kSrfHeaderBytes + r.data.size() * sizeof(T));
  out.insert(out.end(), kMagic, kMagic + 4);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(type));
  put<std::uint8_t>(out, 0);
  put<std::uint16_t>(out, kVersion);
  put<std::uint32_t>(out, r.channels);
  put<std::uint64_t>(out, r.width);
  put<std::uint64_t>(out, r.height);
  const auto* p = reinterpret_cast<const std::uint8_t*>(r.data.data());
  out.insert(out.end(), p, p + r.data.size() * sizeof(T));
  return out;
}

template <typename G>
G decode_payload(std::span<const std::uint8_t> bytes, std::uint32_t channels, std::uint64_t width,
                 std::uint64_t height) {
  using T = typename G::value_type;
  G r;
  r.width = width;
  r.height = height;
  r.channels = channels;
  const std::uint64_t count = width * height * channels;
  if (width != 0 && height != 0 && count / width / height != channels)
    throw FormatError("SRF dimensions overflow", 12);
  const std::uint64_t available = (bytes.size() - kSrfHeaderBytes) / sizeof(T);
  if (available < count)
    throw FormatError("SRF payload truncated: header declares " + std::to_string(count) +
                          " samples, file holds " + std::to_string(available),
                      kSrfHeaderBytes + available * sizeof(T));
  r.data.resize(static_cast<std::size_t>(count));
  std::memcpy(r.data.data(), bytes.data() + kSrfHeaderBytes, count * sizeof(T));
  return r;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_srf(const RealRaster& r) { return encode(r, SrfType::F32); }
std::vector<std::uint8_t> encode_srf(const ComplexRaster& r) { return encode(r, SrfType::C64); }

std::vector<std::uint8_t> encode_srf(const LabelRaster& r) {
  if (r.channels != 1) throw ShapeError("label rasters have exactly one channel");
  return encode(r, SrfType::U8);
}

AnyRaster decode_srf(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("bad SRF magic", 0);
  if (bytes.size() < kSrfHeaderBytes) throw FormatError("SRF header truncated", bytes.size());
  const auto dtype = get<std::uint8_t>(bytes, 4);
  const auto version = get<std::uint16_t>(bytes, 6);
  if (version != kVersion) throw FormatError("unsupported SRF version " + std::to_string(version), 6);
  const auto channels = get<std::uint32_t>(bytes, 8);
  const auto width = get<std::uint64_t>(bytes, 12);
  const auto height = get<std::uint64_t>(bytes, 20);

  switch (static_cast<SrfType>(dtype)) {
    case SrfType::F32: {
      auto r = decode_payload<RealRaster>(bytes, channels, width, height);
      for (std::size_t i = 0; i < r.data.size(); ++i)
        if (!std::isfinite(r.data[i])) throw FormatError("non-finite f32 sample", kSrfHeaderBytes + 4 * i);
      return r;
    }
    case SrfType::C64: {
      auto g = decode_payload<Grid<std::complex<float>>>(bytes, channels, width, height);
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (!std::isfinite(g.data[i].real()) || !std::isfinite(g.data[i].imag()))
          throw FormatError("non-finite c64 sample", kSrfHeaderBytes + 8 * i);
      ComplexRaster r;
      static_cast<Grid<std::complex<float>>&>(r) = std::move(g);
      return r;
    }
    case SrfType::U8: {
      if (channels != 1) throw FormatError("label SRF must have one channel", 8);
      auto r = decode_payload<LabelRaster>(bytes, channels, width, height);
      for (std::size_t i = 0; i < r.data.size(); ++i)
        if (!is_label_code(r.data[i]))
          throw FormatError("invalid label code " + std::to_string(r.data[i]), kSrfHeaderBytes + i);
      return r;
    }
  }
  throw FormatError("unknown SRF dtype code " + std::to_string(dtype), 4);
}

void write_raster(const RealRaster& r, const std::filesystem::path& path) { dump(encode_srf(r), path); }
void write_raster(const ComplexRaster& r, const std::filesystem::path& path) { dump(encode_srf(r), path); }
void write_raster(const LabelRaster& r, const std::filesystem::path& path) { dump(encode_srf(r), path); }

AnyRaster read_raster(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  try {
    return decode_srf(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string(), e);
  }
}

namespace {
template <typename R>
R read_as(const std::filesystem::path& path, const char* expected) {
  auto any = read_raster(path);
  if (auto* r = std::get_if<R>(&any)) return std::move(*r);
  throw FormatError(path.string() + ": expected " + expected + " SRF", 4);
}
}  // namespace

RealRaster read_real_raster(const std::filesystem::path& path) { return read_as<RealRaster>(path, "f32"); }
ComplexRaster read_complex_raster(const std::filesystem::path& path) {
  return read_as<ComplexRaster>(path, "c64");
}
LabelRaster read_label_raster(const std::filesystem::path& path) { return read_as<LabelRaster>(path, "u8"); }

std::string TileIndex::tile_name(const Entry& e) {
  return "r" + std::to_string(e.row) + "_c" + std::to_string(e.col);
}

TileIndex make_tile_index(std::uint64_t width, std::uint64_t height, std::uint64_t tile_size) {
  if (tile_size < 1) throw ConfigError("tile size must be at least 1");
  TileIndex index;
  index.tile_size = tile_size;
  index.raster_width = width;
  index.raster_height = height;
  index.rows = height / tile_size;
  index.cols = width / tile_size;
  for (std::uint64_t row = 0; row < index.rows; ++row)
    for (std::uint64_t col = 0; col < index.cols; ++col)
      index.tiles.push_back({row, col, col * tile_size, row * tile_size});
  return index;
}

Split split_dataset(std::span<const std::string> tile_ids, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie strictly between 0 and 1");
  const std::size_t n = tile_ids.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  CounterRng rng(seed, /*stream=*/0x5b11);
  rng.shuffle(std::span<std::size_t>(order));

  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<bool> is_train(n, false);
  for (std::size_t k = 0; k < n_train; ++k) is_train[order[k]] = true;

  Split split;
  for (std::size_t i = 0; i < n; ++i) (is_train[i] ? split.train : split.test).push_back(tile_ids[i]);
  return split;
}

}  // namespace hrsar
