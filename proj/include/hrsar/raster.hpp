#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "hrsar/error.hpp"

namespace hrsar {

/// Channel-planar, row-major pixel grid. Element (c, x, y) lives at c*W*H + y*W + x.
template <typename T>
struct Grid {
  using value_type = T;

  std::uint64_t width = 0;
  std::uint64_t height = 0;
  std::uint32_t channels = 1;
  std::vector<T> data;

  Grid() = default;
  Grid(std::uint64_t w, std::uint64_t h, std::uint32_t c = 1, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w * h * c), fill) {}

  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(width * height); }

  std::span<T> channel(std::uint32_t c) noexcept {
    return {data.data() + c * plane_size(), plane_size()};
  }
  std::span<const T> channel(std::uint32_t c) const noexcept {
    return {data.data() + c * plane_size(), plane_size()};
  }

  T& at(std::uint32_t c, std::uint64_t x, std::uint64_t y) noexcept {
    return data[c * plane_size() + y * width + x];
  }
  const T& at(std::uint32_t c, std::uint64_t x, std::uint64_t y) const noexcept {
    return data[c * plane_size() + y * width + x];
  }

  bool same_dims(const Grid& o) const noexcept { return width == o.width && height == o.height; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Real-valued planes (f32). A single feature map ("plane") is a RealRaster with one channel.
using RealRaster = Grid<float>;
using Plane = RealRaster;

/// Complex SAR recording: one plane per receive antenna.
struct ComplexRaster : Grid<std::complex<float>> {
  using Grid::Grid;
  int recording_id = 1;
  double resolution_m = 0.15;
};

enum LabelCode : std::uint8_t {
  kOther = 0,
  kBuilding = 1,
  kRoad = 2,
  kUnlabeled = 255,
};

constexpr bool is_label_code(std::uint8_t v) noexcept {
  return v == kOther || v == kBuilding || v == kRoad || v == kUnlabeled;
}

/// One byte per pixel holding a LabelCode.
using LabelRaster = Grid<std::uint8_t>;

// ---------------------------------------------------------------------------
// SRF files
// ---------------------------------------------------------------------------

enum class SrfType : std::uint8_t { F32 = 0, C64 = 1, U8 = 2 };

constexpr std::size_t kSrfHeaderBytes = 28;

using AnyRaster = std::variant<RealRaster, ComplexRaster, LabelRaster>;

std::vector<std::uint8_t> encode_srf(const RealRaster& r);
std::vector<std::uint8_t> encode_srf(const ComplexRaster& r);
std::vector<std::uint8_t> encode_srf(const LabelRaster& r);

/// Decodes a complete SRF image. Throws FormatError (with byte offset) on bad magic,
/// unknown dtype, truncated payload, non-finite samples or invalid label codes.
AnyRaster decode_srf(std::span<const std::uint8_t> bytes);

void write_raster(const RealRaster& r, const std::filesystem::path& path);
void write_raster(const ComplexRaster& r, const std::filesystem::path& path);
void write_raster(const LabelRaster& r, const std::filesystem::path& path);

AnyRaster read_raster(const std::filesystem::path& path);
RealRaster read_real_raster(const std::filesystem::path& path);
ComplexRaster read_complex_raster(const std::filesystem::path& path);
LabelRaster read_label_raster(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Tiling and dataset split
// ---------------------------------------------------------------------------

struct TileIndex {
  struct Entry {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    std::uint64_t x0 = 0;
    std::uint64_t y0 = 0;
  };

  std::uint64_t tile_size = 1024;
  std::uint64_t raster_width = 0;
  std::uint64_t raster_height = 0;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<Entry> tiles;

  /// "r<row>_c<col>", used as tile id and file stem.
  static std::string tile_name(const Entry& e);
};

TileIndex make_tile_index(std::uint64_t width, std::uint64_t height, std::uint64_t tile_size);

namespace detail {
template <typename R>
R blank_like(const R& src, std::uint64_t w, std::uint64_t h) {
  R out;
  if constexpr (std::is_same_v<R, ComplexRaster>) {
    out.recording_id = src.recording_id;
    out.resolution_m = src.resolution_m;
  }
  out.width = w;
  out.height = h;
  out.channels = src.channels;
  out.data.assign(static_cast<std::size_t>(w * h * src.channels), typename R::value_type{});
  return out;
}
}  // namespace detail

/// Cuts `r` into non-overlapping tile_size x tile_size tiles in row-major grid order.
/// Border remainders smaller than tile_size are dropped.
template <typename R>
std::pair<std::vector<R>, TileIndex> tile(const R& r, std::uint64_t tile_size) {
  TileIndex index = make_tile_index(r.width, r.height, tile_size);
  std::vector<R> tiles;
  tiles.reserve(index.tiles.size());
  for (const auto& e : index.tiles) {
    R t = detail::blank_like(r, tile_size, tile_size);
    for (std::uint32_t c = 0; c < r.channels; ++c)
      for (std::uint64_t y = 0; y < tile_size; ++y) {
        const auto* src = &r.at(c, e.x0, e.y0 + y);
        std::copy(src, src + tile_size, &t.at(c, 0, y));
      }
    tiles.push_back(std::move(t));
  }
  return {std::move(tiles), std::move(index)};
}

/// Inverse of tile(): reassembles the covered region (cols*tile_size x rows*tile_size).
template <typename R>
R untile(std::span<const R> tiles, const TileIndex& index) {
  if (tiles.size() != index.tiles.size())
    throw ShapeError("untile: " + std::to_string(tiles.size()) + " tiles for an index of " +
                     std::to_string(index.tiles.size()));
  const std::uint64_t ts = index.tile_size;
  R out;
  if (tiles.empty()) return out;
  out = detail::blank_like(tiles.front(), index.cols * ts, index.rows * ts);
  for (std::size_t k = 0; k < tiles.size(); ++k) {
    const auto& e = index.tiles[k];
    const R& t = tiles[k];
    if (t.width != ts || t.height != ts || t.channels != out.channels)
      throw ShapeError("untile: tile " + TileIndex::tile_name(e) + " has wrong shape");
    for (std::uint32_t c = 0; c < out.channels; ++c)
      for (std::uint64_t y = 0; y < ts; ++y) {
        const auto* src = &t.at(c, 0, y);
        std::copy(src, src + ts, &out.at(c, e.x0, e.y0 + y));
      }
  }
  return out;
}

/// Extracts the window [x0, x0+w) x [y0, y0+h) of every channel.
template <typename R>
R crop(const R& r, std::uint64_t x0, std::uint64_t y0, std::uint64_t w, std::uint64_t h) {
  if (x0 + w > r.width || y0 + h > r.height) throw ShapeError("crop window exceeds raster");
  R out = detail::blank_like(r, w, h);
  for (std::uint32_t c = 0; c < r.channels; ++c)
    for (std::uint64_t y = 0; y < h; ++y) {
      const auto* src = &r.at(c, x0, y0 + y);
      std::copy(src, src + w, &out.at(c, 0, y));
    }
  return out;
}

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Deterministic shuffle-and-cut. |train| = round(train_fraction * N); both halves keep
/// the input order.
Split split_dataset(std::span<const std::string> tile_ids, double train_fraction,
                    std::uint64_t seed);

}  // namespace hrsar
