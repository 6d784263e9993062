#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hrsar/error.hpp"

namespace hrsar {

template <typename T>
struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<T> values;

  std::size_t element_count() const noexcept {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

/// Ordered, uniquely named parameter tensors. Also used for gradients and optimizer moments,
/// which mirror the parameter layout one-to-one.
template <typename T>
class ParamStore {
 public:
  ParamStore() = default;

  void add(std::string name, std::vector<std::uint32_t> shape, std::vector<T> values);
  void add(std::string name, std::vector<std::uint32_t> shape) { add_zero(std::move(name), std::move(shape)); }

  std::size_t size() const noexcept { return tensors_.size(); }
  const NamedTensor<T>& operator[](std::size_t i) const { return tensors_[i]; }
  NamedTensor<T>& operator[](std::size_t i) { return tensors_[i]; }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }

  /// Index of `name`; throws ShapeError when absent.
  std::size_t index_of(const std::string& name) const;
  const NamedTensor<T>& at(const std::string& name) const { return tensors_[index_of(name)]; }
  NamedTensor<T>& at(const std::string& name) { return tensors_[index_of(name)]; }

  std::size_t scalar_count() const noexcept;

  /// Same names and shapes, all zero.
  ParamStore zeros_like() const;

  /// Names and shapes must match `other` in order; throws ShapeError naming the first mismatch.
  void check_congruent(const ParamStore& other) const;

  void fill(T v);

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& t : tensors_) out.add(t.name, t.shape, std::vector<U>(t.values.begin(), t.values.end()));
    return out;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    if (a.tensors_.size() != b.tensors_.size()) return false;
    for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
      const auto& x = a.tensors_[i];
      const auto& y = b.tensors_[i];
      if (x.name != y.name || x.shape != y.shape || x.values != y.values) return false;
    }
    return true;
  }

 private:
  void add_zero(std::string name, std::vector<std::uint32_t> shape);

  std::vector<NamedTensor<T>> tensors_;
};

using WeightStore = ParamStore<float>;

// WTS: "WTS1", u32 count, then per tensor u16 name length, name bytes, u8 rank,
// u32 dims[rank], f32 payload. Little-endian.
std::vector<std::uint8_t> encode_wts(const WeightStore& w);
WeightStore decode_wts(std::span<const std::uint8_t> bytes);
void save_weights(const WeightStore& w, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

}  // namespace hrsar
