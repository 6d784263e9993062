#include "hrsar/conv.hpp"

#include <algorithm>
#include <sstream>

namespace hrsar {

void ConvSpec::validate() const {
  if (in_channels < 1 || out_channels < 1) throw ShapeError("conv: channel counts must be positive");
  if (kernel_h < 1 || kernel_w < 1) throw ShapeError("conv: kernel must be at least 1x1");
  if (stride < 1) throw ShapeError("conv: stride must be at least 1");
  if (dilation < 1) throw ShapeError("conv: dilation must be at least 1");
  if (padding < 0) throw ShapeError("conv: padding must be non-negative");
  if (transposed && dilation != 1) throw ShapeError("conv: transposed convolutions are not dilated");
  if (output_padding < 0 || (output_padding > 0 && (!transposed || output_padding >= stride)))
    throw ShapeError("conv: output padding must be smaller than the stride of a transposed conv");
}

std::vector<std::uint32_t> ConvSpec::weight_shape() const {
  const auto a = static_cast<std::uint32_t>(transposed ? in_channels : out_channels);
  const auto b = static_cast<std::uint32_t>(transposed ? out_channels : in_channels);
  return {a, b, static_cast<std::uint32_t>(kernel_h), static_cast<std::uint32_t>(kernel_w)};
}

std::pair<int, int> ConvSpec::output_size(int in_h, int in_w) const {
  int oh, ow;
  if (transposed) {
    oh = (in_h - 1) * stride - 2 * padding + dilation * (kernel_h - 1) + 1 + output_padding;
    ow = (in_w - 1) * stride - 2 * padding + dilation * (kernel_w - 1) + 1 + output_padding;
  } else {
    const int nh = in_h + 2 * padding - dilation * (kernel_h - 1) - 1;
    const int nw = in_w + 2 * padding - dilation * (kernel_w - 1) - 1;
    oh = nh < 0 ? 0 : nh / stride + 1;
    ow = nw < 0 ? 0 : nw / stride + 1;
  }
  if (in_h < 1 || in_w < 1 || oh < 1 || ow < 1)
    throw ShapeError("conv " + describe() + ": input " + std::to_string(in_h) + "x" + std::to_string(in_w) +
                     " gives a non-positive output size");
  return {oh, ow};
}

double ConvSpec::macs(int in_h, int in_w) const {
  const double per_tap = static_cast<double>(weight_count());
  if (transposed) return per_tap * in_h * in_w;
  const auto [oh, ow] = output_size(in_h, in_w);
  return per_tap * oh * ow;
}

std::string ConvSpec::describe() const {
  std::ostringstream os;
  os << (transposed ? "convT " : "conv ") << kernel_h << "x" << kernel_w << " " << in_channels << "->" << out_channels
     << " s" << stride << " d" << dilation << " p" << padding;
  return os.str();
}

namespace {

template <typename T>
FeatureMap<T> pad(const FeatureMap<T>& x, int top, int left, int bottom, int right) {
  FeatureMap<T> out(x.channels, x.height + top + bottom, x.width + left + right);
  for (int c = 0; c < x.channels; ++c)
    for (int y = 0; y < x.height; ++y) {
      const T* src = x.plane(c) + static_cast<std::size_t>(y) * x.width;
      std::copy(src, src + x.width, &out.at(c, y + top, left));
    }
  return out;
}

template <typename T>
FeatureMap<T> crop(const FeatureMap<T>& x, int top, int left, int h, int w) {
  FeatureMap<T> out(x.channels, h, w);
  for (int c = 0; c < x.channels; ++c)
    for (int y = 0; y < h; ++y) {
      const T* src = &x.at(c, y + top, left);
      std::copy(src, src + w, out.plane(c) + static_cast<std::size_t>(y) * w);
    }
  return out;
}

void check_weights(const ConvSpec& spec, std::size_t nw, std::size_t nb) {
  if (nw != spec.weight_count())
    throw ShapeError("conv " + spec.describe() + ": expected " + std::to_string(spec.weight_count()) +
                     " weights, got " + std::to_string(nw));
  if (spec.bias && nb != static_cast<std::size_t>(spec.out_channels))
    throw ShapeError("conv " + spec.describe() + ": bias length mismatch");
}

// dst[o][i][j] = bias[o] + sum_{c,u,v} w[o][c][u][v] * src[c][i*s + u*d][j*s + v*d]
// `src` is pre-padded. Four output channels share every input load; each output element is
// accumulated sequentially in (c, u, v) order, so the result is independent of scheduling.
template <typename T, int S>
void gather_blocked(const FeatureMap<T>& src, std::span<const T> w, const T* bias, FeatureMap<T>& dst, int kh,
                    int kw, int stride, int d) {
  constexpr int OB = 4;
  constexpr int JB = 64;
  const int s = S > 0 ? S : stride;
  const int cs = src.channels;
  const int cd = dst.channels;
  const int taps = kh * kw;
  const int blocks = (cd + OB - 1) / OB;

  // Repack to [block][c][tap][k] with zero weights for missing channels of the last block.
  std::vector<T> packed(static_cast<std::size_t>(blocks) * cs * taps * OB, T(0));
  for (int o = 0; o < cd; ++o)
    for (int c = 0; c < cs; ++c)
      for (int t = 0; t < taps; ++t)
        packed[((static_cast<std::size_t>(o / OB) * cs + c) * taps + t) * OB + o % OB] =
            w[(static_cast<std::size_t>(o) * cs + c) * taps + t];

  const int rows = dst.height;
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < blocks; ++b)
    for (int i = 0; i < rows; ++i) {
      const int o0 = b * OB;
      const int on = std::min(OB, cd - o0);
      T init[OB] = {};
      if (bias)
        for (int k = 0; k < on; ++k) init[k] = bias[o0 + k];
      alignas(64) T acc[OB][JB];
      for (int j0 = 0; j0 < dst.width; j0 += JB) {
        const int jb = std::min(JB, dst.width - j0);
        for (int k = 0; k < OB; ++k)
          for (int jj = 0; jj < jb; ++jj) acc[k][jj] = init[k];
        const T* wp = packed.data() + static_cast<std::size_t>(b) * cs * taps * OB;
        for (int c = 0; c < cs; ++c) {
          const T* plane = src.plane(c);
          for (int u = 0; u < kh; ++u) {
            const T* row = plane + static_cast<std::size_t>(i * s + u * d) * src.width + static_cast<std::size_t>(j0) * s;
            for (int v = 0; v < kw; ++v, wp += OB) {
              const T* r = row + v * d;
              const T w0 = wp[0], w1 = wp[1], w2 = wp[2], w3 = wp[3];
              for (int jj = 0; jj < jb; ++jj) {
                const T xv = r[jj * s];
                acc[0][jj] += w0 * xv;
                acc[1][jj] += w1 * xv;
                acc[2][jj] += w2 * xv;
                acc[3][jj] += w3 * xv;
              }
            }
          }
        }
        for (int k = 0; k < on; ++k)
          std::copy(acc[k], acc[k] + jb, dst.plane(o0 + k) + static_cast<std::size_t>(i) * dst.width + j0);
      }
    }
}

template <typename T>
void gather(const FeatureMap<T>& src, std::span<const T> w, const T* bias, FeatureMap<T>& dst, int kh, int kw,
            int stride, int d) {
  if (stride == 1)
    gather_blocked<T, 1>(src, w, bias, dst, kh, kw, 1, d);
  else
    gather_blocked<T, 0>(src, w, bias, dst, kh, kw, stride, d);
}

// Unpadded, bounds-checked reference form of gather().
template <typename T>
void gather_generic(const FeatureMap<T>& src, std::span<const T> w, const T* bias, FeatureMap<T>& dst, int kh, int kw,
                    int s, int d, int p) {
  const int cs = src.channels;
#pragma omp parallel for schedule(static)
  for (int o = 0; o < dst.channels; ++o)
    for (int i = 0; i < dst.height; ++i)
      for (int j = 0; j < dst.width; ++j) {
        T acc = bias ? bias[o] : T(0);
        for (int c = 0; c < cs; ++c)
          for (int u = 0; u < kh; ++u) {
            const int y = i * s - p + u * d;
            if (y < 0 || y >= src.height) continue;
            for (int v = 0; v < kw; ++v) {
              const int x = j * s - p + v * d;
              if (x < 0 || x >= src.width) continue;
              acc += w[((static_cast<std::size_t>(o) * cs + c) * kh + u) * kw + v] * src.at(c, y, x);
            }
          }
        dst.at(o, i, j) = acc;
      }
}

// dst[c][i*s + u*d][j*s + v*d] += w[o][c][u][v] * src[o][i][j] into a pre-padded dst.
// For each source row and tap, four destination channels are summed over o in registers and
// then added to dst once. A dst element receives its terms in (i, u, v) order.
template <typename T>
void scatter(const FeatureMap<T>& src, std::span<const T> w, FeatureMap<T>& dst, int kh, int kw, int s, int d) {
  constexpr int CB = 4;
  constexpr int JB = 64;
  const int co = src.channels;
  const int cc = dst.channels;
  const int taps = kh * kw;
  const int blocks = (cc + CB - 1) / CB;

  // [block][tap][o][k]
  std::vector<T> packed(static_cast<std::size_t>(blocks) * taps * co * CB, T(0));
  for (int o = 0; o < co; ++o)
    for (int c = 0; c < cc; ++c)
      for (int t = 0; t < taps; ++t)
        packed[((static_cast<std::size_t>(c / CB) * taps + t) * co + o) * CB + c % CB] =
            w[(static_cast<std::size_t>(o) * cc + c) * taps + t];

#pragma omp parallel for schedule(static)
  for (int b = 0; b < blocks; ++b) {
    const int c0 = b * CB;
    const int cn = std::min(CB, cc - c0);
    alignas(64) T acc[CB][JB];
    for (int i = 0; i < src.height; ++i)
      for (int j0 = 0; j0 < src.width; j0 += JB) {
        const int jb = std::min(JB, src.width - j0);
        for (int t = 0; t < taps; ++t) {
          const int u = t / kw, v = t % kw;
          for (int k = 0; k < CB; ++k)
            for (int jj = 0; jj < jb; ++jj) acc[k][jj] = T(0);
          const T* wp = packed.data() + (static_cast<std::size_t>(b) * taps + t) * co * CB;
          for (int o = 0; o < co; ++o, wp += CB) {
            const T* r = src.plane(o) + static_cast<std::size_t>(i) * src.width + j0;
            const T w0 = wp[0], w1 = wp[1], w2 = wp[2], w3 = wp[3];
            for (int jj = 0; jj < jb; ++jj) {
              const T xv = r[jj];
              acc[0][jj] += w0 * xv;
              acc[1][jj] += w1 * xv;
              acc[2][jj] += w2 * xv;
              acc[3][jj] += w3 * xv;
            }
          }
          for (int k = 0; k < cn; ++k) {
            T* drow = dst.plane(c0 + k) + static_cast<std::size_t>(i * s + u * d) * dst.width +
                      static_cast<std::size_t>(j0) * s + v * d;
            if (s == 1) {
              for (int jj = 0; jj < jb; ++jj) drow[jj] += acc[k][jj];
            } else {
              for (int jj = 0; jj < jb; ++jj) drow[jj * s] += acc[k][jj];
            }
          }
        }
      }
  }
}

// Bounds-checked scatter into an unpadded dst (offset -p).
template <typename T>
void scatter_generic(const FeatureMap<T>& src, std::span<const T> w, FeatureMap<T>& dst, int kh, int kw, int s, int d,
                     int p) {
  const int co = src.channels;
  const int cc = dst.channels;
  for (int c = 0; c < cc; ++c)
    for (int o = 0; o < co; ++o)
      for (int u = 0; u < kh; ++u)
        for (int v = 0; v < kw; ++v) {
          const T wv = w[((static_cast<std::size_t>(o) * cc + c) * kh + u) * kw + v];
          for (int i = 0; i < src.height; ++i) {
            const int y = i * s - p + u * d;
            if (y < 0 || y >= dst.height) continue;
            for (int j = 0; j < src.width; ++j) {
              const int x = j * s - p + v * d;
              if (x < 0 || x >= dst.width) continue;
              dst.at(c, y, x) += wv * src.at(o, i, j);
            }
          }
        }
}

// dw[o][c][u][v] += sum_{i,j} small[o][i][j] * big[c][i*s + u*d][j*s + v*d] (big pre-padded).
//
// Every (o, c, tap) owns L lane sums; lane l collects the columns j with j % L == l in row
// order, and the lanes are added in index order at the end. Rows are processed in bands so
// the band of both maps stays cache resident while all (o-block, c, u) combinations use it.
template <typename T, int KW, int S>
void correlate_blocked(const FeatureMap<T>& big, const FeatureMap<T>& small, std::span<T> dw, int kh, int kw_rt,
                       int s_rt, int d) {
  constexpr int OB = 4;
  constexpr int L = 8;
  constexpr int KWMAX = KW > 0 ? KW : 8;
  const int kw = KW > 0 ? KW : kw_rt;
  const int s = S > 0 ? S : s_rt;
  const int cs = small.channels;
  const int cb = big.channels;
  const int taps = kh * kw;
  const int ws = small.width;
  const int full = ws / L * L;
  const std::size_t bw = static_cast<std::size_t>(big.width);
  const int oblocks = (cs + OB - 1) / OB;
  const int band = 16;

  std::vector<T> lanes(static_cast<std::size_t>(oblocks) * OB * cb * taps * L, T(0));
  const std::vector<T> zero_row(static_cast<std::size_t>(ws), T(0));

  for (int i0 = 0; i0 < small.height; i0 += band) {
    const int i1 = std::min(small.height, i0 + band);
#pragma omp parallel for collapse(2) schedule(static)
    for (int ob = 0; ob < oblocks; ++ob)
      for (int c = 0; c < cb; ++c) {
        const int o0 = ob * OB;
        for (int u = 0; u < kh; ++u) {
          T a[OB][KWMAX][L];
          auto slot = [&](int k, int v) {
            return lanes.data() + ((static_cast<std::size_t>(o0 + k) * cb + c) * taps + u * kw + v) * L;
          };
          for (int k = 0; k < OB; ++k)
            for (int v = 0; v < kw; ++v)
              for (int l = 0; l < L; ++l) a[k][v][l] = slot(k, v)[l];
          for (int i = i0; i < i1; ++i) {
            const T* sr[OB];
            for (int k = 0; k < OB; ++k)
              sr[k] = o0 + k < cs ? small.plane(o0 + k) + static_cast<std::size_t>(i) * ws : zero_row.data();
            const T* brow = big.plane(c) + (static_cast<std::size_t>(i) * s + static_cast<std::size_t>(u) * d) * bw;
            for (int jb = 0; jb < full; jb += L)
              for (int v = 0; v < kw; ++v) {
                const T* bp = brow + v * d + static_cast<std::size_t>(jb) * s;
                for (int l = 0; l < L; ++l) {
                  const T xv = bp[l * s];
                  a[0][v][l] += sr[0][jb + l] * xv;
                  a[1][v][l] += sr[1][jb + l] * xv;
                  a[2][v][l] += sr[2][jb + l] * xv;
                  a[3][v][l] += sr[3][jb + l] * xv;
                }
              }
            for (int j = full; j < ws; ++j)
              for (int v = 0; v < kw; ++v) {
                const T xv = brow[v * d + static_cast<std::size_t>(j) * s];
                for (int k = 0; k < OB; ++k) a[k][v][j - full] += sr[k][j] * xv;
              }
          }
          for (int k = 0; k < OB; ++k)
            for (int v = 0; v < kw; ++v)
              for (int l = 0; l < L; ++l) slot(k, v)[l] = a[k][v][l];
        }
      }
  }

  for (int o = 0; o < cs; ++o)
    for (int c = 0; c < cb; ++c)
      for (int t = 0; t < taps; ++t) {
        const T* p = lanes.data() + ((static_cast<std::size_t>(o) * cb + c) * taps + t) * L;
        T sum = T(0);
        for (int l = 0; l < L; ++l) sum += p[l];
        dw[(static_cast<std::size_t>(o) * cb + c) * taps + t] += sum;
      }
}

template <typename T>
void correlate(const FeatureMap<T>& big, const FeatureMap<T>& small, std::span<T> dw, int kh, int kw, int s, int d) {
  if (kw > 8) throw ShapeError("conv: kernels wider than 8 taps are not supported by the gradient kernel");
  if (s == 1) {
    if (kw == 3) return correlate_blocked<T, 3, 1>(big, small, dw, kh, kw, s, d);
    if (kw == 1) return correlate_blocked<T, 1, 1>(big, small, dw, kh, kw, s, d);
    return correlate_blocked<T, 0, 1>(big, small, dw, kh, kw, s, d);
  }
  if (kw == 3) return correlate_blocked<T, 3, 0>(big, small, dw, kh, kw, s, d);
  if (kw == 2) return correlate_blocked<T, 2, 0>(big, small, dw, kh, kw, s, d);
  return correlate_blocked<T, 0, 0>(big, small, dw, kh, kw, s, d);
}

template <typename T>
void accumulate_bias_grad(const FeatureMap<T>& dy, std::span<T> db) {
  constexpr int L = 16;
  const std::size_t n = dy.plane_size();
  for (int o = 0; o < dy.channels; ++o) {
    T acc[L] = {};
    const T* p = dy.plane(o);
    std::size_t k = 0;
    for (; k + L <= n; k += L)
      for (int l = 0; l < L; ++l) acc[l] += p[k + l];
    for (; k < n; ++k) acc[k % L] += p[k];
    T sum = T(0);
    for (int l = 0; l < L; ++l) sum += acc[l];
    db[o] += sum;
  }
}

template <typename T>
void check_input(const ConvSpec& spec, const FeatureMap<T>& x) {
  spec.validate();
  if (x.channels != spec.in_channels)
    throw ShapeError("conv " + spec.describe() + ": input has " + std::to_string(x.channels) + " channels");
}

}  // namespace

template <typename T>
FeatureMap<T> conv2d(const FeatureMap<T>& x, const ConvSpec& spec, std::span<const T> weights, std::span<const T> bias,
                     ConvPath path) {
  if (spec.transposed) throw ShapeError("conv2d called with a transposed spec");
  check_input(spec, x);
  check_weights(spec, weights.size(), bias.size());
  const auto [oh, ow] = spec.output_size(x.height, x.width);
  FeatureMap<T> y(spec.out_channels, oh, ow);
  const T* b = spec.bias ? bias.data() : nullptr;
  if (path == ConvPath::Generic) {
    gather_generic(x, weights, b, y, spec.kernel_h, spec.kernel_w, spec.stride, spec.dilation, spec.padding);
  } else {
    const int p = spec.padding;
    const auto xp = p > 0 ? pad(x, p, p, p, p) : x;
    gather(xp, weights, b, y, spec.kernel_h, spec.kernel_w, spec.stride, spec.dilation);
  }
  return y;
}

template <typename T>
FeatureMap<T> conv2d_transposed(const FeatureMap<T>& x, const ConvSpec& spec, std::span<const T> weights,
                                std::span<const T> bias, ConvPath path) {
  if (!spec.transposed) throw ShapeError("conv2d_transposed called with a regular spec");
  check_input(spec, x);
  check_weights(spec, weights.size(), bias.size());
  const auto [oh, ow] = spec.output_size(x.height, x.width);
  const int p = spec.padding;
  FeatureMap<T> y;
  if (path == ConvPath::Generic) {
    y = FeatureMap<T>(spec.out_channels, oh, ow);
    scatter_generic(x, weights, y, spec.kernel_h, spec.kernel_w, spec.stride, 1, p);
  } else {
    FeatureMap<T> yp(spec.out_channels, oh + 2 * p, ow + 2 * p);
    scatter(x, weights, yp, spec.kernel_h, spec.kernel_w, spec.stride, 1);
    y = p > 0 ? crop(yp, p, p, oh, ow) : std::move(yp);
  }
  if (spec.bias)
    for (int o = 0; o < y.channels; ++o) {
      T* plane = y.plane(o);
      for (std::size_t k = 0; k < y.plane_size(); ++k) plane[k] += bias[o];
    }
  return y;
}

template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& x, const ConvSpec& spec, std::span<const T> weights, std::span<const T> bias) {
  Tensor4<T> out;
  for (int n = 0; n < x.batch; ++n) {
    auto y = conv2d(x.get_sample(n), spec, weights, bias);
    if (n == 0) out = Tensor4<T>(x.batch, y.channels, y.height, y.width);
    out.set_sample(n, y);
  }
  return out;
}

template <typename T>
Tensor4<T> conv2d_transposed(const Tensor4<T>& x, const ConvSpec& spec, std::span<const T> weights,
                             std::span<const T> bias) {
  Tensor4<T> out;
  for (int n = 0; n < x.batch; ++n) {
    auto y = conv2d_transposed(x.get_sample(n), spec, weights, bias);
    if (n == 0) out = Tensor4<T>(x.batch, y.channels, y.height, y.width);
    out.set_sample(n, y);
  }
  return out;
}

template <typename T>
FeatureMap<T> conv2d_input_grad(const ConvSpec& spec, std::span<const T> weights, const FeatureMap<T>& dy, int in_h,
                                int in_w, ConvPath path) {
  spec.validate();
  check_weights(spec, weights.size(), spec.bias ? spec.out_channels : 0);
  const auto [oh, ow] = spec.output_size(in_h, in_w);
  if (dy.channels != spec.out_channels || dy.height != oh || dy.width != ow)
    throw ShapeError("conv " + spec.describe() + ": upstream gradient has shape " + dy.shape_string());
  const int kh = spec.kernel_h, kw = spec.kernel_w, d = spec.dilation, p = spec.padding;

  if (path == ConvPath::Generic) {
    FeatureMap<T> dx(spec.in_channels, in_h, in_w);
    scatter_generic(dy, weights, dx, kh, kw, spec.stride, d, p);
    return dx;
  }

  const int qh = d * (kh - 1) - p;
  const int qw = d * (kw - 1) - p;
  if (spec.stride == 1 && qh >= 0 && qw >= 0) {
    // Stride 1: the adjoint is itself a correlation with the flipped, channel-swapped kernel.
    std::vector<T> flipped(weights.size());
    const int ci = spec.in_channels, co = spec.out_channels;
    for (int o = 0; o < co; ++o)
      for (int c = 0; c < ci; ++c)
        for (int u = 0; u < kh; ++u)
          for (int v = 0; v < kw; ++v)
            flipped[((static_cast<std::size_t>(c) * co + o) * kh + (kh - 1 - u)) * kw + (kw - 1 - v)] =
                weights[((static_cast<std::size_t>(o) * ci + c) * kh + u) * kw + v];
    const auto dyp = pad(dy, qh, qw, qh, qw);
    FeatureMap<T> dx(spec.in_channels, in_h, in_w);
    gather(dyp, std::span<const T>(flipped), static_cast<const T*>(nullptr), dx, kh, kw, 1, d);
    return dx;
  }

  FeatureMap<T> dxp(spec.in_channels, in_h + 2 * p, in_w + 2 * p);
  scatter(dy, weights, dxp, kh, kw, spec.stride, d);
  return p > 0 ? crop(dxp, p, p, in_h, in_w) : dxp;
}

template <typename T>
void conv2d_param_grad(const ConvSpec& spec, const FeatureMap<T>& x, const FeatureMap<T>& dy, std::span<T> dw,
                       std::span<T> db) {
  check_input(spec, x);
  check_weights(spec, dw.size(), spec.bias ? db.size() : 0);
  const int p = spec.padding;
  const auto xp = p > 0 ? pad(x, p, p, p, p) : x;
  correlate(xp, dy, dw, spec.kernel_h, spec.kernel_w, spec.stride, spec.dilation);
  if (spec.bias) accumulate_bias_grad(dy, db);
}

template <typename T>
FeatureMap<T> conv2d_transposed_input_grad(const ConvSpec& spec, std::span<const T> weights, const FeatureMap<T>& dy,
                                           int in_h, int in_w) {
  spec.validate();
  check_weights(spec, weights.size(), spec.bias ? spec.out_channels : 0);
  const auto [oh, ow] = spec.output_size(in_h, in_w);
  if (dy.channels != spec.out_channels || dy.height != oh || dy.width != ow)
    throw ShapeError("conv " + spec.describe() + ": upstream gradient has shape " + dy.shape_string());
  const int p = spec.padding;
  const auto dyp = p > 0 ? pad(dy, p, p, p, p) : dy;
  FeatureMap<T> dx(spec.in_channels, in_h, in_w);
  gather(dyp, weights, static_cast<const T*>(nullptr), dx, spec.kernel_h, spec.kernel_w, spec.stride, 1);
  return dx;
}

template <typename T>
void conv2d_transposed_param_grad(const ConvSpec& spec, const FeatureMap<T>& x, const FeatureMap<T>& dy,
                                  std::span<T> dw, std::span<T> db) {
  check_input(spec, x);
  check_weights(spec, dw.size(), spec.bias ? db.size() : 0);
  const int p = spec.padding;
  const auto dyp = p > 0 ? pad(dy, p, p, p, p) : dy;
  correlate(dyp, x, dw, spec.kernel_h, spec.kernel_w, spec.stride, 1);
  if (spec.bias) accumulate_bias_grad(dy, db);
}

#define HRSAR_INSTANTIATE_CONV(T)                                                                                \
  template FeatureMap<T> conv2d(const FeatureMap<T>&, const ConvSpec&, std::span<const T>, std::span<const T>,     \
                                ConvPath);                                                                       \
  template FeatureMap<T> conv2d_transposed(const FeatureMap<T>&, const ConvSpec&, std::span<const T>,            \
                                           std::span<const T>, ConvPath);                                        \
  template Tensor4<T> conv2d(const Tensor4<T>&, const ConvSpec&, std::span<const T>, std::span<const T>);         \
  template Tensor4<T> conv2d_transposed(const Tensor4<T>&, const ConvSpec&, std::span<const T>,                 \
                                        std::span<const T>);                                                     \
  template FeatureMap<T> conv2d_input_grad(const ConvSpec&, std::span<const T>, const FeatureMap<T>&, int, int,  \
                                           ConvPath);                                                            \
  template void conv2d_param_grad(const ConvSpec&, const FeatureMap<T>&, const FeatureMap<T>&, std::span<T>,     \
                                  std::span<T>);                                                                 \
  template FeatureMap<T> conv2d_transposed_input_grad(const ConvSpec&, std::span<const T>, const FeatureMap<T>&, \
                                                      int, int);                                                 \
  template void conv2d_transposed_param_grad(const ConvSpec&, const FeatureMap<T>&, const FeatureMap<T>&,        \
                                             std::span<T>, std::span<T>);

HRSAR_INSTANTIATE_CONV(float)
HRSAR_INSTANTIATE_CONV(double)

}  // namespace hrsar
