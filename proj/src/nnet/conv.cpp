#include "gjam/nnet/conv.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "gjam/error.hpp"

namespace gjam::nnet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Patch matrix, patch() rows x (n * out_h * out_w) columns.
RowMat im2col(const ConvShape& s, const Tensor& in) {
  const int ho = s.out_h(in.h);
  const int wo = s.out_w(in.w);
  const int cols_per_sample = ho * wo;
  RowMat col(s.patch(), static_cast<Eigen::Index>(in.n) * cols_per_sample);
  for (int ci = 0; ci < s.cin; ++ci) {
    for (int ki = 0; ki < s.kh; ++ki) {
      for (int kj = 0; kj < s.kw; ++kj) {
        double* row = col.row((ci * s.kh + ki) * s.kw + kj).data();
        for (int n = 0; n < in.n; ++n) {
          const double* src = in.sample(n) + static_cast<std::size_t>(ci) * in.plane();
          double* dst = row + static_cast<std::size_t>(n) * cols_per_sample;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * s.stride_h + ki - s.pad_h();
            if (iy < 0 || iy >= in.h) {
              std::fill_n(dst + oy * wo, wo, 0.0);
              continue;
            }
            const double* src_row = src + static_cast<std::size_t>(iy) * in.w;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = std::clamp(ox * s.stride_w + kj - s.pad_w(), 0, in.w - 1);
              dst[oy * wo + ox] = src_row[ix];
            }
          }
        }
      }
    }
  }
  return col;
}

void col2im(const ConvShape& s, const RowMat& col, Tensor& din) {
  const int ho = s.out_h(din.h);
  const int wo = s.out_w(din.w);
  const int cols_per_sample = ho * wo;
  std::fill(din.v.begin(), din.v.end(), 0.0);
  for (int ci = 0; ci < s.cin; ++ci) {
    for (int ki = 0; ki < s.kh; ++ki) {
      for (int kj = 0; kj < s.kw; ++kj) {
        const double* row = col.row((ci * s.kh + ki) * s.kw + kj).data();
        for (int n = 0; n < din.n; ++n) {
          double* dst = din.sample(n) + static_cast<std::size_t>(ci) * din.plane();
          const double* src = row + static_cast<std::size_t>(n) * cols_per_sample;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * s.stride_h + ki - s.pad_h();
            if (iy < 0 || iy >= din.h) continue;
            double* dst_row = dst + static_cast<std::size_t>(iy) * din.w;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = std::clamp(ox * s.stride_w + kj - s.pad_w(), 0, din.w - 1);
              dst_row[ix] += src[oy * wo + ox];
            }
          }
        }
      }
    }
  }
}

void check_input(const ConvShape& s, const Tensor& in) {
  if (in.c != s.cin) throw Error(ErrorCode::ShapeMismatch, "conv input channel count mismatch");
  if (in.h < 1 || in.w < 1 || in.n < 1) throw Error(ErrorCode::ShapeMismatch, "empty conv input");
}

}  // namespace

Conv2d::Conv2d(ConvShape shape) : shape_(shape) {
  const std::size_t wn = static_cast<std::size_t>(shape.cout) * shape.patch();
  weight.assign(wn, 0.0);
  grad_weight.assign(wn, 0.0);
  bias.assign(static_cast<std::size_t>(shape.cout), 0.0);
  grad_bias.assign(static_cast<std::size_t>(shape.cout), 0.0);
  scale.assign(static_cast<std::size_t>(shape.cout), 1.0);
}

Tensor Conv2d::forward(const Tensor& in) const {
  check_input(shape_, in);
  const int ho = shape_.out_h(in.h);
  const int wo = shape_.out_w(in.w);
  const int p = ho * wo;
  const RowMat col = im2col(shape_, in);
  const Eigen::Map<const RowMat> w(weight.data(), shape_.cout, shape_.patch());
  const RowMat z = w * col;
  Tensor out(in.n, shape_.cout, ho, wo);
  for (int n = 0; n < in.n; ++n) {
    double* dst = out.sample(n);
    for (int o = 0; o < shape_.cout; ++o) {
      const double* src = z.row(o).data() + static_cast<std::size_t>(n) * p;
      const double a = scale[static_cast<std::size_t>(o)];
      const double b = bias[static_cast<std::size_t>(o)];
      for (int i = 0; i < p; ++i) dst[o * p + i] = a * src[i] + b;
    }
  }
  return out;
}

void Conv2d::backward(const Tensor& in, const Tensor& dout, Tensor* din) {
  check_input(shape_, in);
  const int ho = shape_.out_h(in.h);
  const int wo = shape_.out_w(in.w);
  const int p = ho * wo;
  if (dout.n != in.n || dout.c != shape_.cout || dout.h != ho || dout.w != wo)
    throw Error(ErrorCode::ShapeMismatch, "conv upstream gradient shape mismatch");

  RowMat dz(shape_.cout, static_cast<Eigen::Index>(in.n) * p);
  for (int o = 0; o < shape_.cout; ++o) {
    const double a = scale[static_cast<std::size_t>(o)];
    double* dst = dz.row(o).data();
    double bsum = 0.0;
    for (int n = 0; n < in.n; ++n) {
      const double* src = dout.sample(n) + static_cast<std::size_t>(o) * p;
      for (int i = 0; i < p; ++i) {
        bsum += src[i];
        dst[static_cast<std::size_t>(n) * p + i] = a * src[i];
      }
    }
    grad_bias[static_cast<std::size_t>(o)] += bsum;
  }
  const RowMat col = im2col(shape_, in);
  Eigen::Map<RowMat> gw(grad_weight.data(), shape_.cout, shape_.patch());
  gw.noalias() += dz * col.transpose();
  if (din != nullptr) {
    const Eigen::Map<const RowMat> w(weight.data(), shape_.cout, shape_.patch());
    const RowMat dcol = w.transpose() * dz;
    *din = Tensor(in.n, in.c, in.h, in.w);
    col2im(shape_, dcol, *din);
  }
}

void Conv2d::calibrate(const Tensor& in) {
  std::fill(scale.begin(), scale.end(), 1.0);
  std::fill(bias.begin(), bias.end(), 0.0);
  const Tensor z = forward(in);
  const double count = static_cast<double>(z.n) * static_cast<double>(z.plane());
  for (int o = 0; o < shape_.cout; ++o) {
    double sum = 0.0;
    double sq = 0.0;
    for (int n = 0; n < z.n; ++n) {
      const double* src = z.sample(n) + static_cast<std::size_t>(o) * z.plane();
      for (std::size_t i = 0; i < z.plane(); ++i) {
        sum += src[i];
        sq += src[i] * src[i];
      }
    }
    const double mean = sum / count;
    const double var = std::max(sq / count - mean * mean, 0.0);
    const double sd = std::sqrt(var);
    const double s = sd > 1e-8 ? 1.0 / sd : 1.0;
    scale[static_cast<std::size_t>(o)] = s;
    bias[static_cast<std::size_t>(o)] = -mean * s;
  }
}

void Conv2d::zero_grad() {
  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
}

Tensor conv2d_reference(const ConvShape& s, const std::vector<double>& weight, const std::vector<double>& bias,
                        const std::vector<double>& scale, const Tensor& in) {
  check_input(s, in);
  const int ho = s.out_h(in.h);
  const int wo = s.out_w(in.w);
  Tensor out(in.n, s.cout, ho, wo);
  for (int n = 0; n < in.n; ++n)
    for (int o = 0; o < s.cout; ++o)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double acc = 0.0;
          for (int ci = 0; ci < s.cin; ++ci)
            for (int ki = 0; ki < s.kh; ++ki)
              for (int kj = 0; kj < s.kw; ++kj) {
                const int iy = oy * s.stride_h + ki - s.pad_h();
                if (iy < 0 || iy >= in.h) continue;
                const int ix = std::clamp(ox * s.stride_w + kj - s.pad_w(), 0, in.w - 1);
                acc += weight[((static_cast<std::size_t>(o) * s.cin + ci) * s.kh + ki) * s.kw + kj] *
                       in.at(n, ci, iy, ix);
              }
          out.at(n, o, oy, ox) = scale[static_cast<std::size_t>(o)] * acc + bias[static_cast<std::size_t>(o)];
        }
  return out;
}

Tensor freq_pool(const Tensor& in, int factor) {
  if (factor < 1 || in.h % factor != 0) throw Error(ErrorCode::ShapeMismatch, "frequency rows not divisible by pool");
  Tensor out(in.n, 2 * in.c, in.h / factor, in.w);
  const double inv = 1.0 / factor;
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c)
      for (int y = 0; y < out.h; ++y) {
        double* mean = &out.at(n, c, y, 0);
        double* peak = &out.at(n, in.c + c, y, 0);
        const double* first = in.sample(n) + (static_cast<std::size_t>(c) * in.h + y * factor) * in.w;
        std::copy(first, first + in.w, peak);
        for (int k = 0; k < factor; ++k) {
          const double* src = first + static_cast<std::size_t>(k) * in.w;
          for (int x = 0; x < in.w; ++x) {
            mean[x] += src[x];
            peak[x] = std::max(peak[x], src[x]);
          }
        }
        for (int x = 0; x < in.w; ++x) mean[x] *= inv;
      }
  return out;
}

}  // namespace gjam::nnet
