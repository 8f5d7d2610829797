#pragma once

#include "drdg/tensor.hpp"

// Data-parallel inner loops of the project. Every kernel here is written so
// that each output element accumulates its reduction serially; results are
// bit-identical for any OMP_NUM_THREADS, including 1. The drdg::kernels::serial
// namespace keeps plain single-threaded reference versions used by the tests
// and the kernel benchmark.

namespace drdg::kernels {

struct ConvGeom {
    int stride = 1;
    int dil = 1;
    int pt = 0, pl = 0, pb = 0, pr = 0;  // explicit, possibly asymmetric padding
};

// Padding that yields ceil(extent/stride) outputs (extra pad goes bottom/right),
// so odd intermediate sizes are legal anywhere in the encoder stack.
ConvGeom ceil_pad_geom(int h, int w, int kh, int kw, int stride, int dil = 1);

int conv_out_dim(int in, int k, int stride, int dil, int pad_lo, int pad_hi);

// out[n,oc,oy,ox] = sum_{ic,ky,kx} x[n,ic,oy*s-pt+ky*d, ox*s-pl+kx*d] * w[oc,ic,ky,kx]
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const ConvGeom& g);
// Adjoint w.r.t. x ("transposed convolution"); in_h/in_w select the x geometry.
Tensor conv2d_input_grad(const Tensor& gout, const Tensor& w, const ConvGeom& g, int in_h, int in_w);
// Adjoint w.r.t. w.
Tensor conv2d_weight_grad(const Tensor& gout, const Tensor& x, const ConvGeom& g, Shape wshape);

// Channel-independent bilinear resize, half-pixel-center convention.
// Same-size calls are exact copies.
Tensor resize_bilinear(const Tensor& x, int oh, int ow);
Tensor resize_bilinear_adjoint(const Tensor& g, int ih, int iw);

// Nearest-neighbor resize for categorical rasters.
std::vector<int> resize_nearest(const std::vector<int>& x, int h, int w, int oh, int ow);

namespace serial {
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const ConvGeom& g);
Tensor conv2d_input_grad(const Tensor& gout, const Tensor& w, const ConvGeom& g, int in_h, int in_w);
Tensor conv2d_weight_grad(const Tensor& gout, const Tensor& x, const ConvGeom& g, Shape wshape);
Tensor resize_bilinear(const Tensor& x, int oh, int ow);
Tensor resize_bilinear_adjoint(const Tensor& g, int ih, int iw);
}  // namespace serial

}  // namespace drdg::kernels
