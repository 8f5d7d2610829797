#include "drdg/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace drdg::kernels {

ConvGeom ceil_pad_geom(int h, int w, int kh, int kw, int stride, int dil) {
    ConvGeom g;
    g.stride = stride;
    g.dil = dil;
    const int ekh = (kh - 1) * dil + 1;
    const int ekw = (kw - 1) * dil + 1;
    const int oh = (h + stride - 1) / stride;
    const int ow = (w + stride - 1) / stride;
    const int ph = std::max(0, (oh - 1) * stride + ekh - h);
    const int pw = std::max(0, (ow - 1) * stride + ekw - w);
    g.pt = ph / 2;
    g.pb = ph - g.pt;
    g.pl = pw / 2;
    g.pr = pw - g.pl;
    return g;
}

int conv_out_dim(int in, int k, int stride, int dil, int pad_lo, int pad_hi) {
    const int ek = (k - 1) * dil + 1;
    return (in + pad_lo + pad_hi - ek) / stride + 1;
}

namespace {

// Valid ox range such that ix = ox*stride + base lies in [0, limit).
inline void ox_bounds(int base, int stride, int limit, int ow, int& lo, int& hi) {
    // ox*stride + base >= 0  ->  ox >= ceil(-base / stride)
    lo = base >= 0 ? 0 : (-base + stride - 1) / stride;
    // ox*stride + base <= limit-1  ->  ox <= (limit-1-base) / stride
    hi = std::min(ow - 1, base > limit - 1 ? -1 : (limit - 1 - base) / stride);
}

struct AxisBuckets {
    // For each input index, the output taps (index, weight) that reference it.
    std::vector<std::vector<std::pair<int, double>>> taps;
};

struct AxisMap {
    std::vector<int> i0, i1;
    std::vector<double> w0, w1;
};

AxisMap make_axis_map(int in, int out) {
    AxisMap m;
    m.i0.resize(out);
    m.i1.resize(out);
    m.w0.resize(out);
    m.w1.resize(out);
    const double r = double(in) / double(out);
    for (int o = 0; o < out; ++o) {
        double s = (o + 0.5) * r - 0.5;
        if (s < 0) s = 0;
        if (s > in - 1) s = in - 1;
        int i0 = static_cast<int>(std::floor(s));
        if (i0 > in - 1) i0 = in - 1;
        int i1 = std::min(i0 + 1, in - 1);
        double f = s - i0;
        m.i0[o] = i0;
        m.i1[o] = i1;
        m.w0[o] = 1.0 - f;
        m.w1[o] = f;
    }
    return m;
}

AxisBuckets bucket_axis(const AxisMap& m, int in) {
    AxisBuckets b;
    b.taps.resize(in);
    for (size_t o = 0; o < m.i0.size(); ++o) {
        b.taps[m.i0[o]].push_back({static_cast<int>(o), m.w0[o]});
        b.taps[m.i1[o]].push_back({static_cast<int>(o), m.w1[o]});
    }
    return b;
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const ConvGeom& g) {
    const int N = x.shape.n, IC = x.shape.c, H = x.shape.h, W = x.shape.w;
    const int OC = w.shape.n, KH = w.shape.h, KW = w.shape.w;
    if (w.shape.c != IC) throw ShapeError("conv2d: weight in_ch " + std::to_string(w.shape.c) +
                                          " != input channels " + std::to_string(IC));
    const int OH = conv_out_dim(H, KH, g.stride, g.dil, g.pt, g.pb);
    const int OW = conv_out_dim(W, KW, g.stride, g.dil, g.pl, g.pr);
    if (OH <= 0 || OW <= 0) throw ShapeError("conv2d: non-positive output size");
    Tensor out(Shape{N, OC, OH, OW});

    const int64_t items = int64_t(N) * OC * OH;
#pragma omp parallel for schedule(static)
    for (int64_t it = 0; it < items; ++it) {
        const int oy = static_cast<int>(it % OH);
        const int oc = static_cast<int>((it / OH) % OC);
        const int nn = static_cast<int>(it / (int64_t(OH) * OC));
        double* orow = &out.v[((int64_t(nn) * OC + oc) * OH + oy) * OW];
        for (int ic = 0; ic < IC; ++ic) {
            for (int ky = 0; ky < KH; ++ky) {
                const int iy = oy * g.stride - g.pt + ky * g.dil;
                if (iy < 0 || iy >= H) continue;
                const double* xrow = &x.v[((int64_t(nn) * IC + ic) * H + iy) * W];
                const double* wrow = &w.v[((int64_t(oc) * IC + ic) * KH + ky) * KW];
                for (int kx = 0; kx < KW; ++kx) {
                    const double wv = wrow[kx];
                    const int base = kx * g.dil - g.pl;
                    int lo, hi;
                    ox_bounds(base, g.stride, W, OW, lo, hi);
                    const double* xp = xrow + base + int64_t(lo) * g.stride;
                    for (int ox = lo; ox <= hi; ++ox, xp += g.stride) orow[ox] += wv * *xp;
                }
            }
        }
    }
    return out;
}

Tensor conv2d_input_grad(const Tensor& gout, const Tensor& w, const ConvGeom& g, int in_h, int in_w) {
    const int N = gout.shape.n, OC = gout.shape.c, OH = gout.shape.h, OW = gout.shape.w;
    const int IC = w.shape.c, KH = w.shape.h, KW = w.shape.w;
    if (w.shape.n != OC) throw ShapeError("conv2d_input_grad: weight out_ch mismatch");
    Tensor dx(Shape{N, IC, in_h, in_w});

    const int64_t items = int64_t(N) * IC * in_h;
#pragma omp parallel for schedule(static)
    for (int64_t it = 0; it < items; ++it) {
        const int iy = static_cast<int>(it % in_h);
        const int ic = static_cast<int>((it / in_h) % IC);
        const int nn = static_cast<int>(it / (int64_t(in_h) * IC));
        double* row = &dx.v[((int64_t(nn) * IC + ic) * in_h + iy) * in_w];
        for (int ky = 0; ky < KH; ++ky) {
            const int t = iy + g.pt - ky * g.dil;
            if (t < 0 || t % g.stride != 0) continue;
            const int oy = t / g.stride;
            if (oy >= OH) continue;
            for (int oc = 0; oc < OC; ++oc) {
                const double* grow = &gout.v[((int64_t(nn) * OC + oc) * OH + oy) * OW];
                const double* wbase = &w.v[((int64_t(oc) * IC + ic) * KH + ky) * KW];
                for (int kx = 0; kx < KW; ++kx) {
                    const double wv = wbase[kx];
                    const int base = kx * g.dil - g.pl;
                    int lo, hi;
                    ox_bounds(base, g.stride, in_w, OW, lo, hi);
                    double* rp = row + base + int64_t(lo) * g.stride;
                    for (int ox = lo; ox <= hi; ++ox, rp += g.stride) *rp += wv * grow[ox];
                }
            }
        }
    }
    return dx;
}

Tensor conv2d_weight_grad(const Tensor& gout, const Tensor& x, const ConvGeom& g, Shape wshape) {
    const int N = gout.shape.n, OC = gout.shape.c, OH = gout.shape.h, OW = gout.shape.w;
    const int IC = x.shape.c, H = x.shape.h, W = x.shape.w;
    const int KH = wshape.h, KW = wshape.w;
    if (wshape.n != OC || wshape.c != IC) throw ShapeError("conv2d_weight_grad: shape mismatch");
    Tensor dw(wshape);

    const int64_t items = int64_t(OC) * IC * KH * KW;
#pragma omp parallel for schedule(static)
    for (int64_t it = 0; it < items; ++it) {
        const int kx = static_cast<int>(it % KW);
        const int ky = static_cast<int>((it / KW) % KH);
        const int ic = static_cast<int>((it / (int64_t(KW) * KH)) % IC);
        const int oc = static_cast<int>(it / (int64_t(KW) * KH * IC));
        double acc = 0.0;
        const int base = kx * g.dil - g.pl;
        int lo, hi;
        ox_bounds(base, g.stride, W, OW, lo, hi);
        for (int nn = 0; nn < N; ++nn) {
            for (int oy = 0; oy < OH; ++oy) {
                const int iy = oy * g.stride - g.pt + ky * g.dil;
                if (iy < 0 || iy >= H) continue;
                const double* grow = &gout.v[((int64_t(nn) * OC + oc) * OH + oy) * OW];
                const double* xrow = &x.v[((int64_t(nn) * IC + ic) * H + iy) * W];
                const double* xp = xrow + base + int64_t(lo) * g.stride;
                for (int ox = lo; ox <= hi; ++ox, xp += g.stride) acc += grow[ox] * *xp;
            }
        }
        dw.v[it] = acc;
    }
    return dw;
}

Tensor resize_bilinear(const Tensor& x, int oh, int ow) {
    const int N = x.shape.n, C = x.shape.c, H = x.shape.h, W = x.shape.w;
    if (oh <= 0 || ow <= 0) throw ShapeError("resize_bilinear: non-positive target size");
    if (oh == H && ow == W) return x;
    Tensor out(Shape{N, C, oh, ow});
    const AxisMap ry = make_axis_map(H, oh);
    const AxisMap rx = make_axis_map(W, ow);

    const int64_t items = int64_t(N) * C * oh;
#pragma omp parallel for schedule(static)
    for (int64_t it = 0; it < items; ++it) {
        const int oy = static_cast<int>(it % oh);
        const int64_t nc = it / oh;
        const double* x0 = &x.v[(nc * H + ry.i0[oy]) * W];
        const double* x1 = &x.v[(nc * H + ry.i1[oy]) * W];
        double* orow = &out.v[(nc * oh + oy) * ow];
        const double wy0 = ry.w0[oy], wy1 = ry.w1[oy];
        for (int ox = 0; ox < ow; ++ox) {
            const int a = rx.i0[ox], b = rx.i1[ox];
            const double wx0 = rx.w0[ox], wx1 = rx.w1[ox];
            orow[ox] = wy0 * (wx0 * x0[a] + wx1 * x0[b]) + wy1 * (wx0 * x1[a] + wx1 * x1[b]);
        }
    }
    return out;
}

Tensor resize_bilinear_adjoint(const Tensor& g, int ih, int iw) {
    const int N = g.shape.n, C = g.shape.c, OH = g.shape.h, OW = g.shape.w;
    if (ih == OH && iw == OW) return g;
    Tensor dx(Shape{N, C, ih, iw});
    const AxisBuckets by = bucket_axis(make_axis_map(ih, OH), ih);
    const AxisBuckets bx = bucket_axis(make_axis_map(iw, OW), iw);

    const int64_t items = int64_t(N) * C * ih;
#pragma omp parallel for schedule(static)
    for (int64_t it = 0; it < items; ++it) {
        const int iy = static_cast<int>(it % ih);
        const int64_t nc = it / ih;
        double* row = &dx.v[(nc * ih + iy) * iw];
        for (const auto& [oy, wy] : by.taps[iy]) {
            const double* grow = &g.v[(nc * OH + oy) * OW];
            for (int ix = 0; ix < iw; ++ix) {
                double acc = 0.0;
                for (const auto& [ox, wx] : bx.taps[ix]) acc += wx * grow[ox];
                row[ix] += wy * acc;
            }
        }
    }
    return dx;
}

std::vector<int> resize_nearest(const std::vector<int>& x, int h, int w, int oh, int ow) {
    std::vector<int> out(static_cast<size_t>(oh) * ow);
    const double ry = double(h) / oh, rx = double(w) / ow;
    for (int oy = 0; oy < oh; ++oy) {
        int iy = std::min(h - 1, std::max(0, static_cast<int>(std::floor((oy + 0.5) * ry))));
        for (int ox = 0; ox < ow; ++ox) {
            int ix = std::min(w - 1, std::max(0, static_cast<int>(std::floor((ox + 0.5) * rx))));
            out[static_cast<size_t>(oy) * ow + ox] = x[static_cast<size_t>(iy) * w + ix];
        }
    }
    return out;
}

namespace serial {

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const ConvGeom& g) {
    const int N = x.shape.n, IC = x.shape.c, H = x.shape.h, W = x.shape.w;
    const int OC = w.shape.n, KH = w.shape.h, KW = w.shape.w;
    const int OH = conv_out_dim(H, KH, g.stride, g.dil, g.pt, g.pb);
    const int OW = conv_out_dim(W, KW, g.stride, g.dil, g.pl, g.pr);
    Tensor out(Shape{N, OC, OH, OW});
    for (int nn = 0; nn < N; ++nn)
        for (int oc = 0; oc < OC; ++oc)
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    double acc = 0.0;
                    for (int ic = 0; ic < IC; ++ic)
                        for (int ky = 0; ky < KH; ++ky)
                            for (int kx = 0; kx < KW; ++kx) {
                                const int iy = oy * g.stride - g.pt + ky * g.dil;
                                const int ix = ox * g.stride - g.pl + kx * g.dil;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                acc += x.at(nn, ic, iy, ix) * w.at(oc, ic, ky, kx);
                            }
                    out.at(nn, oc, oy, ox) = acc;
                }
    return out;
}

Tensor conv2d_input_grad(const Tensor& gout, const Tensor& w, const ConvGeom& g, int in_h, int in_w) {
    const int N = gout.shape.n, OC = gout.shape.c, OH = gout.shape.h, OW = gout.shape.w;
    const int IC = w.shape.c, KH = w.shape.h, KW = w.shape.w;
    Tensor dx(Shape{N, IC, in_h, in_w});
    for (int nn = 0; nn < N; ++nn)
        for (int oc = 0; oc < OC; ++oc)
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    const double gv = gout.at(nn, oc, oy, ox);
                    for (int ic = 0; ic < IC; ++ic)
                        for (int ky = 0; ky < KH; ++ky)
                            for (int kx = 0; kx < KW; ++kx) {
                                const int iy = oy * g.stride - g.pt + ky * g.dil;
                                const int ix = ox * g.stride - g.pl + kx * g.dil;
                                if (iy < 0 || iy >= in_h || ix < 0 || ix >= in_w) continue;
                                dx.at(nn, ic, iy, ix) += gv * w.at(oc, ic, ky, kx);
                            }
                }
    return dx;
}

Tensor conv2d_weight_grad(const Tensor& gout, const Tensor& x, const ConvGeom& g, Shape wshape) {
    const int N = gout.shape.n, OC = gout.shape.c, OH = gout.shape.h, OW = gout.shape.w;
    const int IC = x.shape.c, H = x.shape.h, W = x.shape.w;
    Tensor dw(wshape);
    for (int nn = 0; nn < N; ++nn)
        for (int oc = 0; oc < OC; ++oc)
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    const double gv = gout.at(nn, oc, oy, ox);
                    for (int ic = 0; ic < IC; ++ic)
                        for (int ky = 0; ky < wshape.h; ++ky)
                            for (int kx = 0; kx < wshape.w; ++kx) {
                                const int iy = oy * g.stride - g.pt + ky * g.dil;
                                const int ix = ox * g.stride - g.pl + kx * g.dil;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                dw.at(oc, ic, ky, kx) += gv * x.at(nn, ic, iy, ix);
                            }
                }
    return dw;
}

Tensor resize_bilinear(const Tensor& x, int oh, int ow) {
    const int N = x.shape.n, C = x.shape.c, H = x.shape.h, W = x.shape.w;
    if (oh == H && ow == W) return x;
    Tensor out(Shape{N, C, oh, ow});
    const double ry = double(H) / oh, rx = double(W) / ow;
    for (int nn = 0; nn < N; ++nn)
        for (int cc = 0; cc < C; ++cc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double sy = std::clamp((oy + 0.5) * ry - 0.5, 0.0, double(H - 1));
                    double sx = std::clamp((ox + 0.5) * rx - 0.5, 0.0, double(W - 1));
                    int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
                    int y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
                    double fy = sy - y0, fx = sx - x0;
                    out.at(nn, cc, oy, ox) =
                        (1 - fy) * ((1 - fx) * x.at(nn, cc, y0, x0) + fx * x.at(nn, cc, y0, x1)) +
                        fy * ((1 - fx) * x.at(nn, cc, y1, x0) + fx * x.at(nn, cc, y1, x1));
                }
    return out;
}

Tensor resize_bilinear_adjoint(const Tensor& g, int ih, int iw) {
    const int N = g.shape.n, C = g.shape.c, OH = g.shape.h, OW = g.shape.w;
    if (ih == OH && iw == OW) return g;
    Tensor dx(Shape{N, C, ih, iw});
    const double ry = double(ih) / OH, rx = double(iw) / OW;
    for (int nn = 0; nn < N; ++nn)
        for (int cc = 0; cc < C; ++cc)
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    double sy = std::clamp((oy + 0.5) * ry - 0.5, 0.0, double(ih - 1));
                    double sx = std::clamp((ox + 0.5) * rx - 0.5, 0.0, double(iw - 1));
                    int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
                    int y1 = std::min(y0 + 1, ih - 1), x1 = std::min(x0 + 1, iw - 1);
                    double fy = sy - y0, fx = sx - x0;
                    const double gv = g.at(nn, cc, oy, ox);
                    dx.at(nn, cc, y0, x0) += (1 - fy) * (1 - fx) * gv;
                    dx.at(nn, cc, y0, x1) += (1 - fy) * fx * gv;
                    dx.at(nn, cc, y1, x0) += fy * (1 - fx) * gv;
                    dx.at(nn, cc, y1, x1) += fy * fx * gv;
                }
    return dx;
}

}  // namespace serial

}  // namespace drdg::kernels
