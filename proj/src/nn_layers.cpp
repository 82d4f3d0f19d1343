#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <ostream>

#include "amc/gemm.hpp"
#include "amc/nn.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace amc {

namespace {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

int thread_id() {
#ifdef _OPENMP
    return omp_get_thread_num();
#else
    return 0;
#endif
}

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void he_uniform_fill(Tensor& w, std::size_t fan_in, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : w.data) v = rng.uniform(-limit, limit);
}

void check_batch_shape(const Tensor& t, Shape3 s, const char* who) {
    if (t.shape[1] != s.c || t.shape[2] != s.h || t.shape[3] != s.w)
        throw std::invalid_argument(std::string(who) + ": batch shape mismatch");
}

class Conv2d final : public Layer {
  public:
    Conv2d(int out_channels, int kh, int kw, int stride, int pad)
        : m_(out_channels), kh_(kh), kw_(kw), stride_(stride), pad_(pad) {
        if (out_channels < 1 || kh < 1 || kw < 1 || stride < 1 || pad < 0)
            throw std::invalid_argument("conv2d: bad hyperparameters");
    }

    LayerKind kind() const override { return LayerKind::Conv2d; }

    Shape3 attach(Shape3 in, Rng& rng) override {
        in_ = in;
        oh_ = (in.h + 2 * pad_ - kh_) / stride_ + 1;
        ow_ = (in.w + 2 * pad_ - kw_) / stride_ + 1;
        if (in.h + 2 * pad_ < kh_ || in.w + 2 * pad_ < kw_ || oh_ < 1 || ow_ < 1)
            throw std::invalid_argument("conv2d: kernel larger than padded input");
        k_ = in.c * kh_ * kw_;
        weight_ = Tensor(m_, in.c, kh_, kw_);
        bias_ = Tensor(m_, 1, 1, 1);
        he_uniform_fill(weight_, static_cast<std::size_t>(k_), rng);
        return {m_, oh_, ow_};
    }

    void forward(const Tensor& in, Tensor& out, bool, Rng&) override {
        check_batch_shape(in, in_, "conv2d");
        const int batch = in.shape[0];
        out.reset(batch, m_, oh_, ow_);
        const int spatial = oh_ * ow_;
        const bool fast = fast_path();
        const bool rows = fast && row_tiled();
        std::vector<std::int32_t> fwd_off;
        std::vector<double> wt;
        auto& colT_scratch = colT_scratch_;
        auto& outT_scratch = outT_scratch_;
        if (rows) {
            fwd_off = forward_offsets();
        } else if (fast) {
            wt = transposed_weights();
            grow(colT_scratch, static_cast<std::size_t>(spatial) * k_);
            grow(outT_scratch, static_cast<std::size_t>(spatial) * m_);
        } else {
            ensure_scratch();
        }
#pragma omp parallel for schedule(static)
        for (int b = 0; b < batch; ++b) {
            if (rows) {
                forward_direct(in.item(b), out.item(b), fwd_off);  // bias folded in
                continue;
            }
            if (fast) {
                const int tid = thread_id();
                forward_small(in.item(b), out.item(b), wt, colT_scratch[tid].data(),
                              outT_scratch[tid].data());
            } else {
                double* col = col_scratch_[thread_id()].data();
                im2col(in.item(b), col);
                gemm(out.item(b), weight_.data.data(), col, m_, k_, spatial);
            }
            double* o = out.item(b);
            for (int c = 0; c < m_; ++c) {
                const double bv = bias_.data[c];
                for (int s = 0; s < spatial; ++s) o[static_cast<std::size_t>(c) * spatial + s] += bv;
            }
        }
    }

    void backward(const Tensor& in, const Tensor&, const Tensor& dout, Tensor& din) override {
        const int batch = in.shape[0];
        const int spatial = oh_ * ow_;
        weight_.ensure_grad();
        bias_.ensure_grad();
        din.reset(batch, in_.c, in_.h, in_.w);

        // Per-item partial dW/db so the reduction order is fixed regardless
        // of thread count.
        std::vector<double> dw_part(static_cast<std::size_t>(batch) * m_ * k_);
        std::vector<double> db_part(static_cast<std::size_t>(batch) * m_);

        const bool fast = fast_path();
        const bool rows = fast && row_tiled();
        std::vector<double> wt;
        std::vector<std::int32_t> fwd_off, full_off;
        std::vector<double> wflip;
        auto& pad_scratch = pad_scratch_;
        auto& tr_scratch = tr_scratch_;
        auto& dcolT_scratch = colT_scratch_;
        if (fast) {
            fwd_off = forward_offsets();
            grow(tr_scratch, static_cast<std::size_t>(m_) * spatial);
            if (rows) {
                full_off = full_conv_offsets();
                wflip = flipped_weights();
                const std::size_t pad_size = static_cast<std::size_t>(m_) *
                                             (oh_ + 2 * (kh_ - 1)) * (ow_ + 2 * (kw_ - 1));
                grow(pad_scratch, pad_size);  // borders stay zero across items
            } else {
                grow(dcolT_scratch, static_cast<std::size_t>(spatial) * k_);
            }
        } else {
            ensure_scratch();
            wt = transposed_weights();
        }

#pragma omp parallel for schedule(static)
        for (int b = 0; b < batch; ++b) {
            double* dw = dw_part.data() + static_cast<std::size_t>(b) * m_ * k_;
            if (fast) {
                const int tid = thread_id();
                double* doutT = tr_scratch[tid].data();
                const double* d = dout.item(b);
                for (int m = 0; m < m_; ++m)
                    for (int p = 0; p < spatial; ++p)
                        doutT[static_cast<std::size_t>(p) * m_ + m] =
                            d[static_cast<std::size_t>(m) * spatial + p];
                grad_weights_direct(in.item(b), doutT, dw, fwd_off);
                if (rows) {
                    din_rows(d, din.item(b), full_off, wflip.data(), pad_scratch[tid].data());
                } else {
                    din_small(doutT, din.item(b), dcolT_scratch[tid].data());
                }
            } else {
                const int tid = thread_id();
                double* col = col_scratch_[tid].data();
                double* dcol = dcol_scratch_[tid].data();
                im2col(in.item(b), col);
                gemm_abt(dw, dout.item(b), col, m_, k_, spatial);
                gemm(dcol, wt.data(), dout.item(b), k_, m_, spatial);
                col2im(dcol, din.item(b));
            }
            const double* d = dout.item(b);
            for (int c = 0; c < m_; ++c) {
                double s = 0.0;
                for (int sp = 0; sp < spatial; ++sp) s += d[static_cast<std::size_t>(c) * spatial + sp];
                db_part[static_cast<std::size_t>(b) * m_ + c] = s;
            }
        }

        for (int b = 0; b < batch; ++b) {
            const double* dw = dw_part.data() + static_cast<std::size_t>(b) * m_ * k_;
            for (std::size_t i = 0; i < weight_.grad.size(); ++i) weight_.grad[i] += dw[i];
            const double* db = db_part.data() + static_cast<std::size_t>(b) * m_;
            for (int c = 0; c < m_; ++c) bias_.grad[c] += db[c];
        }
    }

    std::vector<Tensor*> params() override { return {&weight_, &bias_}; }

    void save_config(std::ostream& out) const override {
        write_u32(out, static_cast<std::uint32_t>(m_));
        write_u32(out, static_cast<std::uint32_t>(kh_));
        write_u32(out, static_cast<std::uint32_t>(kw_));
        write_u32(out, static_cast<std::uint32_t>(stride_));
        write_u32(out, static_cast<std::uint32_t>(pad_));
    }

  private:
    static void grow(std::vector<std::vector<double>>& scratch, std::size_t need) {
        if (scratch.empty()) scratch.resize(max_threads());
        for (auto& v : scratch)
            if (v.size() < need) v.assign(need, 0.0);
    }

    void ensure_scratch() {
        const std::size_t need = static_cast<std::size_t>(k_) * oh_ * ow_;
        if (col_scratch_.empty()) {
            col_scratch_.resize(max_threads());
            dcol_scratch_.resize(max_threads());
        }
        for (auto& v : col_scratch_)
            if (v.size() < need) v.resize(need);
        for (auto& v : dcol_scratch_)
            if (v.size() < need) v.resize(need);
    }

    bool fast_path() const { return stride_ == 1 && pad_ == 0; }

    // Register-tiled kernel over kernel taps: for one output row and a
    // 6x32 (channels x columns) tile, accumulators stay in registers while
    // k walks the taps; the input row pointer per tap comes from a
    // precomputed offset table, so no col matrix is ever built. Both the
    // forward pass and (with padded upstream and flipped weights) the
    // input gradient use this shape.
    struct TapDims {
        int chans_out, k, oh, ow;     // output planes, taps, output size
        int in_w;                     // input row stride
    };

    // kept out of line: inlining fuses the surrounding loops and spills
    // the accumulator registers
    template <int NR>
    __attribute__((noinline)) static void tile6(double* out, const double* base,
                                                const double* wmat,
                      const std::vector<std::int32_t>& off, int k, int m0, int n0,
                      std::size_t spatial, int oy, int ow, const double* bias) {
        constexpr int MR = 6;
        double acc[MR][NR];
        for (int mi = 0; mi < MR; ++mi) {
            const double b = bias ? bias[m0 + mi] : 0.0;
#pragma omp simd
            for (int x = 0; x < NR; ++x) acc[mi][x] = b;
        }
        for (int p = 0; p < k; ++p) {
            const double* __restrict brow = base + off[p] + n0;
            for (int mi = 0; mi < MR; ++mi) {
                const double a = wmat[static_cast<std::size_t>(m0 + mi) * k + p];
#pragma omp simd
                for (int x = 0; x < NR; ++x) acc[mi][x] += a * brow[x];
            }
        }
        for (int mi = 0; mi < MR; ++mi) {
            double* dst = out + static_cast<std::size_t>(m0 + mi) * spatial +
                          static_cast<std::size_t>(oy) * ow + n0;
#pragma omp simd
            for (int x = 0; x < NR; ++x) dst[x] = acc[mi][x];
        }
    }

    // Fixed-width register tiles; the final column/channel blocks overlap
    // earlier ones instead of running a variable-width kernel (pure
    // assignment, so recomputing a few elements is harmless).
    static void taps_rows(double* out, const double* in, const double* wmat,
                          const std::vector<std::int32_t>& off, const TapDims& d,
                          const double* bias = nullptr) {
        constexpr int MR = 6;
        const std::size_t spatial = static_cast<std::size_t>(d.oh) * d.ow;
        if (d.chans_out < MR || d.ow < 8) {
            taps_rows_generic(out, in, wmat, off, d, bias);
            return;
        }
        std::vector<int> mstarts;
        for (int m0 = 0; m0 + MR <= d.chans_out; m0 += MR) mstarts.push_back(m0);
        if (d.chans_out % MR != 0) mstarts.push_back(d.chans_out - MR);
        for (int oy = 0; oy < d.oh; ++oy) {
            const double* base = in + static_cast<std::size_t>(oy) * d.in_w;
            for (int m0 : mstarts) {
                if (d.ow >= 32) {
                    int n0 = 0;
                    for (; n0 + 32 <= d.ow; n0 += 32)
                        tile6<32>(out, base, wmat, off, d.k, m0, n0, spatial, oy, d.ow, bias);
                    if (n0 < d.ow)
                        tile6<32>(out, base, wmat, off, d.k, m0, d.ow - 32, spatial, oy, d.ow,
                                  bias);
                } else if (d.ow >= 16) {
                    tile6<16>(out, base, wmat, off, d.k, m0, 0, spatial, oy, d.ow, bias);
                    if (d.ow > 16)
                        tile6<16>(out, base, wmat, off, d.k, m0, d.ow - 16, spatial, oy, d.ow,
                                  bias);
                } else {
                    tile6<8>(out, base, wmat, off, d.k, m0, 0, spatial, oy, d.ow, bias);
                    if (d.ow > 8)
                        tile6<8>(out, base, wmat, off, d.k, m0, d.ow - 8, spatial, oy, d.ow,
                                 bias);
                }
            }
        }
    }

    static void taps_rows_generic(double* out, const double* in, const double* wmat,
                                  const std::vector<std::int32_t>& off, const TapDims& d,
                                  const double* bias) {
        const std::size_t spatial = static_cast<std::size_t>(d.oh) * d.ow;
        std::vector<double> acc(static_cast<std::size_t>(d.ow));
        for (int oy = 0; oy < d.oh; ++oy) {
            const double* base = in + static_cast<std::size_t>(oy) * d.in_w;
            for (int m = 0; m < d.chans_out; ++m) {
                std::fill(acc.begin(), acc.end(), bias ? bias[m] : 0.0);
                for (int p = 0; p < d.k; ++p) {
                    const double* __restrict brow = base + off[p];
                    const double a = wmat[static_cast<std::size_t>(m) * d.k + p];
#pragma omp simd
                    for (int x = 0; x < d.ow; ++x) acc[x] += a * brow[x];
                }
                double* dst = out + static_cast<std::size_t>(m) * spatial +
                              static_cast<std::size_t>(oy) * d.ow;
                for (int x = 0; x < d.ow; ++x) dst[x] = acc[x];
            }
        }
    }

    // Small output maps (narrow rows) run as a transposed gemm instead:
    // out^T(spatial x M) = colT(spatial x K) * W^T(K x M). The W^T panel
    // stays cache-resident, colT streams once.
    bool row_tiled() const { return ow_ >= 16; }

    void im2colT(const double* in, double* colT) const {
        for (int oy = 0; oy < oh_; ++oy) {
            for (int ox = 0; ox < ow_; ++ox) {
                double* row = colT + (static_cast<std::size_t>(oy) * ow_ + ox) * k_;
                for (int c = 0; c < in_.c; ++c) {
                    const double* plane = in + static_cast<std::size_t>(c) * in_.h * in_.w;
                    for (int ki = 0; ki < kh_; ++ki) {
                        const double* src = plane + static_cast<std::size_t>(oy + ki) * in_.w + ox;
                        for (int kj = 0; kj < kw_; ++kj) row[(c * kh_ + ki) * kw_ + kj] = src[kj];
                    }
                }
            }
        }
    }

    void forward_small(const double* in, double* out, const std::vector<double>& wt,
                       double* colT, double* outT) const {
        const int spatial = oh_ * ow_;
        im2colT(in, colT);
        gemm(outT, colT, wt.data(), spatial, k_, m_);
        for (int m = 0; m < m_; ++m)
            for (int p = 0; p < spatial; ++p)
                out[static_cast<std::size_t>(m) * spatial + p] =
                    outT[static_cast<std::size_t>(p) * m_ + m];
    }

    void din_small(const double* doutT, double* din, double* dcolT) const {
        const int spatial = oh_ * ow_;
        gemm(dcolT, doutT, weight_.data.data(), spatial, m_, k_);
        std::fill(din, din + static_cast<std::size_t>(in_.c) * in_.h * in_.w, 0.0);
        for (int oy = 0; oy < oh_; ++oy) {
            for (int ox = 0; ox < ow_; ++ox) {
                const double* row = dcolT + (static_cast<std::size_t>(oy) * ow_ + ox) * k_;
                for (int c = 0; c < in_.c; ++c) {
                    double* plane = din + static_cast<std::size_t>(c) * in_.h * in_.w;
                    for (int ki = 0; ki < kh_; ++ki) {
                        double* dst = plane + static_cast<std::size_t>(oy + ki) * in_.w + ox;
                        for (int kj = 0; kj < kw_; ++kj) dst[kj] += row[(c * kh_ + ki) * kw_ + kj];
                    }
                }
            }
        }
    }

    // tap offsets for the forward pass: off[k] = c*H*W + ki*W + kj
    std::vector<std::int32_t> forward_offsets() const {
        std::vector<std::int32_t> off(static_cast<std::size_t>(k_));
        int k = 0;
        for (int c = 0; c < in_.c; ++c)
            for (int ki = 0; ki < kh_; ++ki)
                for (int kj = 0; kj < kw_; ++kj)
                    off[k++] = c * in_.h * in_.w + ki * in_.w + kj;
        return off;
    }

    void forward_direct(const double* in, double* out, const std::vector<std::int32_t>& off) const {
        taps_rows(out, in, weight_.data.data(), off, {m_, k_, oh_, ow_, in_.w},
                  bias_.data.data());
    }

    // dW^T tile: k walks the output pixels; per tap row the input element
    // comes from the same offset table plus an incrementally maintained
    // row offset, and the B rows are the transposed upstream.
    template <int M>
    void grad_weights_tiled(const double* in, const double* doutT, double* dw,
                            const std::vector<std::int32_t>& off) const {
        constexpr int KR = 6;
        const int spatial = oh_ * ow_;
        for (int k0 = 0; k0 < k_; k0 += KR) {
            const int kr = std::min(KR, k_ - k0);
            double acc[KR][M] = {};
            int ox = 0, rowoff = 0, oy = 0;
            if (kr == KR) {
                for (int p = 0; p < spatial; ++p) {
                    const double* __restrict brow = doutT + static_cast<std::size_t>(p) * M;
                    for (int kk = 0; kk < KR; ++kk) {
                        const double a = in[off[k0 + kk] + rowoff];
#pragma omp simd
                        for (int m = 0; m < M; ++m) acc[kk][m] += a * brow[m];
                    }
                    ++ox;
                    ++rowoff;
                    if (ox == ow_) {
                        ox = 0;
                        ++oy;
                        rowoff = oy * in_.w;
                    }
                }
            } else {
                for (int p = 0; p < spatial; ++p) {
                    const double* __restrict brow = doutT + static_cast<std::size_t>(p) * M;
                    for (int kk = 0; kk < kr; ++kk) {
                        const double a = in[off[k0 + kk] + rowoff];
#pragma omp simd
                        for (int m = 0; m < M; ++m) acc[kk][m] += a * brow[m];
                    }
                    ++ox;
                    ++rowoff;
                    if (ox == ow_) {
                        ox = 0;
                        ++oy;
                        rowoff = oy * in_.w;
                    }
                }
            }
            for (int kk = 0; kk < kr; ++kk)
                for (int m = 0; m < M; ++m)
                    dw[static_cast<std::size_t>(m) * k_ + k0 + kk] += acc[kk][m];
        }
    }

    void grad_weights_generic(const double* in, const double* doutT, double* dw,
                              const std::vector<std::int32_t>& off) const {
        const int spatial = oh_ * ow_;
        for (int k0 = 0; k0 < k_; ++k0) {
            int ox = 0, rowoff = 0, oy = 0;
            for (int p = 0; p < spatial; ++p) {
                const double a = in[off[k0] + rowoff];
                const double* __restrict brow = doutT + static_cast<std::size_t>(p) * m_;
                for (int m = 0; m < m_; ++m)
                    dw[static_cast<std::size_t>(m) * k_ + k0] += a * brow[m];
                ++ox;
                ++rowoff;
                if (ox == ow_) {
                    ox = 0;
                    ++oy;
                    rowoff = oy * in_.w;
                }
            }
        }
    }

    void grad_weights_direct(const double* in, const double* doutT, double* dw,
                             const std::vector<std::int32_t>& off) const {
        // register tiles need a compile-time channel count
        switch (m_) {
            case 16: grad_weights_tiled<16>(in, doutT, dw, off); break;
            case 32: grad_weights_tiled<32>(in, doutT, dw, off); break;
            default: grad_weights_generic(in, doutT, dw, off); break;
        }
    }

    // input gradient as a full correlation over the padded upstream
    void din_rows(const double* dout, double* din, const std::vector<std::int32_t>& full_off,
                  const double* wflip, double* dout_pad) const {
        const int spatial = oh_ * ow_;
        const int ph = oh_ + 2 * (kh_ - 1);
        const int pw = ow_ + 2 * (kw_ - 1);
        for (int m = 0; m < m_; ++m)
            for (int oy = 0; oy < oh_; ++oy)
                std::copy(dout + static_cast<std::size_t>(m) * spatial +
                              static_cast<std::size_t>(oy) * ow_,
                          dout + static_cast<std::size_t>(m) * spatial +
                              static_cast<std::size_t>(oy) * ow_ + ow_,
                          dout_pad + (static_cast<std::size_t>(m) * ph + oy + kh_ - 1) * pw +
                              kw_ - 1);
        taps_rows(din, dout_pad, wflip, full_off, {in_.c, m_ * kh_ * kw_, in_.h, in_.w, pw});
    }

    std::vector<double> transposed_weights() const {
        std::vector<double> wt(static_cast<std::size_t>(k_) * m_);
        for (int c = 0; c < m_; ++c)
            for (int p = 0; p < k_; ++p)
                wt[static_cast<std::size_t>(p) * m_ + c] =
                    weight_.data[static_cast<std::size_t>(c) * k_ + p];
        return wt;
    }

    // offsets and flipped weights for the input-gradient correlation
    std::vector<std::int32_t> full_conv_offsets() const {
        const int ph = oh_ + 2 * (kh_ - 1);
        const int pw = ow_ + 2 * (kw_ - 1);
        std::vector<std::int32_t> off(static_cast<std::size_t>(m_) * kh_ * kw_);
        int k = 0;
        for (int m = 0; m < m_; ++m)
            for (int ki = 0; ki < kh_; ++ki)
                for (int kj = 0; kj < kw_; ++kj) off[k++] = m * ph * pw + ki * pw + kj;
        return off;
    }

    std::vector<double> flipped_weights() const {
        std::vector<double> wflip(weight_.data.size());
        for (int c = 0; c < in_.c; ++c)
            for (int m = 0; m < m_; ++m)
                for (int ki = 0; ki < kh_; ++ki)
                    for (int kj = 0; kj < kw_; ++kj)
                        wflip[((static_cast<std::size_t>(c) * m_ + m) * kh_ + ki) * kw_ + kj] =
                            weight_.data[((static_cast<std::size_t>(m) * in_.c + c) * kh_ +
                                          kh_ - 1 - ki) *
                                             kw_ +
                                         kw_ - 1 - kj];
        return wflip;
    }

    void im2col(const double* in, double* col) const {
        const int spatial = oh_ * ow_;
        for (int c = 0; c < in_.c; ++c) {
            const double* plane = in + static_cast<std::size_t>(c) * in_.h * in_.w;
            for (int ki = 0; ki < kh_; ++ki) {
                for (int kj = 0; kj < kw_; ++kj) {
                    double* row =
                        col + static_cast<std::size_t>((c * kh_ + ki) * kw_ + kj) * spatial;
                    for (int oy = 0; oy < oh_; ++oy) {
                        const int iy = oy * stride_ + ki - pad_;
                        double* dst = row + static_cast<std::size_t>(oy) * ow_;
                        if (iy < 0 || iy >= in_.h) {
                            std::fill(dst, dst + ow_, 0.0);
                            continue;
                        }
                        const double* src = plane + static_cast<std::size_t>(iy) * in_.w;
                        for (int ox = 0; ox < ow_; ++ox) {
                            const int ix = ox * stride_ + kj - pad_;
                            dst[ox] = (ix >= 0 && ix < in_.w) ? src[ix] : 0.0;
                        }
                    }
                }
            }
        }
    }

    void col2im(const double* col, double* din) const {
        const int spatial = oh_ * ow_;
        std::fill(din, din + static_cast<std::size_t>(in_.c) * in_.h * in_.w, 0.0);
        for (int c = 0; c < in_.c; ++c) {
            double* plane = din + static_cast<std::size_t>(c) * in_.h * in_.w;
            for (int ki = 0; ki < kh_; ++ki) {
                for (int kj = 0; kj < kw_; ++kj) {
                    const double* row =
                        col + static_cast<std::size_t>((c * kh_ + ki) * kw_ + kj) * spatial;
                    for (int oy = 0; oy < oh_; ++oy) {
                        const int iy = oy * stride_ + ki - pad_;
                        if (iy < 0 || iy >= in_.h) continue;
                        double* dst = plane + static_cast<std::size_t>(iy) * in_.w;
                        const double* src = row + static_cast<std::size_t>(oy) * ow_;
                        for (int ox = 0; ox < ow_; ++ox) {
                            const int ix = ox * stride_ + kj - pad_;
                            if (ix >= 0 && ix < in_.w) dst[ix] += src[ox];
                        }
                    }
                }
            }
        }
    }

    int m_, kh_, kw_, stride_, pad_;
    Shape3 in_{};
    int oh_ = 0, ow_ = 0, k_ = 0;
    Tensor weight_, bias_;
    std::vector<std::vector<double>> col_scratch_, dcol_scratch_;
    std::vector<std::vector<double>> colT_scratch_, outT_scratch_, pad_scratch_, tr_scratch_;
};

class ReLU final : public Layer {
  public:
    LayerKind kind() const override { return LayerKind::ReLU; }
    Shape3 attach(Shape3 in, Rng&) override { return in; }

    void forward(const Tensor& in, Tensor& out, bool, Rng&) override {
        out.reset(in.shape[0], in.shape[1], in.shape[2], in.shape[3]);
        const std::int64_t n = static_cast<std::int64_t>(in.data.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i)
            out.data[i] = in.data[i] > 0.0 ? in.data[i] : 0.0;
    }

    void backward(const Tensor& in, const Tensor&, const Tensor& dout, Tensor& din) override {
        din.reset(in.shape[0], in.shape[1], in.shape[2], in.shape[3]);
        const std::int64_t n = static_cast<std::int64_t>(in.data.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i)
            din.data[i] = in.data[i] > 0.0 ? dout.data[i] : 0.0;
    }

    void save_config(std::ostream&) const override {}
};

class MaxPool final : public Layer {
  public:
    MaxPool(int ph, int pw) : ph_(ph), pw_(pw) {
        if (ph < 1 || pw < 1) throw std::invalid_argument("maxpool: bad window");
    }

    LayerKind kind() const override { return LayerKind::MaxPool; }

    Shape3 attach(Shape3 in, Rng&) override {
        if (in.h < ph_ || in.w < pw_) throw std::invalid_argument("maxpool: window larger than input");
        in_ = in;
        oh_ = in.h / ph_;
        ow_ = in.w / pw_;
        return {in.c, oh_, ow_};
    }

    void forward(const Tensor& in, Tensor& out, bool, Rng&) override {
        check_batch_shape(in, in_, "maxpool");
        const int batch = in.shape[0];
        out.reset(batch, in_.c, oh_, ow_);
        argmax_.assign(out.numel(), 0);
        const std::size_t plane = static_cast<std::size_t>(in_.h) * in_.w;
#pragma omp parallel for schedule(static)
        for (int b = 0; b < batch; ++b) {
            for (int c = 0; c < in_.c; ++c) {
                const double* src = in.item(b) + plane * c;
                double* dst = out.item(b) + static_cast<std::size_t>(c) * oh_ * ow_;
                std::int32_t* amax = argmax_.data() +
                                     (static_cast<std::size_t>(b) * in_.c + c) * oh_ * ow_;
                for (int oy = 0; oy < oh_; ++oy) {
                    for (int ox = 0; ox < ow_; ++ox) {
                        double best = -std::numeric_limits<double>::infinity();
                        std::int32_t best_idx = 0;
                        for (int py = 0; py < ph_; ++py) {
                            const int iy = oy * ph_ + py;
                            for (int px = 0; px < pw_; ++px) {
                                const int ix = ox * pw_ + px;
                                const std::int32_t idx = iy * in_.w + ix;
                                if (src[idx] > best) {
                                    best = src[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        dst[oy * ow_ + ox] = best;
                        amax[oy * ow_ + ox] = best_idx;
                    }
                }
            }
        }
    }

    void backward(const Tensor& in, const Tensor& out, const Tensor& dout, Tensor& din) override {
        din.reset(in.shape[0], in_.c, in_.h, in_.w);
        std::fill(din.data.begin(), din.data.end(), 0.0);  // sparse scatter below
        const std::size_t plane = static_cast<std::size_t>(in_.h) * in_.w;
        const std::size_t out_plane = static_cast<std::size_t>(oh_) * ow_;
#pragma omp parallel for schedule(static)
        for (int b = 0; b < out.shape[0]; ++b) {
            for (int c = 0; c < in_.c; ++c) {
                double* dst = din.item(b) + plane * c;
                const double* d = dout.item(b) + out_plane * c;
                const std::int32_t* amax =
                    argmax_.data() + (static_cast<std::size_t>(b) * in_.c + c) * out_plane;
                for (std::size_t s = 0; s < out_plane; ++s) dst[amax[s]] += d[s];
            }
        }
    }

    void save_config(std::ostream& out) const override {
        write_u32(out, static_cast<std::uint32_t>(ph_));
        write_u32(out, static_cast<std::uint32_t>(pw_));
    }

  private:
    int ph_, pw_;
    Shape3 in_{};
    int oh_ = 0, ow_ = 0;
    std::vector<std::int32_t> argmax_;
};

class Dense final : public Layer {
  public:
    Dense(int out_dim, bool zero_init) : out_(out_dim), zero_init_(zero_init) {
        if (out_dim < 1) throw std::invalid_argument("dense: bad output dim");
    }

    LayerKind kind() const override { return LayerKind::Dense; }

    Shape3 attach(Shape3 in, Rng& rng) override {
        in_ = in;
        d_ = static_cast<int>(in.numel());
        weight_ = Tensor(out_, d_, 1, 1);
        bias_ = Tensor(out_, 1, 1, 1);
        if (!zero_init_) he_uniform_fill(weight_, static_cast<std::size_t>(d_), rng);
        return {out_, 1, 1};
    }

    void forward(const Tensor& in, Tensor& out, bool, Rng&) override {
        check_batch_shape(in, in_, "dense");
        const int batch = in.shape[0];
        out.reset(batch, out_, 1, 1);
        gemm_abt(out.data.data(), in.data.data(), weight_.data.data(), batch, out_, d_,
                 false, true);
        for (int b = 0; b < batch; ++b) {
            double* o = out.item(b);
            for (int c = 0; c < out_; ++c) o[c] += bias_.data[c];
        }
    }

    void backward(const Tensor& in, const Tensor&, const Tensor& dout, Tensor& din) override {
        const int batch = in.shape[0];
        weight_.ensure_grad();
        bias_.ensure_grad();
        din.reset(batch, in_.c, in_.h, in_.w);

        // dW = dout^T * x
        std::vector<double> doutT(static_cast<std::size_t>(out_) * batch);
        for (int b = 0; b < batch; ++b)
            for (int c = 0; c < out_; ++c)
                doutT[static_cast<std::size_t>(c) * batch + b] = dout.item(b)[c];
        gemm(weight_.grad.data(), doutT.data(), in.data.data(), out_, batch, d_, true, true);

        for (int b = 0; b < batch; ++b) {
            const double* d = dout.item(b);
            for (int c = 0; c < out_; ++c) bias_.grad[c] += d[c];
        }

        // dx = dout * W
        gemm(din.data.data(), dout.data.data(), weight_.data.data(), batch, out_, d_,
             false, true);
    }

    std::vector<Tensor*> params() override { return {&weight_, &bias_}; }

    void save_config(std::ostream& out) const override {
        write_u32(out, static_cast<std::uint32_t>(out_));
        write_u32(out, zero_init_ ? 1u : 0u);
    }

  private:
    int out_;
    bool zero_init_;
    Shape3 in_{};
    int d_ = 0;
    Tensor weight_, bias_;
};

class Dropout final : public Layer {
  public:
    explicit Dropout(double p) : p_(p) {
        if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: need p in [0,1)");
    }

    LayerKind kind() const override { return LayerKind::Dropout; }
    Shape3 attach(Shape3 in, Rng&) override { return in; }

    void forward(const Tensor& in, Tensor& out, bool training, Rng& rng) override {
        out = in;
        if (!training || p_ == 0.0) {
            mask_.clear();
            return;
        }
        // Inverted dropout: survivors are scaled by 1/keep so inference
        // applies no scaling.
        const double keep = 1.0 - p_;
        const double scale = 1.0 / keep;
        mask_.resize(out.data.size());
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            const bool on = rng.uniform01() < keep;
            mask_[i] = on ? 1 : 0;
            out.data[i] = on ? out.data[i] * scale : 0.0;
        }
    }

    void backward(const Tensor&, const Tensor&, const Tensor& dout, Tensor& din) override {
        din = dout;
        if (mask_.empty()) return;  // inference-mode pass
        const double scale = 1.0 / (1.0 - p_);
        for (std::size_t i = 0; i < din.data.size(); ++i)
            din.data[i] = mask_[i] ? din.data[i] * scale : 0.0;
    }

    void save_config(std::ostream& out) const override { write_f64(out, p_); }

  private:
    double p_;
    std::vector<std::uint8_t> mask_;
};

class Softmax final : public Layer {
  public:
    LayerKind kind() const override { return LayerKind::Softmax; }

    Shape3 attach(Shape3 in, Rng&) override {
        if (in.h != 1 || in.w != 1)
            throw std::invalid_argument("softmax: expects flattened input");
        return in;
    }

    void forward(const Tensor& in, Tensor& out, bool, Rng&) override {
        out = in;
        const int batch = in.shape[0];
        const int dim = in.shape[1];
        for (int b = 0; b < batch; ++b) {
            double* row = out.item(b);
            double mx = row[0];
            for (int c = 1; c < dim; ++c) mx = std::max(mx, row[c]);
            double sum = 0.0;
            for (int c = 0; c < dim; ++c) {
                row[c] = std::exp(row[c] - mx);
                sum += row[c];
            }
            const double inv = 1.0 / sum;
            for (int c = 0; c < dim; ++c) row[c] *= inv;
        }
    }

    void backward(const Tensor&, const Tensor& out, const Tensor& dout, Tensor& din) override {
        din = dout;
        const int batch = out.shape[0];
        const int dim = out.shape[1];
        for (int b = 0; b < batch; ++b) {
            const double* p = out.item(b);
            const double* d = dout.item(b);
            double dot = 0.0;
            for (int c = 0; c < dim; ++c) dot += d[c] * p[c];
            double* o = din.item(b);
            for (int c = 0; c < dim; ++c) o[c] = p[c] * (d[c] - dot);
        }
    }

    void save_config(std::ostream&) const override {}
};

}  // namespace

std::unique_ptr<Layer> make_conv2d(int out_channels, int kh, int kw, int stride, int pad) {
    return std::make_unique<Conv2d>(out_channels, kh, kw, stride, pad);
}
std::unique_ptr<Layer> make_relu() { return std::make_unique<ReLU>(); }
std::unique_ptr<Layer> make_maxpool(int ph, int pw) { return std::make_unique<MaxPool>(ph, pw); }
std::unique_ptr<Layer> make_dense(int out_dim, bool zero_init) {
    return std::make_unique<Dense>(out_dim, zero_init);
}
std::unique_ptr<Layer> make_dropout(double p) { return std::make_unique<Dropout>(p); }
std::unique_ptr<Layer> make_softmax() { return std::make_unique<Softmax>(); }

}  // namespace amc
