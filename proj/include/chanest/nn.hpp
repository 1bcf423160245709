#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chanest/rng.hpp"

namespace chanest::nn {

// Dense row-major tensor. Shape is kept loose (vector of dims); ops below
// interpret it as [B,C,H,W], [B,L,D] or [B,N] as appropriate.
// Eigen-aligned storage keeps vectorized reduction order independent of
// where the allocator happens to place a buffer, which run-to-run
// reproducibility depends on.
template <class S>
using AlignedVector = std::vector<S, Eigen::aligned_allocator<S>>;

template <class S>
struct Tensor {
    std::vector<int> shape;
    AlignedVector<S> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> sh) : shape(std::move(sh)) {
        v.assign(numel(), S(0));
    }
    std::size_t numel() const {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return n;
    }
    S* data() { return v.data(); }
    const S* data() const { return v.data(); }
};

template <class S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class S>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// A learned parameter block with its gradient accumulator.
template <class S>
struct Param {
    std::string name;
    std::vector<int> shape;
    AlignedVector<S> w, g;

    void resize(std::string n, std::vector<int> sh) {
        name = std::move(n);
        shape = std::move(sh);
        std::size_t total = 1;
        for (int d : shape) total *= static_cast<std::size_t>(d);
        w.assign(total, S(0));
        g.assign(total, S(0));
    }
    void zero_grad() { std::fill(g.begin(), g.end(), S(0)); }
};

template <class S>
inline void kaiming_init(Param<S>& p, int fan_in, Rng& rng) {
    const double std = std::sqrt(1.0 / fan_in);
    for (auto& w : p.w) w = static_cast<S>(std * rng.gaussian());
}

inline double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// ---------------------------------------------------------------------------
// Free-function reference ops.

// 3x3 same-padding stride-1 cross-correlation: x[B,Ci,H,W], kernel
// [Co,Ci,3,3], bias[Co] -> [B,Co,H,W].
template <class S>
Tensor<S> conv2d_forward(const Tensor<S>& x, const Tensor<S>& kernel, const std::vector<S>& bias) {
    if (x.shape.size() != 4 || kernel.shape.size() != 4 || kernel.shape[2] != 3 ||
        kernel.shape[3] != 3 || kernel.shape[1] != x.shape[1])
        throw std::invalid_argument("conv2d_forward: shape mismatch");
    const int B = x.shape[0], Ci = x.shape[1], H = x.shape[2], W = x.shape[3];
    const int Co = kernel.shape[0];
    if (static_cast<int>(bias.size()) != Co) throw std::invalid_argument("conv2d_forward: bias size");
    Tensor<S> y({B, Co, H, W});
    const int L = H * W, K = Ci * 9;
    std::vector<S> col(static_cast<std::size_t>(K) * L);
    for (int b = 0; b < B; ++b) {
        // im2col
        for (int c = 0; c < Ci; ++c)
            for (int u = 0; u < 3; ++u)
                for (int vv = 0; vv < 3; ++vv) {
                    S* row = col.data() + (static_cast<std::size_t>(c) * 9 + u * 3 + vv) * L;
                    const S* src = x.data() + (static_cast<std::size_t>(b) * Ci + c) * L;
                    for (int i = 0; i < H; ++i) {
                        const int si = i + u - 1;
                        for (int j = 0; j < W; ++j) {
                            const int sj = j + vv - 1;
                            row[i * W + j] = (si >= 0 && si < H && sj >= 0 && sj < W)
                                                 ? src[si * W + sj]
                                                 : S(0);
                        }
                    }
                }
        ConstMatMap<S> colm(col.data(), K, L);
        ConstMatMap<S> wm(kernel.data(), Co, K);
        MatMap<S> ym(y.data() + static_cast<std::size_t>(b) * Co * L, Co, L);
        ym.noalias() = wm * colm;
        for (int c = 0; c < Co; ++c) ym.row(c).array() += bias[c];
    }
    return y;
}

struct AttentionConfig {
    int embed_dim = 0;
    int num_heads = 1;
};

// Scaled dot-product self-attention over x[B,L,D] with projection weights
// wq/wk/wv/wo, each [D,D] (row-major, y = x * W). Heads split the feature
// axis; softmax(Q K^T / sqrt(d_head)) V per head, concatenated, output
// projected. No residual and no positional encoding here.
template <class S>
Tensor<S> attention_forward(const Tensor<S>& x, const AttentionConfig& cfg, const S* wq,
                            const S* wk, const S* wv, const S* wo) {
    if (x.shape.size() != 3 || x.shape[2] != cfg.embed_dim)
        throw std::invalid_argument("attention_forward: shape mismatch");
    if (cfg.num_heads < 1 || cfg.embed_dim % cfg.num_heads != 0)
        throw std::invalid_argument("attention_forward: embed_dim must divide by num_heads");
    const int B = x.shape[0], L = x.shape[1], D = cfg.embed_dim, Hh = cfg.num_heads, Dh = D / Hh;
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(Dh)));
    Tensor<S> out({B, L, D});
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Q(L, D), K(L, D), V(L, D),
        O(L, D), A(L, L);
    ConstMatMap<S> wqm(wq, D, D), wkm(wk, D, D), wvm(wv, D, D), wom(wo, D, D);
    for (int b = 0; b < B; ++b) {
        ConstMatMap<S> xm(x.data() + static_cast<std::size_t>(b) * L * D, L, D);
        Q.noalias() = xm * wqm;
        K.noalias() = xm * wkm;
        V.noalias() = xm * wvm;
        for (int h = 0; h < Hh; ++h) {
            auto Qh = Q.middleCols(h * Dh, Dh);
            auto Kh = K.middleCols(h * Dh, Dh);
            A.noalias() = Qh * Kh.transpose() * scale;
            for (int i = 0; i < L; ++i) {
                S mx = A.row(i).maxCoeff();
                A.row(i) = (A.row(i).array() - mx).exp();
                A.row(i) /= A.row(i).sum();
            }
            O.middleCols(h * Dh, Dh).noalias() = A * V.middleCols(h * Dh, Dh);
        }
        MatMap<S> om(out.data() + static_cast<std::size_t>(b) * L * D, L, D);
        om.noalias() = O * wom;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Layers with cached forward state for backprop.

template <class S>
struct Conv2d {
    Param<S> w, b;
    int ci = 0, co = 0;
    Tensor<S> col_cache;  // [B, Ci*9, L]
    int cache_B = 0, cache_H = 0, cache_W = 0;

    void init(const std::string& name, int ci_, int co_, Rng& rng) {
        ci = ci_;
        co = co_;
        w.resize(name + ".w", {co, ci, 3, 3});
        b.resize(name + ".b", {co});
        kaiming_init(w, ci * 9, rng);
    }

    Tensor<S> forward(const Tensor<S>& x) {
        const int B = x.shape[0], H = x.shape[2], W = x.shape[3];
        if (x.shape[1] != ci) throw std::invalid_argument("Conv2d: channel mismatch");
        const int L = H * W, K = ci * 9;
        cache_B = B;
        cache_H = H;
        cache_W = W;
        col_cache.shape = {B, K, L};
        col_cache.v.resize(static_cast<std::size_t>(B) * K * L);
        Tensor<S> y({B, co, H, W});
        for (int bi = 0; bi < B; ++bi) {
            S* col = col_cache.data() + static_cast<std::size_t>(bi) * K * L;
            for (int c = 0; c < ci; ++c)
                for (int u = 0; u < 3; ++u)
                    for (int vv = 0; vv < 3; ++vv) {
                        S* row = col + (static_cast<std::size_t>(c) * 9 + u * 3 + vv) * L;
                        const S* src = x.data() + (static_cast<std::size_t>(bi) * ci + c) * L;
                        for (int i = 0; i < H; ++i) {
                            const int si = i + u - 1;
                            if (si < 0 || si >= H) {
                                for (int j = 0; j < W; ++j) row[i * W + j] = S(0);
                                continue;
                            }
                            for (int j = 0; j < W; ++j) {
                                const int sj = j + vv - 1;
                                row[i * W + j] =
                                    (sj >= 0 && sj < W) ? src[si * W + sj] : S(0);
                            }
                        }
                    }
            ConstMatMap<S> colm(col, K, L);
            ConstMatMap<S> wm(w.w.data(), co, K);
            MatMap<S> ym(y.data() + static_cast<std::size_t>(bi) * co * L, co, L);
            ym.noalias() = wm * colm;
            for (int c = 0; c < co; ++c) ym.row(c).array() += b.w[c];
        }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const int B = cache_B, H = cache_H, W = cache_W, L = H * W, K = ci * 9;
        Tensor<S> dx({B, ci, H, W});
        MatMap<S> dwm(w.g.data(), co, K);
        Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dcol(K, L);
        for (int bi = 0; bi < B; ++bi) {
            ConstMatMap<S> dym(dy.data() + static_cast<std::size_t>(bi) * co * L, co, L);
            ConstMatMap<S> colm(col_cache.data() + static_cast<std::size_t>(bi) * K * L, K, L);
            dwm.noalias() += dym * colm.transpose();
            for (int c = 0; c < co; ++c) b.g[c] += dym.row(c).sum();
            ConstMatMap<S> wm(w.w.data(), co, K);
            dcol.noalias() = wm.transpose() * dym;
            // col2im scatter
            S* dst = dx.data() + static_cast<std::size_t>(bi) * ci * L;
            for (int c = 0; c < ci; ++c)
                for (int u = 0; u < 3; ++u)
                    for (int vv = 0; vv < 3; ++vv) {
                        const S* row = dcol.data() + (static_cast<std::size_t>(c) * 9 + u * 3 + vv) * L;
                        for (int i = 0; i < H; ++i) {
                            const int si = i + u - 1;
                            if (si < 0 || si >= H) continue;
                            for (int j = 0; j < W; ++j) {
                                const int sj = j + vv - 1;
                                if (sj >= 0 && sj < W) dst[(c * H + si) * W + sj] += row[i * W + j];
                            }
                        }
                    }
        }
        return dx;
    }
};

// Transposed convolution, kernel 4, stride 2, padding 1 (doubles H and W).
template <class S>
struct ConvTranspose2d {
    Param<S> w, b;  // w[Ci,Co,4,4]
    int ci = 0, co = 0;
    Tensor<S> x_cache;

    void init(const std::string& name, int ci_, int co_, Rng& rng) {
        ci = ci_;
        co = co_;
        w.resize(name + ".w", {ci, co, 4, 4});
        b.resize(name + ".b", {co});
        kaiming_init(w, ci * 4, rng);
    }

    // GEMM formulation: col[co*16, L] = W^T[co*16, ci] * x[ci, L], then a
    // col2im scatter-add into the upsampled output.
    Tensor<S> forward(const Tensor<S>& x) {
        const int B = x.shape[0], H = x.shape[2], W = x.shape[3];
        const int Ho = H * 2, Wo = W * 2, L = H * W, K = co * 16;
        x_cache = x;
        Tensor<S> y({B, co, Ho, Wo});
        Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> col(K, L);
        ConstMatMap<S> wm(w.w.data(), ci, K);
        for (int bi = 0; bi < B; ++bi) {
            ConstMatMap<S> xm(x.data() + static_cast<std::size_t>(bi) * ci * L, ci, L);
            col.noalias() = wm.transpose() * xm;
            for (int oc = 0; oc < co; ++oc) {
                S* dst = y.data() + (static_cast<std::size_t>(bi) * co + oc) * Ho * Wo;
                for (int i = 0; i < Ho * Wo; ++i) dst[i] = b.w[oc];
                for (int u = 0; u < 4; ++u)
                    for (int vv = 0; vv < 4; ++vv) {
                        const S* row = col.data() + (static_cast<std::size_t>(oc) * 16 + u * 4 + vv) * L;
                        for (int i = 0; i < H; ++i) {
                            const int oi = i * 2 + u - 1;
                            if (oi < 0 || oi >= Ho) continue;
                            for (int j = 0; j < W; ++j) {
                                const int oj = j * 2 + vv - 1;
                                if (oj >= 0 && oj < Wo) dst[oi * Wo + oj] += row[i * W + j];
                            }
                        }
                    }
            }
        }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const Tensor<S>& x = x_cache;
        const int B = x.shape[0], H = x.shape[2], W = x.shape[3];
        const int Ho = H * 2, Wo = W * 2, L = H * W, K = co * 16;
        Tensor<S> dx({B, ci, H, W});
        Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dcol(K, L);
        ConstMatMap<S> wm(w.w.data(), ci, K);
        MatMap<S> dwm(w.g.data(), ci, K);
        for (int bi = 0; bi < B; ++bi) {
            for (int oc = 0; oc < co; ++oc) {
                const S* dsrc = dy.data() + (static_cast<std::size_t>(bi) * co + oc) * Ho * Wo;
                for (int i = 0; i < Ho * Wo; ++i) b.g[oc] += dsrc[i];
                // im2col gather of dy into the column layout
                for (int u = 0; u < 4; ++u)
                    for (int vv = 0; vv < 4; ++vv) {
                        S* row = dcol.data() + (static_cast<std::size_t>(oc) * 16 + u * 4 + vv) * L;
                        for (int i = 0; i < H; ++i) {
                            const int oi = i * 2 + u - 1;
                            for (int j = 0; j < W; ++j) {
                                const int oj = j * 2 + vv - 1;
                                row[i * W + j] = (oi >= 0 && oi < Ho && oj >= 0 && oj < Wo)
                                                     ? dsrc[oi * Wo + oj]
                                                     : S(0);
                            }
                        }
                    }
            }
            ConstMatMap<S> xm(x.data() + static_cast<std::size_t>(bi) * ci * L, ci, L);
            dwm.noalias() += xm * dcol.transpose();
            MatMap<S> dxm(dx.data() + static_cast<std::size_t>(bi) * ci * L, ci, L);
            dxm.noalias() = wm * dcol;
        }
        return dx;
    }
};

template <class S>
struct Dense {
    Param<S> w, b;  // w[N,M]: y = x*W + b
    int n = 0, m = 0;
    Tensor<S> x_cache;

    void init(const std::string& name, int n_, int m_, Rng& rng, bool bias = true) {
        n = n_;
        m = m_;
        w.resize(name + ".w", {n, m});
        b.resize(name + ".b", {bias ? m : 0});
        kaiming_init(w, n, rng);
    }

    Tensor<S> forward(const Tensor<S>& x) {  // x[B,N]
        x_cache = x;
        const int B = x.shape[0];
        Tensor<S> y({B, m});
        ConstMatMap<S> xm(x.data(), B, n), wm(w.w.data(), n, m);
        MatMap<S> ym(y.data(), B, m);
        ym.noalias() = xm * wm;
        if (!b.w.empty())
            for (int i = 0; i < B; ++i)
                for (int j = 0; j < m; ++j) ym(i, j) += b.w[j];
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const int B = x_cache.shape[0];
        Tensor<S> dx({B, n});
        ConstMatMap<S> xm(x_cache.data(), B, n), dym(dy.data(), B, m), wm(w.w.data(), n, m);
        MatMap<S> dwm(w.g.data(), n, m), dxm(dx.data(), B, n);
        dwm.noalias() += xm.transpose() * dym;
        if (!b.w.empty()) {
            MatMap<S> dbm(b.g.data(), 1, m);
            dbm.noalias() += dym.colwise().sum();
        }
        dxm.noalias() = dym * wm.transpose();
        return dx;
    }
};

// Self-attention layer over [B,L,D] (single head by default).
template <class S>
struct Attention {
    Param<S> wq, wk, wv, wo;
    AttentionConfig cfg;
    Tensor<S> x_cache;
    std::vector<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Qc, Kc, Vc, Ac,
        Oc;

    void init(const std::string& name, AttentionConfig c, Rng& rng) {
        cfg = c;
        const int D = cfg.embed_dim;
        for (auto [p, nm] : {std::pair{&wq, "wq"}, {&wk, "wk"}, {&wv, "wv"}, {&wo, "wo"}}) {
            p->resize(name + "." + nm, {D, D});
            kaiming_init(*p, D, rng);
        }
    }

    Tensor<S> forward(const Tensor<S>& x) {
        const int B = x.shape[0], L = x.shape[1], D = cfg.embed_dim, Hh = cfg.num_heads,
                  Dh = D / Hh;
        const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(Dh)));
        x_cache = x;
        Qc.assign(B, {});
        Kc.assign(B, {});
        Vc.assign(B, {});
        Oc.assign(B, {});
        Ac.assign(static_cast<std::size_t>(B) * Hh, {});
        Tensor<S> out({B, L, D});
        ConstMatMap<S> wqm(wq.w.data(), D, D), wkm(wk.w.data(), D, D), wvm(wv.w.data(), D, D),
            wom(wo.w.data(), D, D);
        for (int b = 0; b < B; ++b) {
            ConstMatMap<S> xm(x.data() + static_cast<std::size_t>(b) * L * D, L, D);
            Qc[b].noalias() = xm * wqm;
            Kc[b].noalias() = xm * wkm;
            Vc[b].noalias() = xm * wvm;
            Oc[b].resize(L, D);
            for (int h = 0; h < Hh; ++h) {
                auto& A = Ac[static_cast<std::size_t>(b) * Hh + h];
                A.noalias() = Qc[b].middleCols(h * Dh, Dh) * Kc[b].middleCols(h * Dh, Dh).transpose() * scale;
                for (int i = 0; i < L; ++i) {
                    S mx = A.row(i).maxCoeff();
                    A.row(i) = (A.row(i).array() - mx).exp();
                    A.row(i) /= A.row(i).sum();
                }
                Oc[b].middleCols(h * Dh, Dh).noalias() = A * Vc[b].middleCols(h * Dh, Dh);
            }
            MatMap<S> om(out.data() + static_cast<std::size_t>(b) * L * D, L, D);
            om.noalias() = Oc[b] * wom;
        }
        return out;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const int B = x_cache.shape[0], L = x_cache.shape[1], D = cfg.embed_dim,
                  Hh = cfg.num_heads, Dh = D / Hh;
        const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(Dh)));
        Tensor<S> dx({B, L, D});
        MatMap<S> dwqm(wq.g.data(), D, D), dwkm(wk.g.data(), D, D), dwvm(wv.g.data(), D, D),
            dwom(wo.g.data(), D, D);
        ConstMatMap<S> wqm(wq.w.data(), D, D), wkm(wk.w.data(), D, D), wvm(wv.w.data(), D, D),
            wom(wo.w.data(), D, D);
        Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dO(L, D), dQ(L, D),
            dK(L, D), dV(L, D), dA(L, L), dSc(L, L);
        for (int b = 0; b < B; ++b) {
            ConstMatMap<S> xm(x_cache.data() + static_cast<std::size_t>(b) * L * D, L, D);
            ConstMatMap<S> dym(dy.data() + static_cast<std::size_t>(b) * L * D, L, D);
            dwom.noalias() += Oc[b].transpose() * dym;
            dO.noalias() = dym * wom.transpose();
            for (int h = 0; h < Hh; ++h) {
                const auto& A = Ac[static_cast<std::size_t>(b) * Hh + h];
                auto dOh = dO.middleCols(h * Dh, Dh);
                auto Vh = Vc[b].middleCols(h * Dh, Dh);
                dA.noalias() = dOh * Vh.transpose();
                dV.middleCols(h * Dh, Dh).noalias() = A.transpose() * dOh;
                // softmax backward, rowwise
                for (int i = 0; i < L; ++i) {
                    const S dot = dA.row(i).cwiseProduct(A.row(i)).sum();
                    dSc.row(i) = A.row(i).cwiseProduct(dA.row(i).array().matrix() -
                                                       Eigen::Matrix<S, 1, Eigen::Dynamic>::Constant(L, dot));
                }
                dQ.middleCols(h * Dh, Dh).noalias() = dSc * Kc[b].middleCols(h * Dh, Dh) * scale;
                dK.middleCols(h * Dh, Dh).noalias() =
                    dSc.transpose() * Qc[b].middleCols(h * Dh, Dh) * scale;
            }
            dwqm.noalias() += xm.transpose() * dQ;
            dwkm.noalias() += xm.transpose() * dK;
            dwvm.noalias() += xm.transpose() * dV;
            MatMap<S> dxm(dx.data() + static_cast<std::size_t>(b) * L * D, L, D);
            dxm.noalias() = dQ * wqm.transpose() + dK * wkm.transpose() + dV * wvm.transpose();
        }
        return dx;
    }
};

// SiLU activation (x * sigmoid(x)); smooth, so numeric gradient checks are
// well behaved.
template <class S>
struct SiLU {
    Tensor<S> x_cache;
    Tensor<S> forward(const Tensor<S>& x) {
        x_cache = x;
        Tensor<S> y = x;
        for (auto& v : y.v) v = static_cast<S>(static_cast<double>(v) * sigmoid(v));
        return y;
    }
    Tensor<S> backward(const Tensor<S>& dy) {
        Tensor<S> dx = dy;
        for (std::size_t i = 0; i < dx.v.size(); ++i) {
            const double s = sigmoid(x_cache.v[i]);
            dx.v[i] = static_cast<S>(static_cast<double>(dy.v[i]) *
                                     (s * (1.0 + static_cast<double>(x_cache.v[i]) * (1.0 - s))));
        }
        return dx;
    }
};

template <class S>
struct AvgPool2 {
    int B = 0, C = 0, H = 0, W = 0;
    Tensor<S> forward(const Tensor<S>& x) {
        B = x.shape[0];
        C = x.shape[1];
        H = x.shape[2];
        W = x.shape[3];
        Tensor<S> y({B, C, H / 2, W / 2});
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                const S* src = x.data() + (static_cast<std::size_t>(b) * C + c) * H * W;
                S* dst = y.data() + (static_cast<std::size_t>(b) * C + c) * (H / 2) * (W / 2);
                for (int i = 0; i < H / 2; ++i)
                    for (int j = 0; j < W / 2; ++j)
                        dst[i * (W / 2) + j] =
                            (src[(2 * i) * W + 2 * j] + src[(2 * i) * W + 2 * j + 1] +
                             src[(2 * i + 1) * W + 2 * j] + src[(2 * i + 1) * W + 2 * j + 1]) /
                            S(4);
            }
        return y;
    }
    Tensor<S> backward(const Tensor<S>& dy) {
        Tensor<S> dx({B, C, H, W});
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                const S* src = dy.data() + (static_cast<std::size_t>(b) * C + c) * (H / 2) * (W / 2);
                S* dst = dx.data() + (static_cast<std::size_t>(b) * C + c) * H * W;
                for (int i = 0; i < H / 2; ++i)
                    for (int j = 0; j < W / 2; ++j) {
                        const S g = src[i * (W / 2) + j] / S(4);
                        dst[(2 * i) * W + 2 * j] = g;
                        dst[(2 * i) * W + 2 * j + 1] = g;
                        dst[(2 * i + 1) * W + 2 * j] = g;
                        dst[(2 * i + 1) * W + 2 * j + 1] = g;
                    }
            }
        return dx;
    }
};

// Sinusoidal embedding of an integer timestep, dim must be even.
template <class S>
inline std::vector<S> sinusoidal_embedding(int t, int dim) {
    std::vector<S> e(dim);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / (half - 1));
        e[i] = static_cast<S>(std::sin(t * freq));
        e[half + i] = static_cast<S>(std::cos(t * freq));
    }
    return e;
}

// ---------------------------------------------------------------------------
// Optimization / verification / persistence.

struct TrainConfig {
    double learning_rate = 2e-3;
    int batch_size = 32;
    int epochs = 20;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class S>
class Adam {
public:
    Adam(std::vector<Param<S>*> params, double lr, double b1 = 0.9, double b2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), b1_(b1), b2_(b2), eps_(eps) {
        for (auto* p : params_) {
            m_.emplace_back(p->w.size(), 0.0);
            v_.emplace_back(p->w.size(), 0.0);
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, t_), bc2 = 1.0 - std::pow(b2_, t_);
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = *params_[k];
            for (std::size_t i = 0; i < p.w.size(); ++i) {
                const double g = static_cast<double>(p.g[i]);
                m_[k][i] = b1_ * m_[k][i] + (1.0 - b1_) * g;
                v_[k][i] = b2_ * v_[k][i] + (1.0 - b2_) * g * g;
                p.w[i] -= static_cast<S>(lr_ * (m_[k][i] / bc1) /
                                         (std::sqrt(v_[k][i] / bc2) + eps_));
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    void set_lr(double lr) { lr_ = lr; }

private:
    std::vector<Param<S>*> params_;
    double lr_, b1_, b2_, eps_;
    int t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// Central-difference gradient verification on a random parameter subset.
// `loss(with_grad)` must run the model on a fixed input, return the loss,
// and (when with_grad) accumulate analytic gradients into the params.
template <class S>
double gradient_check(const std::vector<Param<S>*>& params,
                      const std::function<double(bool with_grad)>& loss, double epsilon = 1e-4,
                      int num_checks = 50, std::uint64_t seed = 0) {
    for (auto* p : params) p->zero_grad();
    const double base = loss(true);
    if (!std::isfinite(base)) throw std::runtime_error("gradient_check: non-finite loss");

    std::size_t total = 0;
    for (auto* p : params) total += p->w.size();
    Rng rng(derive_seed(seed, "gradient-check"));
    double max_rel = 0.0;
    for (int k = 0; k < num_checks; ++k) {
        std::size_t idx = rng.uniform_index(total);
        Param<S>* tp = nullptr;
        for (auto* p : params) {
            if (idx < p->w.size()) {
                tp = p;
                break;
            }
            idx -= p->w.size();
        }
        const S orig = tp->w[idx];
        tp->w[idx] = orig + static_cast<S>(epsilon);
        const double lp = loss(false);
        tp->w[idx] = orig - static_cast<S>(epsilon);
        const double lm = loss(false);
        tp->w[idx] = orig;
        const double numeric = (lp - lm) / (2.0 * epsilon);
        const double analytic = static_cast<double>(tp->g[idx]);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
    return max_rel;
}

inline constexpr std::uint32_t kCheckpointMagic = 0x504b4347;  // "GCKP"
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Checkpoint: header (magic, version, entry table of names/shapes) followed
// by the little-endian float32 payload in declaration order.
template <class S>
void save_checkpoint(const std::vector<const Param<S>*>& params, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint " + path);
    auto w32 = [&f](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    w32(kCheckpointMagic);
    w32(kCheckpointVersion);
    w32(static_cast<std::uint32_t>(params.size()));
    for (const auto* p : params) {
        w32(static_cast<std::uint32_t>(p->name.size()));
        f.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        w32(static_cast<std::uint32_t>(p->shape.size()));
        for (int d : p->shape) w32(static_cast<std::uint32_t>(d));
    }
    for (const auto* p : params)
        for (S v : p->w) {
            const float x = static_cast<float>(v);
            f.write(reinterpret_cast<const char*>(&x), 4);
        }
}

template <class S>
void load_checkpoint(const std::vector<Param<S>*>& params, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint " + path);
    auto r32 = [&f]() {
        std::uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        if (!f) throw std::runtime_error("truncated checkpoint");
        return v;
    };
    if (r32() != kCheckpointMagic) throw std::runtime_error("bad checkpoint magic");
    if (r32() != kCheckpointVersion) throw std::runtime_error("bad checkpoint version");
    const std::uint32_t n = r32();
    if (n != params.size()) throw std::runtime_error("checkpoint layer count mismatch");
    for (auto* p : params) {
        const std::uint32_t len = r32();
        std::string name(len, '\0');
        f.read(name.data(), len);
        if (name != p->name) throw std::runtime_error("checkpoint layer name mismatch: " + name);
        const std::uint32_t nd = r32();
        if (nd != p->shape.size()) throw std::runtime_error("checkpoint rank mismatch");
        for (int d : p->shape)
            if (r32() != static_cast<std::uint32_t>(d))
                throw std::runtime_error("checkpoint shape mismatch");
    }
    for (auto* p : params)
        for (auto& v : p->w) {
            float x = 0;
            f.read(reinterpret_cast<char*>(&x), 4);
            if (!f) throw std::runtime_error("truncated checkpoint payload");
            v = static_cast<S>(x);
        }
}

inline std::uint64_t file_hash64(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!f) break;
    }
    return h;
}

}  // namespace chanest::nn
