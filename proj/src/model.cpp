#include "ompadvisor/model.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "ompadvisor/jsonl.hpp"
#include "ompadvisor/kernels.hpp"
#include "ompadvisor/rng.hpp"

namespace ompadvisor {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kProbFloor = 1e-7;

template <class T>
T sigmoid(T z) {
    return z >= 0 ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

template <class T>
void add_bias(T* y, const T* b, std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            y[i * cols + j] += b[j];
        }
    }
}

template <class T>
void bias_grad(const T* dy, T* db, std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            db[j] += dy[i * cols + j];
        }
    }
}

// y = x·W + b with x rows×in and W in×out.
template <class T>
void linear(const T* x, const Tensor<T>& w, const Tensor<T>& b, std::vector<T>& y, std::size_t rows) {
    const auto in = static_cast<std::size_t>(w.shape[0]);
    const auto out = static_cast<std::size_t>(w.shape[1]);
    y.resize(rows * out);
    matmul(x, w.data.data(), y.data(), rows, in, out, false);
    add_bias(y.data(), b.data.data(), rows, out);
}

// Adds dW, db and writes (or adds to) dx.
template <class T>
void linear_backward(const T* x, const T* dy, const Tensor<T>& w, Tensor<T>& dw, Tensor<T>& db, T* dx,
                     std::size_t rows, bool accumulate_dx) {
    const auto in = static_cast<std::size_t>(w.shape[0]);
    const auto out = static_cast<std::size_t>(w.shape[1]);
    matmul_at(x, dy, dw.data.data(), in, rows, out, true);
    bias_grad(dy, db.data.data(), rows, out);
    matmul_bt(dy, w.data.data(), dx, rows, out, in, accumulate_dx);
}

template <class T>
void layernorm_backward(const T* dy, const T* gamma, const T* xhat, const T* rstd, T* dgamma, T* dbeta, T* dx,
                        std::size_t rows, std::size_t cols) {
    std::vector<T> dxhat(cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const T* dyr = dy + i * cols;
        const T* xr = xhat + i * cols;
        T mean1 = 0;
        T mean2 = 0;
        for (std::size_t j = 0; j < cols; ++j) {
            dgamma[j] += dyr[j] * xr[j];
            dbeta[j] += dyr[j];
            dxhat[j] = dyr[j] * gamma[j];
            mean1 += dxhat[j];
            mean2 += dxhat[j] * xr[j];
        }
        mean1 /= static_cast<T>(cols);
        mean2 /= static_cast<T>(cols);
        for (std::size_t j = 0; j < cols; ++j) {
            dx[i * cols + j] = rstd[i] * (dxhat[j] - mean1 - xr[j] * mean2);
        }
    }
}

template <class T>
T gelu_grad(T x) {
    constexpr T c = T(0.7978845608028654);
    constexpr T a = T(0.044715);
    const T t = std::tanh(c * (x + a * x * x * x));
    return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * c * (T(1) + T(3) * a * x * x);
}

// Inverted dropout mask: 0 with probability `rate`, else 1/(1-rate).
template <class T>
std::vector<T> dropout_mask(std::size_t n, double rate, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<T> mask(n);
    const T keep = static_cast<T>(1.0 / (1.0 - rate));
    for (auto& m : mask) {
        m = rng.uniform() < rate ? T(0) : keep;
    }
    return mask;
}

template <class T>
struct LayerCache {
    std::vector<T> in;
    std::vector<T> qh, kh, vh;  // head-major H×L×dh
    std::vector<T> probs;       // H×L×L
    std::vector<T> ctx;         // L×d
    std::vector<T> a_drop;
    std::vector<T> ln1_xhat, ln1_rstd, h1;
    std::vector<T> u, f;
    std::vector<T> g_drop;
    std::vector<T> ln2_xhat, ln2_rstd, out;
};

template <class T>
struct Cache {
    std::size_t L = 0;
    std::vector<T> emb_xhat, emb_rstd, emb_drop;
    std::vector<LayerCache<T>> layers;
    std::vector<T> hidden;
    std::array<T, 3> logits{};
    std::array<T, 3> probs{};
};

void check_input(const ModelConfig& config, const EncodedInput& input) {
    const std::size_t L = input.ids.size();
    if (L == 0) {
        throw ShapeError("empty input sequence");
    }
    if (L > static_cast<std::size_t>(config.max_len)) {
        throw ShapeError("input length " + std::to_string(L) + " exceeds max_len " + std::to_string(config.max_len));
    }
    if (input.positions.size() != L || input.mask.size != L || input.mask.values.size() != L * L) {
        throw ShapeError("ids, positions and mask disagree on sequence length " + std::to_string(L));
    }
    for (std::size_t i = 0; i < L; ++i) {
        if (input.ids[i] < 0 || input.ids[i] >= config.vocab_size) {
            throw ShapeError("token id " + std::to_string(input.ids[i]) + " outside vocabulary of " +
                             std::to_string(config.vocab_size));
        }
        if (input.positions[i] < 0 || input.positions[i] >= config.max_len) {
            throw ShapeError("position " + std::to_string(input.positions[i]) + " outside max_len");
        }
    }
}

template <class T>
void run_forward(const ModelParams<T>& p, const ModelConfig& cfg, const EncodedInput& input, const DropoutSpec& ds,
                 Cache<T>& c) {
    check_input(cfg, input);
    const std::size_t L = input.ids.size();
    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto H = static_cast<std::size_t>(cfg.n_heads);
    const auto dh = static_cast<std::size_t>(cfg.d_head());
    const auto ff = static_cast<std::size_t>(cfg.d_ff);
    const bool drop = ds.training && cfg.dropout_rate > 0.0f;
    const T scale = cfg.scale_by_d ? T(1) / static_cast<T>(dh) : T(1) / std::sqrt(static_cast<T>(dh));
    c.L = L;

    std::vector<T> x0(L * d);
    const auto& tok = p[slot::tok_emb].data;
    const auto& pos = p[slot::pos_emb].data;
    for (std::size_t i = 0; i < L; ++i) {
        const T* te = tok.data() + static_cast<std::size_t>(input.ids[i]) * d;
        const T* pe = pos.data() + static_cast<std::size_t>(input.positions[i]) * d;
        for (std::size_t j = 0; j < d; ++j) {
            x0[i * d + j] = te[j] + pe[j];
        }
    }
    std::vector<T> h(L * d);
    c.emb_xhat.resize(L * d);
    c.emb_rstd.resize(L);
    layernorm(x0.data(), p[slot::emb_ln_g].data.data(), p[slot::emb_ln_b].data.data(), h.data(), c.emb_xhat.data(),
              c.emb_rstd.data(), L, d, static_cast<T>(kLnEps));
    c.emb_drop.clear();
    if (drop) {
        c.emb_drop = dropout_mask<T>(L * d, cfg.dropout_rate, mix_seed(ds.seed, 0));
        for (std::size_t i = 0; i < L * d; ++i) {
            h[i] *= c.emb_drop[i];
        }
    }

    c.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    std::vector<T> q, k, v, a, r(L * d), g;
    for (int l = 0; l < cfg.n_layers; ++l) {
        LayerCache<T>& lc = c.layers[static_cast<std::size_t>(l)];
        auto W = [&](slot::Layer t) -> const Tensor<T>& { return p[slot::layer(l, t)]; };
        lc.in = h;
        linear(h.data(), W(slot::Wq), W(slot::bq), q, L);
        linear(h.data(), W(slot::Wk), W(slot::bk), k, L);
        linear(h.data(), W(slot::Wv), W(slot::bv), v, L);
        lc.qh.resize(H * L * dh);
        lc.kh.resize(H * L * dh);
        lc.vh.resize(H * L * dh);
        for (std::size_t hd = 0; hd < H; ++hd) {
            for (std::size_t i = 0; i < L; ++i) {
                for (std::size_t j = 0; j < dh; ++j) {
                    const std::size_t dst = (hd * L + i) * dh + j;
                    const std::size_t src = i * d + hd * dh + j;
                    lc.qh[dst] = q[src];
                    lc.kh[dst] = k[src];
                    lc.vh[dst] = v[src];
                }
            }
        }
        lc.probs.resize(H * L * L);
        lc.ctx.assign(L * d, T(0));
        std::vector<T> ctx_h(L * dh);
        for (std::size_t hd = 0; hd < H; ++hd) {
            const T* qp = lc.qh.data() + hd * L * dh;
            const T* kp = lc.kh.data() + hd * L * dh;
            const T* vp = lc.vh.data() + hd * L * dh;
            T* pp = lc.probs.data() + hd * L * L;
            matmul_bt(qp, kp, pp, L, dh, L, false);
            for (std::size_t i = 0; i < L * L; ++i) {
                pp[i] = pp[i] * scale + static_cast<T>(input.mask.values[i]);
            }
            softmax_rows(pp, L, L);
            matmul(pp, vp, ctx_h.data(), L, L, dh, false);
            for (std::size_t i = 0; i < L; ++i) {
                std::copy_n(ctx_h.data() + i * dh, dh, lc.ctx.data() + i * d + hd * dh);
            }
        }
        linear(lc.ctx.data(), W(slot::Wo), W(slot::bo), a, L);
        lc.a_drop.clear();
        if (drop) {
            lc.a_drop = dropout_mask<T>(L * d, cfg.dropout_rate, mix_seed(ds.seed, 1 + 2 * static_cast<std::uint64_t>(l)));
            for (std::size_t i = 0; i < L * d; ++i) {
                a[i] *= lc.a_drop[i];
            }
        }
        for (std::size_t i = 0; i < L * d; ++i) {
            r[i] = h[i] + a[i];
        }
        lc.h1.resize(L * d);
        lc.ln1_xhat.resize(L * d);
        lc.ln1_rstd.resize(L);
        layernorm(r.data(), W(slot::ln1_g).data.data(), W(slot::ln1_b).data.data(), lc.h1.data(), lc.ln1_xhat.data(),
                  lc.ln1_rstd.data(), L, d, static_cast<T>(kLnEps));

        linear(lc.h1.data(), W(slot::W1), W(slot::b1), lc.u, L);
        lc.f.resize(L * ff);
        gelu(lc.u.data(), lc.f.data(), L * ff);
        linear(lc.f.data(), W(slot::W2), W(slot::b2), g, L);
        lc.g_drop.clear();
        if (drop) {
            lc.g_drop = dropout_mask<T>(L * d, cfg.dropout_rate, mix_seed(ds.seed, 2 + 2 * static_cast<std::uint64_t>(l)));
            for (std::size_t i = 0; i < L * d; ++i) {
                g[i] *= lc.g_drop[i];
            }
        }
        for (std::size_t i = 0; i < L * d; ++i) {
            r[i] = lc.h1[i] + g[i];
        }
        lc.out.resize(L * d);
        lc.ln2_xhat.resize(L * d);
        lc.ln2_rstd.resize(L);
        layernorm(r.data(), W(slot::ln2_g).data.data(), W(slot::ln2_b).data.data(), lc.out.data(), lc.ln2_xhat.data(),
                  lc.ln2_rstd.data(), L, d, static_cast<T>(kLnEps));
        h = lc.out;
    }
    c.hidden = h;
    const auto& hw = p[slot::head_w(cfg.n_layers)].data;
    const auto& hb = p[slot::head_b(cfg.n_layers)].data;
    for (std::size_t o = 0; o < 3; ++o) {
        T z = hb[o];
        for (std::size_t j = 0; j < d; ++j) {
            z += h[j] * hw[j * 3 + o];
        }
        c.logits[o] = z;
        c.probs[o] = sigmoid(z);
    }
}

template <class T>
T loss_of(const std::array<T, 3>& probs, const std::array<int, 3>& labels) {
    T loss = 0;
    for (std::size_t o = 0; o < 3; ++o) {
        const T pc = std::clamp(probs[o], static_cast<T>(kProbFloor), static_cast<T>(1.0 - kProbFloor));
        loss -= labels[o] ? std::log(pc) : std::log(T(1) - pc);
    }
    return loss / T(3);
}

template <class T>
void run_backward(const ModelParams<T>& p, const ModelConfig& cfg, const EncodedInput& input, const Cache<T>& c,
                  ModelParams<T>& gr) {
    const std::size_t L = c.L;
    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto H = static_cast<std::size_t>(cfg.n_heads);
    const auto dh = static_cast<std::size_t>(cfg.d_head());
    const auto ff = static_cast<std::size_t>(cfg.d_ff);
    const T scale = cfg.scale_by_d ? T(1) / static_cast<T>(dh) : T(1) / std::sqrt(static_cast<T>(dh));

    std::array<T, 3> dl{};
    for (std::size_t o = 0; o < 3; ++o) {
        dl[o] = (c.probs[o] - static_cast<T>(input.labels[o])) / T(3);
    }
    const auto& hw = p[slot::head_w(cfg.n_layers)].data;
    auto& dhw = gr[slot::head_w(cfg.n_layers)].data;
    auto& dhb = gr[slot::head_b(cfg.n_layers)].data;
    std::vector<T> dout(L * d, T(0));
    for (std::size_t o = 0; o < 3; ++o) {
        dhb[o] += dl[o];
        for (std::size_t j = 0; j < d; ++j) {
            dhw[j * 3 + o] += c.hidden[j] * dl[o];
            dout[j] += hw[j * 3 + o] * dl[o];
        }
    }

    std::vector<T> dr(L * d), dh1(L * d), dg(L * d), df(L * ff), da(L * d), dctx(L * d);
    std::vector<T> dq(L * d), dk(L * d), dv(L * d), din(L * d);
    std::vector<T> dctx_h(L * dh), dP(L * L), dqh(L * dh), dkh(L * dh), dvh(L * dh);
    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const LayerCache<T>& lc = c.layers[static_cast<std::size_t>(l)];
        auto W = [&](slot::Layer t) -> const Tensor<T>& { return p[slot::layer(l, t)]; };
        auto G = [&](slot::Layer t) -> Tensor<T>& { return gr[slot::layer(l, t)]; };

        layernorm_backward(dout.data(), W(slot::ln2_g).data.data(), lc.ln2_xhat.data(), lc.ln2_rstd.data(),
                           G(slot::ln2_g).data.data(), G(slot::ln2_b).data.data(), dr.data(), L, d);
        dh1 = dr;
        for (std::size_t i = 0; i < L * d; ++i) {
            dg[i] = lc.g_drop.empty() ? dr[i] : dr[i] * lc.g_drop[i];
        }
        linear_backward(lc.f.data(), dg.data(), W(slot::W2), G(slot::W2), G(slot::b2), df.data(), L, false);
        for (std::size_t i = 0; i < L * ff; ++i) {
            df[i] *= gelu_grad(lc.u[i]);
        }
        linear_backward(lc.h1.data(), df.data(), W(slot::W1), G(slot::W1), G(slot::b1), dh1.data(), L, true);

        layernorm_backward(dh1.data(), W(slot::ln1_g).data.data(), lc.ln1_xhat.data(), lc.ln1_rstd.data(),
                           G(slot::ln1_g).data.data(), G(slot::ln1_b).data.data(), dr.data(), L, d);
        din = dr;
        for (std::size_t i = 0; i < L * d; ++i) {
            da[i] = lc.a_drop.empty() ? dr[i] : dr[i] * lc.a_drop[i];
        }
        linear_backward(lc.ctx.data(), da.data(), W(slot::Wo), G(slot::Wo), G(slot::bo), dctx.data(), L, false);

        for (std::size_t hd = 0; hd < H; ++hd) {
            const T* qp = lc.qh.data() + hd * L * dh;
            const T* kp = lc.kh.data() + hd * L * dh;
            const T* vp = lc.vh.data() + hd * L * dh;
            const T* pp = lc.probs.data() + hd * L * L;
            for (std::size_t i = 0; i < L; ++i) {
                std::copy_n(dctx.data() + i * d + hd * dh, dh, dctx_h.data() + i * dh);
            }
            matmul_bt(dctx_h.data(), vp, dP.data(), L, dh, L, false);
            matmul_at(pp, dctx_h.data(), dvh.data(), L, L, dh, false);
            for (std::size_t i = 0; i < L; ++i) {
                T* row = dP.data() + i * L;
                const T* prow = pp + i * L;
                T dot = 0;
                for (std::size_t j = 0; j < L; ++j) {
                    dot += row[j] * prow[j];
                }
                for (std::size_t j = 0; j < L; ++j) {
                    row[j] = prow[j] * (row[j] - dot) * scale;
                }
            }
            matmul(dP.data(), kp, dqh.data(), L, L, dh, false);
            matmul_at(dP.data(), qp, dkh.data(), L, L, dh, false);
            for (std::size_t i = 0; i < L; ++i) {
                std::copy_n(dqh.data() + i * dh, dh, dq.data() + i * d + hd * dh);
                std::copy_n(dkh.data() + i * dh, dh, dk.data() + i * d + hd * dh);
                std::copy_n(dvh.data() + i * dh, dh, dv.data() + i * d + hd * dh);
            }
        }
        linear_backward(lc.in.data(), dq.data(), W(slot::Wq), G(slot::Wq), G(slot::bq), din.data(), L, true);
        linear_backward(lc.in.data(), dk.data(), W(slot::Wk), G(slot::Wk), G(slot::bk), din.data(), L, true);
        linear_backward(lc.in.data(), dv.data(), W(slot::Wv), G(slot::Wv), G(slot::bv), din.data(), L, true);
        dout = din;
    }

    if (!c.emb_drop.empty()) {
        for (std::size_t i = 0; i < L * d; ++i) {
            dout[i] *= c.emb_drop[i];
        }
    }
    std::vector<T> dx0(L * d);
    layernorm_backward(dout.data(), p[slot::emb_ln_g].data.data(), c.emb_xhat.data(), c.emb_rstd.data(),
                       gr[slot::emb_ln_g].data.data(), gr[slot::emb_ln_b].data.data(), dx0.data(), L, d);
    auto& dtok = gr[slot::tok_emb].data;
    auto& dpos = gr[slot::pos_emb].data;
    for (std::size_t i = 0; i < L; ++i) {
        T* te = dtok.data() + static_cast<std::size_t>(input.ids[i]) * d;
        T* pe = dpos.data() + static_cast<std::size_t>(input.positions[i]) * d;
        for (std::size_t j = 0; j < d; ++j) {
            te[j] += dx0[i * d + j];
            pe[j] += dx0[i * d + j];
        }
    }
}

std::vector<std::pair<std::string, std::vector<int>>> tensor_layout(const ModelConfig& cfg) {
    const int d = cfg.d_model;
    std::vector<std::pair<std::string, std::vector<int>>> out = {
        {"tok_emb", {cfg.vocab_size, d}},
        {"pos_emb", {cfg.max_len, d}},
        {"emb_ln.gamma", {d}},
        {"emb_ln.beta", {d}},
    };
    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        out.push_back({p + "Wq", {d, d}});
        out.push_back({p + "bq", {d}});
        out.push_back({p + "Wk", {d, d}});
        out.push_back({p + "bk", {d}});
        out.push_back({p + "Wv", {d, d}});
        out.push_back({p + "bv", {d}});
        out.push_back({p + "Wo", {d, d}});
        out.push_back({p + "bo", {d}});
        out.push_back({p + "ln1.gamma", {d}});
        out.push_back({p + "ln1.beta", {d}});
        out.push_back({p + "W1", {d, cfg.d_ff}});
        out.push_back({p + "b1", {cfg.d_ff}});
        out.push_back({p + "W2", {cfg.d_ff, d}});
        out.push_back({p + "b2", {d}});
        out.push_back({p + "ln2.gamma", {d}});
        out.push_back({p + "ln2.beta", {d}});
    }
    out.push_back({"head.W", {d, 3}});
    out.push_back({"head.b", {3}});
    return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void ModelConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) {
            throw std::invalid_argument("invalid model config: " + what);
        }
    };
    require(d_model >= 1 && n_heads >= 1 && n_layers >= 1 && d_ff >= 1 && max_len >= 1 && vocab_size >= 1,
            "all dimensions must be >= 1");
    require(d_model % n_heads == 0, "d_model must be divisible by n_heads");
    require(dropout_rate >= 0.0f && dropout_rate < 1.0f, "dropout_rate must be in [0, 1)");
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
    return nlohmann::ordered_json{{"d_model", c.d_model},       {"n_heads", c.n_heads},
                                  {"n_layers", c.n_layers},     {"d_ff", c.d_ff},
                                  {"max_len", c.max_len},       {"dropout_rate", c.dropout_rate},
                                  {"vocab_size", c.vocab_size}, {"seed", c.seed},
                                  {"scale_by_d", c.scale_by_d}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.max_len = j.value("max_len", c.max_len);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.seed = j.value("seed", c.seed);
    c.scale_by_d = j.value("scale_by_d", c.scale_by_d);
    return c;
}

template <class T>
std::size_t ModelParams<T>::count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) {
        n += t.size();
    }
    return n;
}

template <class T>
bool ModelParams<T>::all_finite() const {
    for (const auto& t : tensors) {
        for (const T x : t.data) {
            if (!std::isfinite(x)) {
                return false;
            }
        }
    }
    return true;
}

template <class T>
void ModelParams<T>::zero() {
    for (auto& t : tensors) {
        std::fill(t.data.begin(), t.data.end(), T(0));
    }
}

template <class T>
ModelParams<T> init_params(const ModelConfig& config, double weight_std) {
    config.validate();
    Rng rng(mix_seed(config.seed, 0x5eed));
    ModelParams<T> p;
    for (auto& [name, shape] : tensor_layout(config)) {
        Tensor<T> t;
        t.name = name;
        t.shape = shape;
        const auto n = static_cast<std::size_t>(
            std::accumulate(shape.begin(), shape.end(), 1L, [](long a, int b) { return a * b; }));
        t.data.resize(n);
        if (ends_with(name, ".gamma")) {
            std::fill(t.data.begin(), t.data.end(), T(1));
        } else if (shape.size() == 2) {
            for (auto& x : t.data) {
                x = static_cast<T>(rng.normal(0.0, weight_std));
            }
        }
        p.tensors.push_back(std::move(t));
    }
    return p;
}

template <class T>
ModelParams<T> zeros_like(const ModelParams<T>& params) {
    ModelParams<T> z = params;
    z.zero();
    return z;
}

template <class T, class U>
ModelParams<T> cast_params(const ModelParams<U>& params) {
    ModelParams<T> out;
    for (const auto& t : params.tensors) {
        Tensor<T> c;
        c.name = t.name;
        c.shape = t.shape;
        c.data.assign(t.data.begin(), t.data.end());
        out.tensors.push_back(std::move(c));
    }
    return out;
}

Prediction make_prediction(const std::array<double, 3>& probs, bool gate, double threshold) {
    Prediction p;
    p.probs = probs;
    for (std::size_t o = 0; o < 3; ++o) {
        p.labels[o] = probs[o] >= threshold ? 1 : 0;
    }
    if (gate && p.labels[0] == 0) {
        p.gated = p.labels[1] != 0 || p.labels[2] != 0;
        p.labels[1] = 0;
        p.labels[2] = 0;
    }
    return p;
}

template <class T>
ForwardResult<T> forward(const ModelParams<T>& params, const ModelConfig& config, const EncodedInput& input,
                         const DropoutSpec& dropout) {
    Cache<T> c;
    run_forward(params, config, input, dropout, c);
    ForwardResult<T> r;
    r.logits = c.logits;
    r.probs = c.probs;
    r.hidden = std::move(c.hidden);
    const std::size_t L = c.L;
    for (auto& lc : c.layers) {
        std::vector<std::vector<T>> heads;
        for (int hd = 0; hd < config.n_heads; ++hd) {
            const auto b = lc.probs.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(hd) * L * L);
            heads.emplace_back(b, b + static_cast<std::ptrdiff_t>(L * L));
        }
        r.attention.push_back(std::move(heads));
    }
    return r;
}

double compute_loss(const std::array<double, 3>& probs, const std::array<int, 3>& labels) {
    return loss_of(probs, labels);
}

template <class T>
T forward_backward(const ModelParams<T>& params, const ModelConfig& config, const EncodedInput& input,
                   const DropoutSpec& dropout, ModelParams<T>& grads) {
    Cache<T> c;
    run_forward(params, config, input, dropout, c);
    run_backward(params, config, input, c, grads);
    return loss_of(c.probs, input.labels);
}

template <class T>
Adam<T>::Adam(const ModelParams<T>& params, AdamOptions options)
    : options_(options), m_(zeros_like(params)), v_(zeros_like(params)) {}

template <class T>
void Adam<T>::step(ModelParams<T>& params, const ModelParams<T>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(options_.beta1);
    const T b2 = static_cast<T>(options_.beta2);
    const T step = static_cast<T>(options_.lr / bc1);
    const T inv_bc2 = static_cast<T>(1.0 / bc2);
    const T eps = static_cast<T>(options_.eps);
    for (std::size_t ti = 0; ti < params.tensors.size(); ++ti) {
        auto& w = params.tensors[ti].data;
        const auto& g = grads.tensors[ti].data;
        auto& m = m_.tensors[ti].data;
        auto& v = v_.tensors[ti].data;
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (T(1) - b1) * g[i];
            v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
            w[i] -= step * m[i] / (std::sqrt(v[i] * inv_bc2) + eps);
        }
    }
}

double relative_error(double analytic, double numeric) {
    const double a = std::fabs(analytic);
    const double n = std::fabs(numeric);
    if (a < 1e-10 && n < 1e-10) {
        return 0.0;
    }
    return std::fabs(analytic - numeric) / std::max(a, n);
}

EncodedInput random_input(const ModelConfig& config, std::uint64_t seed, bool all_open) {
    Rng rng(seed);
    const auto max_len = static_cast<std::size_t>(config.max_len);
    if (max_len < 4 || config.vocab_size < 5) {
        throw std::invalid_argument("random_input needs max_len >= 4 and vocab_size >= 5");
    }
    EncodedInput in;
    in.n_code = 1 + static_cast<std::size_t>(rng.below(std::min<std::size_t>(max_len - 2, 12)));
    in.n_dfg = static_cast<std::size_t>(rng.below(std::min<std::size_t>(max_len - 2 - in.n_code, 6) + 1));
    const auto word = [&] { return 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(config.vocab_size - 4))); };
    in.ids.push_back(Vocabulary::kCls);
    in.positions.push_back(0);
    for (std::size_t i = 0; i < in.n_code; ++i) {
        in.ids.push_back(word());
        in.positions.push_back(static_cast<int>(i + 1));
    }
    in.ids.push_back(Vocabulary::kSep);
    in.positions.push_back(0);
    for (std::size_t k = 0; k < in.n_dfg; ++k) {
        const std::size_t slot = 1 + static_cast<std::size_t>(rng.below(in.n_code));
        in.dfg_alignment.push_back(slot);
        in.ids.push_back(in.ids[slot]);
        in.positions.push_back(0);
    }
    for (std::size_t a = 0; a < in.n_dfg; ++a) {
        for (std::size_t b = 0; b < a; ++b) {
            if (rng.chance(0.3)) {
                in.dfg_edges.push_back(DfgEdge{static_cast<int>(a), static_cast<int>(b)});
            }
        }
    }
    in.mask = build_attention_mask(in.n_code, in.dfg_alignment, in.dfg_edges);
    if (all_open) {
        std::fill(in.mask.values.begin(), in.mask.values.end(), 0.0f);
    }
    for (auto& y : in.labels) {
        y = rng.chance(0.5) ? 1 : 0;
    }
    return in;
}

GradCheckReport check_gradients(const ModelParams<double>& params, const ModelConfig& config,
                                const EncodedInput& input, std::uint64_t seed, std::size_t per_group) {
    constexpr double h = 1e-5;
    const DropoutSpec off{};
    ModelParams<double> grads = zeros_like(params);
    forward_backward(params, config, input, off, grads);
    ModelParams<double> probe = params;
    auto loss_at = [&]() {
        Cache<double> c;
        run_forward(probe, config, input, off, c);
        return loss_of(c.probs, input.labels);
    };

    GradCheckReport report;
    Rng rng(seed);
    const auto d = static_cast<std::size_t>(config.d_model);
    for (std::size_t ti = 0; ti < params.tensors.size(); ++ti) {
        const Tensor<double>& t = params.tensors[ti];
        // Embedding rows the input never touches have zero gradient both
        // ways; sample the rows that are actually used.
        std::vector<std::size_t> candidates;
        if (static_cast<int>(ti) == slot::tok_emb || static_cast<int>(ti) == slot::pos_emb) {
            const auto& rows = static_cast<int>(ti) == slot::tok_emb ? input.ids : input.positions;
            std::set<int> used(rows.begin(), rows.end());
            for (const int r : used) {
                for (std::size_t j = 0; j < d; ++j) {
                    candidates.push_back(static_cast<std::size_t>(r) * d + j);
                }
            }
        } else {
            candidates.resize(t.size());
            std::iota(candidates.begin(), candidates.end(), std::size_t{0});
        }
        rng.shuffle(candidates);
        candidates.resize(std::min(candidates.size(), per_group));

        GradCheckGroup group{t.name, 0.0, candidates.size()};
        for (const std::size_t idx : candidates) {
            double& w = probe.tensors[ti].data[idx];
            const double saved = w;
            w = saved + h;
            const double up = loss_at();
            w = saved - h;
            const double down = loss_at();
            w = saved;
            const double numeric = (up - down) / (2 * h);
            group.max_relative_error =
                std::max(group.max_relative_error, relative_error(grads.tensors[ti].data[idx], numeric));
        }
        report.max_relative_error = std::max(report.max_relative_error, group.max_relative_error);
        report.groups.push_back(std::move(group));
    }
    return report;
}

nlohmann::ordered_json to_json(const EpochRecord& r) {
    return nlohmann::ordered_json{{"epoch", r.epoch},
                                  {"aug_fraction", r.aug_fraction},
                                  {"train_loss", r.train_loss},
                                  {"valid_loss", r.valid_loss},
                                  {"valid_accuracy", r.valid_accuracy},
                                  {"valid_accuracy_pragma", r.valid_label_accuracy[0]},
                                  {"valid_accuracy_private", r.valid_label_accuracy[1]},
                                  {"valid_accuracy_reduction", r.valid_label_accuracy[2]}};
}

namespace {

std::vector<EncodedInput> encode_all(const std::vector<const Sample*>& samples, const Vocabulary& vocab,
                                     const EncodeOptions& options, EncodeStats* stats) {
    std::vector<EncodedInput> out(samples.size());
    std::vector<EncodeStats> local(samples.size());
#pragma omp parallel for schedule(dynamic, 16) num_threads(kernel_threads())
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out[i] = encode_sample(*samples[i], vocab, options, &local[i]);
    }
    if (stats != nullptr) {
        for (const auto& s : local) {
            stats->merge(s);
        }
    }
    return out;
}

}  // namespace

TrainResult train(const std::vector<Sample>& corpus, ModelConfig config, const TrainOptions& options) {
    std::vector<const Sample*> train_set;
    std::vector<const Sample*> valid_set;
    for (const auto& s : corpus) {
        if (s.split == Split::train) {
            train_set.push_back(&s);
        } else if (s.split == Split::valid) {
            valid_set.push_back(&s);
        }
    }
    if (train_set.empty() || valid_set.empty()) {
        throw DataError("training needs non-empty train and valid splits (got " + std::to_string(train_set.size()) +
                        " train, " + std::to_string(valid_set.size()) + " valid)");
    }
    if (options.epochs < 1 || options.batch_size < 1) {
        throw std::invalid_argument("epochs and batch size must be >= 1");
    }

    TrainResult result;
    std::vector<Sample> train_copy;
    train_copy.reserve(train_set.size());
    for (const Sample* s : train_set) {
        train_copy.push_back(*s);
    }
    result.model.vocab = build_vocabulary(train_copy, options.min_freq);
    result.model.encode = options.encode;
    config.vocab_size = result.model.vocab.size();
    config.max_len = options.encode.max_code + 2 + options.encode.max_dfg;
    config.seed = options.seed;
    config.validate();
    result.model.config = config;
    ModelParams<float>& params = result.model.params;
    params = init_params<float>(config);
    Adam<float> adam(params, options.adam);
    ModelParams<float> grads = zeros_like(params);

    EncodeStats stats;
    encode_all(train_set, result.model.vocab, options.encode, &stats);
    const std::vector<EncodedInput> valid = encode_all(valid_set, result.model.vocab, options.encode, &stats);
    result.encode_stats = stats;

    long step = 0;
    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        rec.aug_fraction = augmentation_fraction(options.aug, epoch);

        std::vector<Sample> augmented(train_set.size());
        const std::uint64_t epoch_seed = mix_seed(options.seed, static_cast<std::uint64_t>(epoch));
#pragma omp parallel for schedule(dynamic, 16) num_threads(kernel_threads())
        for (std::size_t i = 0; i < train_set.size(); ++i) {
            augmented[i] = rec.aug_fraction > 0.0 ? rename_variables(*train_set[i], rec.aug_fraction, mix_seed(epoch_seed, i))
                                                  : *train_set[i];
        }
        std::vector<const Sample*> views;
        for (const auto& s : augmented) {
            views.push_back(&s);
        }
        const std::vector<EncodedInput> inputs = encode_all(views, result.model.vocab, options.encode, nullptr);

        std::vector<std::size_t> order(inputs.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffler(mix_seed(epoch_seed, 0xba7c4));
        shuffler.shuffle(order);

        double loss_sum = 0.0;
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(options.batch_size)) {
            const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(options.batch_size));
            grads.zero();
            double batch_loss = 0.0;
            for (std::size_t k = b; k < e; ++k) {
                const DropoutSpec ds{true, mix_seed(mix_seed(options.seed, 0xd0 + static_cast<std::uint64_t>(step)), k)};
                batch_loss += forward_backward(params, config, inputs[order[k]], ds, grads);
            }
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                         ", step " + std::to_string(step));
            }
            const float inv = 1.0f / static_cast<float>(e - b);
            for (auto& t : grads.tensors) {
                for (auto& g : t.data) {
                    g *= inv;
                }
            }
            adam.step(params, grads);
            loss_sum += batch_loss;
            ++step;
        }
        if (!params.all_finite()) {
            throw std::runtime_error("training diverged: non-finite parameters after epoch " + std::to_string(epoch));
        }
        rec.train_loss = loss_sum / static_cast<double>(order.size());

        std::array<std::size_t, 3> correct{};
        double valid_loss = 0.0;
        for (const auto& in : valid) {
            const auto r = forward(params, config, in);
            const std::array<double, 3> pr{r.probs[0], r.probs[1], r.probs[2]};
            valid_loss += compute_loss(pr, in.labels);
            for (std::size_t o = 0; o < 3; ++o) {
                correct[o] += (pr[o] >= 0.5 ? 1 : 0) == in.labels[o] ? 1 : 0;
            }
        }
        rec.valid_loss = valid_loss / static_cast<double>(valid.size());
        for (std::size_t o = 0; o < 3; ++o) {
            rec.valid_label_accuracy[o] = static_cast<double>(correct[o]) / static_cast<double>(valid.size());
        }
        rec.valid_accuracy = (rec.valid_label_accuracy[0] + rec.valid_label_accuracy[1] + rec.valid_label_accuracy[2]) / 3.0;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(rec);
        if (options.on_epoch) {
            options.on_epoch(rec);
        }
    }
    return result;
}

std::array<double, 3> predict_probs(const TrainedModel& model, const Sample& sample) {
    const EncodedInput in = encode_sample(sample, model.vocab, model.encode);
    const auto r = forward(model.params, model.config, in);
    return {r.probs[0], r.probs[1], r.probs[2]};
}

std::vector<LoopPrediction> predict_source(const TrainedModel& model, const std::string& source,
                                           const std::string& path, bool gate, bool with_scope) {
    try {
        parse_source(source);
    } catch (const SyntaxError& e) {
        throw DataError(path + ":" + std::to_string(e.line()) + ":" + std::to_string(e.col()) + ": " + e.what());
    }
    const Extraction ex = extract_samples(std::string_view(source), path, with_scope);
    std::vector<LoopPrediction> out;
    for (const auto& s : ex.samples) {
        LoopPrediction lp;
        lp.line = s.line;
        lp.loop_code = s.loop_code;
        lp.prediction = make_prediction(predict_probs(model, s), gate);
        out.push_back(std::move(lp));
    }
    return out;
}

// model.bin layout (little-endian):
//   "OMPF1"
//   int32 d_model, n_heads, n_layers, d_ff, max_len, vocab_size, scale_by_d
//   float32 dropout_rate, uint64 seed, int32 tensor_count
//   per tensor: int32 name_len, name bytes, int32 rank, int32 dims[rank],
//               int32 numel, float32 data[numel]

namespace {

constexpr char kMagic[5] = {'O', 'M', 'P', 'F', '1'};

void put_bytes(std::string& out, const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(static_cast<char>(b[i]));
    }
}

template <class U>
void put_le(std::string& out, U value) {
    static_assert(std::is_trivially_copyable_v<U>);
    unsigned char b[sizeof(U)];
    std::memcpy(b, &value, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(b, b + sizeof(U));
    }
    put_bytes(out, b, sizeof(U));
}

class Reader {
public:
    Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    template <class U>
    U get() {
        unsigned char b[sizeof(U)];
        take(b, sizeof(U));
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(b, b + sizeof(U));
        }
        U v;
        std::memcpy(&v, b, sizeof(U));
        return v;
    }

    std::string string(std::size_t n) {
        std::string s(n, '\0');
        take(s.data(), n);
        return s;
    }

    void take(void* dst, std::size_t n) {
        if (pos_ + n > data_.size()) {
            throw DataError(path_ + ": truncated model file");
        }
        std::memcpy(dst, data_.data() + pos_, n);
        pos_ += n;
    }

    bool done() const { return pos_ == data_.size(); }

private:
    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_params(const std::filesystem::path& file, const ModelConfig& config, const ModelParams<float>& params) {
    std::string out;
    put_bytes(out, kMagic, sizeof kMagic);
    for (const int v : {config.d_model, config.n_heads, config.n_layers, config.d_ff, config.max_len, config.vocab_size,
                        config.scale_by_d ? 1 : 0}) {
        put_le<std::int32_t>(out, v);
    }
    put_le<float>(out, config.dropout_rate);
    put_le<std::uint64_t>(out, config.seed);
    put_le<std::int32_t>(out, static_cast<std::int32_t>(params.tensors.size()));
    for (const auto& t : params.tensors) {
        put_le<std::int32_t>(out, static_cast<std::int32_t>(t.name.size()));
        put_bytes(out, t.name.data(), t.name.size());
        put_le<std::int32_t>(out, static_cast<std::int32_t>(t.shape.size()));
        for (const int dim : t.shape) {
            put_le<std::int32_t>(out, dim);
        }
        put_le<std::int32_t>(out, static_cast<std::int32_t>(t.size()));
        for (const float x : t.data) {
            put_le<float>(out, x);
        }
    }
    write_text_file(file, out);
}

ModelParams<float> load_params(const std::filesystem::path& file, ModelConfig& config) {
    Reader in(read_text_file(file), file.string());
    if (in.string(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
        throw DataError(file.string() + ": not a model file (bad magic)");
    }
    config.d_model = in.get<std::int32_t>();
    config.n_heads = in.get<std::int32_t>();
    config.n_layers = in.get<std::int32_t>();
    config.d_ff = in.get<std::int32_t>();
    config.max_len = in.get<std::int32_t>();
    config.vocab_size = in.get<std::int32_t>();
    config.scale_by_d = in.get<std::int32_t>() != 0;
    config.dropout_rate = in.get<float>();
    config.seed = in.get<std::uint64_t>();
    try {
        config.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(file.string() + ": " + e.what());
    }
    const auto layout = tensor_layout(config);
    const auto count = in.get<std::int32_t>();
    if (count != static_cast<std::int32_t>(layout.size())) {
        throw DataError(file.string() + ": expected " + std::to_string(layout.size()) + " tensors, found " +
                        std::to_string(count));
    }
    ModelParams<float> params;
    for (const auto& [name, shape] : layout) {
        Tensor<float> t;
        t.name = in.string(static_cast<std::size_t>(in.get<std::int32_t>()));
        const auto rank = in.get<std::int32_t>();
        for (std::int32_t r = 0; r < rank; ++r) {
            t.shape.push_back(in.get<std::int32_t>());
        }
        if (t.name != name || t.shape != shape) {
            throw DataError(file.string() + ": tensor '" + t.name + "' does not match expected '" + name + "'");
        }
        t.data.resize(static_cast<std::size_t>(in.get<std::int32_t>()));
        for (auto& x : t.data) {
            x = in.get<float>();
        }
        params.tensors.push_back(std::move(t));
    }
    if (!in.done()) {
        throw DataError(file.string() + ": trailing bytes after last tensor");
    }
    return params;
}

void save_model(const std::filesystem::path& dir, const TrainedModel& model, bool with_scope) {
    save_params(dir / "model.bin", model.config, model.params);
    write_text_file(dir / "vocab.json", to_json(model.vocab).dump(1) + "\n");
    const nlohmann::ordered_json enc{{"max_code", model.encode.max_code},
                                     {"max_dfg", model.encode.max_dfg},
                                     {"min_freq", model.vocab.min_freq()},
                                     {"with_scope", with_scope}};
    write_text_file(dir / "encoder.json", enc.dump(2) + "\n");
}

TrainedModel load_model(const std::filesystem::path& dir, bool* with_scope) {
    TrainedModel m;
    m.params = load_params(dir / "model.bin", m.config);
    try {
        m.vocab = vocabulary_from_json(nlohmann::json::parse(read_text_file(dir / "vocab.json")));
        const auto enc = nlohmann::json::parse(read_text_file(dir / "encoder.json"));
        m.encode.max_code = enc.at("max_code").get<int>();
        m.encode.max_dfg = enc.at("max_dfg").get<int>();
        m.vocab.set_min_freq(enc.value("min_freq", 1));
        if (with_scope != nullptr) {
            *with_scope = enc.value("with_scope", false);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(dir.string() + ": malformed model metadata: " + e.what());
    }
    if (m.vocab.size() != m.config.vocab_size) {
        throw DataError(dir.string() + ": vocab.json has " + std::to_string(m.vocab.size()) +
                        " entries but model.bin expects " + std::to_string(m.config.vocab_size));
    }
    return m;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<float> init_params<float>(const ModelConfig&, double);
template ModelParams<double> init_params<double>(const ModelConfig&, double);
template ModelParams<float> zeros_like<float>(const ModelParams<float>&);
template ModelParams<double> zeros_like<double>(const ModelParams<double>&);
template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);
template ForwardResult<float> forward<float>(const ModelParams<float>&, const ModelConfig&, const EncodedInput&,
                                             const DropoutSpec&);
template ForwardResult<double> forward<double>(const ModelParams<double>&, const ModelConfig&, const EncodedInput&,
                                               const DropoutSpec&);
template float forward_backward<float>(const ModelParams<float>&, const ModelConfig&, const EncodedInput&,
                                       const DropoutSpec&, ModelParams<float>&);
template double forward_backward<double>(const ModelParams<double>&, const ModelConfig&, const EncodedInput&,
                                         const DropoutSpec&, ModelParams<double>&);
template class Adam<float>;
template class Adam<double>;

}  // namespace ompadvisor
