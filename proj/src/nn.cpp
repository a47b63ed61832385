#include "trimct/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace trimct::nn {

using nlohmann::json;

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::maxpool2d: return "maxpool2d";
        case LayerKind::dense: return "dense";
        case LayerKind::relu: return "relu";
        case LayerKind::sigmoid: return "sigmoid";
        case LayerKind::flatten: return "flatten";
    }
    return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
    if (name == "conv2d") return LayerKind::conv2d;
    if (name == "maxpool2d") return LayerKind::maxpool2d;
    if (name == "dense") return LayerKind::dense;
    if (name == "relu") return LayerKind::relu;
    if (name == "sigmoid") return LayerKind::sigmoid;
    if (name == "flatten") return LayerKind::flatten;
    throw Error("unknown layer kind: " + name);
}

LayerSpec LayerSpec::conv(int in_c, int out_c, int k, int stride, int padding) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.in_channels = in_c;
    s.out_channels = out_c;
    s.kernel = k;
    s.stride = stride;
    s.padding = padding;
    return s;
}
LayerSpec LayerSpec::maxpool(int window) {
    LayerSpec s;
    s.kind = LayerKind::maxpool2d;
    s.pool = window;
    return s;
}
LayerSpec LayerSpec::dense(int in, int out) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in_units = in;
    s.out_units = out;
    return s;
}
LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
}
LayerSpec LayerSpec::sigmoid() {
    LayerSpec s;
    s.kind = LayerKind::sigmoid;
    return s;
}
LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
}

namespace {

[[noreturn]] void layer_error(size_t idx, const LayerSpec& spec, const std::string& msg) {
    std::ostringstream os;
    os << "layer " << idx << " (" << layer_kind_name(spec.kind) << "): " << msg;
    throw Error(os.str());
}

std::vector<int> layer_output_shape(size_t idx, const LayerSpec& s, const std::vector<int>& in) {
    switch (s.kind) {
        case LayerKind::conv2d: {
            if (s.kernel < 1) layer_error(idx, s, "kernel must be >= 1");
            if (s.stride < 1 || s.padding < 0) layer_error(idx, s, "bad stride/padding");
            if (s.in_channels < 1 || s.out_channels < 1) layer_error(idx, s, "bad channel counts");
            if (in.size() != 3) layer_error(idx, s, "expects CxHxW input, got " + std::to_string(in.size()) + "-d");
            if (in[0] != s.in_channels)
                layer_error(idx, s, "input channels " + std::to_string(in[0]) + " != expected " +
                                        std::to_string(s.in_channels));
            const int ho = (in[1] + 2 * s.padding - s.kernel) / s.stride + 1;
            const int wo = (in[2] + 2 * s.padding - s.kernel) / s.stride + 1;
            if (ho < 1 || wo < 1) layer_error(idx, s, "output spatial dims collapse to zero");
            return {s.out_channels, ho, wo};
        }
        case LayerKind::maxpool2d: {
            if (s.pool < 1) layer_error(idx, s, "pool window must be >= 1");
            if (in.size() != 3) layer_error(idx, s, "expects CxHxW input");
            if (in[1] % s.pool != 0 || in[2] % s.pool != 0)
                layer_error(idx, s, "spatial dims not divisible by pool window");
            return {in[0], in[1] / s.pool, in[2] / s.pool};
        }
        case LayerKind::dense: {
            if (s.in_units < 1 || s.out_units < 1) layer_error(idx, s, "bad unit counts");
            if (in.size() != 1) layer_error(idx, s, "expects flat input (did you forget flatten?)");
            if (in[0] != s.in_units)
                layer_error(idx, s, "input units " + std::to_string(in[0]) + " != expected " +
                                        std::to_string(s.in_units));
            return {s.out_units};
        }
        case LayerKind::flatten: {
            int n = 1;
            for (int d : in) n *= d;
            return {n};
        }
        case LayerKind::relu:
        case LayerKind::sigmoid:
            return in;
    }
    layer_error(idx, s, "unreachable");
}

}  // namespace

std::vector<int> infer_output_shape(const std::vector<LayerSpec>& layers,
                                    const std::vector<int>& input_shape) {
    std::vector<int> cur = input_shape;
    for (size_t i = 0; i < layers.size(); ++i) cur = layer_output_shape(i, layers[i], cur);
    return cur;
}

std::vector<int> Model::output_shape() const { return infer_output_shape(layers, input_shape); }

size_t Model::param_count() const {
    size_t n = 0;
    for (const auto& p : params) n += p.numel();
    return n;
}

Model build_model(std::vector<LayerSpec> layers, std::vector<int> input_shape, uint64_t seed) {
    Model m;
    m.layers = std::move(layers);
    m.input_shape = std::move(input_shape);
    m.seed = seed;
    infer_output_shape(m.layers, m.input_shape);  // validate composition

    Rng rng(seed);
    m.layer_param_start.assign(m.layers.size(), -1);
    for (size_t i = 0; i < m.layers.size(); ++i) {
        const LayerSpec& s = m.layers[i];
        if (s.kind == LayerKind::conv2d) {
            m.layer_param_start[i] = static_cast<int>(m.params.size());
            const int fan_in = s.in_channels * s.kernel * s.kernel;
            const float a = 1.0f / std::sqrt(static_cast<float>(fan_in));
            Tensor w({s.out_channels, fan_in});
            for (auto& v : w.data) v = rng.uniform_f(-a, a);
            Tensor b({s.out_channels});
            m.params.push_back(std::move(w));
            m.params.push_back(std::move(b));
        } else if (s.kind == LayerKind::dense) {
            m.layer_param_start[i] = static_cast<int>(m.params.size());
            const float a = 1.0f / std::sqrt(static_cast<float>(s.in_units));
            Tensor w({s.in_units, s.out_units});
            for (auto& v : w.data) v = rng.uniform_f(-a, a);
            Tensor b({s.out_units});
            m.params.push_back(std::move(w));
            m.params.push_back(std::move(b));
        }
    }
    return m;
}

std::vector<Tensor> zero_grads(const Model& model) {
    std::vector<Tensor> g;
    g.reserve(model.params.size());
    for (const auto& p : model.params) g.emplace_back(p.shape);
    return g;
}

namespace {

// im2col for one sample: input [C,H,W] -> col [C*K*K x Ho*Wo], zero padding.
void im2col(const float* in, int c_in, int h, int w, int k, int stride, int pad, int ho, int wo,
            float* col) {
    const int hw_out = ho * wo;
    for (int c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                float* dst = col + (static_cast<size_t>(c) * k * k + ky * k + kx) * hw_out;
                for (int y = 0; y < ho; ++y) {
                    const int iy = y * stride - pad + ky;
                    if (iy < 0 || iy >= h) {
                        std::memset(dst + static_cast<size_t>(y) * wo, 0, sizeof(float) * wo);
                        continue;
                    }
                    const float* src = in + (static_cast<size_t>(c) * h + iy) * w;
                    for (int x = 0; x < wo; ++x) {
                        const int ix = x * stride - pad + kx;
                        dst[static_cast<size_t>(y) * wo + x] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
                    }
                }
            }
        }
    }
}

// Scatter-add of dcol [C*K*K x Ho*Wo] back into dIn [C,H,W].
void col2im_add(const float* dcol, int c_in, int h, int w, int k, int stride, int pad, int ho,
                int wo, float* d_in) {
    const int hw_out = ho * wo;
    for (int c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const float* src = dcol + (static_cast<size_t>(c) * k * k + ky * k + kx) * hw_out;
                for (int y = 0; y < ho; ++y) {
                    const int iy = y * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    float* dst = d_in + (static_cast<size_t>(c) * h + iy) * w;
                    for (int x = 0; x < wo; ++x) {
                        const int ix = x * stride - pad + kx;
                        if (ix >= 0 && ix < w) dst[ix] += src[static_cast<size_t>(y) * wo + x];
                    }
                }
            }
        }
    }
}

struct LayerShapes {
    std::vector<std::vector<int>> out;  // per-layer per-sample output shape
};

LayerShapes per_layer_shapes(const Model& m) {
    LayerShapes ls;
    std::vector<int> cur = m.input_shape;
    for (size_t i = 0; i < m.layers.size(); ++i) {
        cur = layer_output_shape(i, m.layers[i], cur);
        ls.out.push_back(cur);
    }
    return ls;
}

size_t shape_numel(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) n *= static_cast<size_t>(d);
    return n;
}

std::vector<int> batched(int b, const std::vector<int>& s) {
    std::vector<int> out{b};
    out.insert(out.end(), s.begin(), s.end());
    return out;
}

}  // namespace

Tensor forward(const Model& model, const Tensor& input, ForwardCache* cache) {
    if (input.shape.size() != model.input_shape.size() + 1 ||
        !std::equal(model.input_shape.begin(), model.input_shape.end(), input.shape.begin() + 1))
        throw Error("forward: input shape " + input.shape_str() + " does not match model input");
    const int b = input.shape[0];
    const LayerShapes shapes = per_layer_shapes(model);

    if (cache) {
        cache->acts.clear();
        cache->pool_idx.clear();
        cache->acts.push_back(input);
    }

    Tensor cur = input;
    std::vector<int> cur_shape = model.input_shape;
    for (size_t li = 0; li < model.layers.size(); ++li) {
        const LayerSpec& s = model.layers[li];
        const std::vector<int>& out_shape = shapes.out[li];
        Tensor out(batched(b, out_shape));

        switch (s.kind) {
            case LayerKind::conv2d: {
                const int c_in = cur_shape[0], h = cur_shape[1], w = cur_shape[2];
                const int ho = out_shape[1], wo = out_shape[2];
                const int kk = s.in_channels * s.kernel * s.kernel;
                const int hw_out = ho * wo;
                const Tensor& wgt = model.params[model.layer_param_start[li]];
                const Tensor& bias = model.params[model.layer_param_start[li] + 1];
                const size_t in_stride = shape_numel(cur_shape);
                const size_t out_stride = shape_numel(out_shape);
                parallel_for(static_cast<size_t>(b), [&](size_t bi) {
                    std::vector<float> col(static_cast<size_t>(kk) * hw_out);
                    im2col(cur.data.data() + bi * in_stride, c_in, h, w, s.kernel, s.stride,
                           s.padding, ho, wo, col.data());
                    float* ob = out.data.data() + bi * out_stride;
                    matmul(wgt.data.data(), col.data(), ob, s.out_channels, kk, hw_out);
                    for (int oc = 0; oc < s.out_channels; ++oc) {
                        const float bv = bias.data[oc];
                        float* row = ob + static_cast<size_t>(oc) * hw_out;
                        for (int i = 0; i < hw_out; ++i) row[i] += bv;
                    }
                });
                break;
            }
            case LayerKind::maxpool2d: {
                const int c = cur_shape[0], h = cur_shape[1], w = cur_shape[2];
                const int p = s.pool;
                const int ho = out_shape[1], wo = out_shape[2];
                std::vector<int32_t> idx(out.numel());
                const size_t in_stride = shape_numel(cur_shape);
                const size_t out_stride = shape_numel(out_shape);
                parallel_for(static_cast<size_t>(b), [&](size_t bi) {
                    const float* ib = cur.data.data() + bi * in_stride;
                    float* ob = out.data.data() + bi * out_stride;
                    int32_t* xb = idx.data() + bi * out_stride;
                    for (int ci = 0; ci < c; ++ci) {
                        for (int y = 0; y < ho; ++y) {
                            for (int x = 0; x < wo; ++x) {
                                float best = -std::numeric_limits<float>::infinity();
                                int32_t best_i = 0;
                                for (int dy = 0; dy < p; ++dy) {
                                    for (int dx = 0; dx < p; ++dx) {
                                        const int iy = y * p + dy, ix = x * p + dx;
                                        const int32_t fi =
                                            static_cast<int32_t>((static_cast<size_t>(ci) * h + iy) * w + ix);
                                        const float v = ib[fi];
                                        if (v > best) {
                                            best = v;
                                            best_i = fi;
                                        }
                                    }
                                }
                                const size_t oi = (static_cast<size_t>(ci) * ho + y) * wo + x;
                                ob[oi] = best;
                                xb[oi] = best_i;
                            }
                        }
                    }
                });
                if (cache) cache->pool_idx.push_back(std::move(idx));
                break;
            }
            case LayerKind::dense: {
                const Tensor& wgt = model.params[model.layer_param_start[li]];
                const Tensor& bias = model.params[model.layer_param_start[li] + 1];
                matmul(cur.data.data(), wgt.data.data(), out.data.data(), b, s.in_units,
                       s.out_units);
                parallel_for(static_cast<size_t>(b), [&](size_t bi) {
                    float* row = out.data.data() + bi * static_cast<size_t>(s.out_units);
                    for (int j = 0; j < s.out_units; ++j) row[j] += bias.data[j];
                });
                break;
            }
            case LayerKind::relu: {
                parallel_for_blocks(cur.numel(), [&](size_t lo, size_t hi) {
                    for (size_t i = lo; i < hi; ++i)
                        out.data[i] = cur.data[i] > 0.0f ? cur.data[i] : 0.0f;
                });
                break;
            }
            case LayerKind::sigmoid: {
                parallel_for_blocks(cur.numel(), [&](size_t lo, size_t hi) {
                    for (size_t i = lo; i < hi; ++i)
                        out.data[i] = 1.0f / (1.0f + std::exp(-cur.data[i]));
                });
                break;
            }
            case LayerKind::flatten: {
                out.data = cur.data;  // row-major reshape
                break;
            }
        }

        cur = std::move(out);
        cur_shape = out_shape;
        if (cache) cache->acts.push_back(cur);
    }
    return cur;
}

void backward(const Model& model, const ForwardCache& cache, const Tensor& d_out,
              std::vector<Tensor>& grads, Tensor* d_input) {
    if (cache.acts.size() != model.layers.size() + 1)
        throw Error("backward: cache does not match model");
    if (grads.size() != model.params.size()) throw Error("backward: grads size mismatch");

    const int b = cache.acts[0].shape[0];
    const LayerShapes shapes = per_layer_shapes(model);

    Tensor d_cur = d_out;
    size_t pool_seen = cache.pool_idx.size();

    for (size_t li_rev = model.layers.size(); li_rev-- > 0;) {
        const LayerSpec& s = model.layers[li_rev];
        const Tensor& in_act = cache.acts[li_rev];
        const std::vector<int> in_shape(in_act.shape.begin() + 1, in_act.shape.end());
        Tensor d_in(in_act.shape);

        switch (s.kind) {
            case LayerKind::conv2d: {
                const int c_in = in_shape[0], h = in_shape[1], w = in_shape[2];
                const auto& out_shape = shapes.out[li_rev];
                const int ho = out_shape[1], wo = out_shape[2];
                const int kk = s.in_channels * s.kernel * s.kernel;
                const int hw_out = ho * wo;
                const Tensor& wgt = model.params[model.layer_param_start[li_rev]];
                const size_t in_stride = shape_numel(in_shape);
                const size_t out_stride = shape_numel(out_shape);
                const size_t wn = wgt.numel();
                // Per-sample weight-grad buffers; reduced in sample order below
                // so results do not depend on the worker count.
                std::vector<float> dw_all(static_cast<size_t>(b) * wn, 0.0f);
                std::vector<float> db_all(static_cast<size_t>(b) * s.out_channels, 0.0f);
                parallel_for(static_cast<size_t>(b), [&](size_t bi) {
                    std::vector<float> col(static_cast<size_t>(kk) * hw_out);
                    im2col(in_act.data.data() + bi * in_stride, c_in, h, w, s.kernel, s.stride,
                           s.padding, ho, wo, col.data());
                    const float* dob = d_cur.data.data() + bi * out_stride;
                    matmul_bt(dob, col.data(), dw_all.data() + bi * wn, s.out_channels, hw_out, kk);
                    float* dbb = db_all.data() + bi * static_cast<size_t>(s.out_channels);
                    for (int oc = 0; oc < s.out_channels; ++oc) {
                        const float* row = dob + static_cast<size_t>(oc) * hw_out;
                        float acc = 0.0f;
                        for (int i = 0; i < hw_out; ++i) acc += row[i];
                        dbb[oc] = acc;
                    }
                    std::vector<float> dcol(static_cast<size_t>(kk) * hw_out);
                    matmul_at(wgt.data.data(), dob, dcol.data(), kk, s.out_channels, hw_out);
                    col2im_add(dcol.data(), c_in, h, w, s.kernel, s.stride, s.padding, ho, wo,
                               d_in.data.data() + bi * in_stride);
                });
                Tensor& gw = grads[model.layer_param_start[li_rev]];
                Tensor& gb = grads[model.layer_param_start[li_rev] + 1];
                for (int bi = 0; bi < b; ++bi) {
                    const float* dw = dw_all.data() + static_cast<size_t>(bi) * wn;
                    for (size_t i = 0; i < wn; ++i) gw.data[i] += dw[i];
                    const float* db = db_all.data() + static_cast<size_t>(bi) * s.out_channels;
                    for (int oc = 0; oc < s.out_channels; ++oc) gb.data[oc] += db[oc];
                }
                break;
            }
            case LayerKind::maxpool2d: {
                --pool_seen;
                const auto& idx = cache.pool_idx[pool_seen];
                const auto& out_shape = shapes.out[li_rev];
                const size_t in_stride = shape_numel(in_shape);
                const size_t out_stride = shape_numel(out_shape);
                parallel_for(static_cast<size_t>(b), [&](size_t bi) {
                    float* dib = d_in.data.data() + bi * in_stride;
                    const float* dob = d_cur.data.data() + bi * out_stride;
                    const int32_t* xb = idx.data() + bi * out_stride;
                    for (size_t i = 0; i < out_stride; ++i) dib[xb[i]] += dob[i];
                });
                break;
            }
            case LayerKind::dense: {
                const Tensor& wgt = model.params[model.layer_param_start[li_rev]];
                Tensor& gw = grads[model.layer_param_start[li_rev]];
                Tensor& gb = grads[model.layer_param_start[li_rev] + 1];
                // dW = X^T * dY: K = batch, so each dW cell is a sequential sum.
                std::vector<float> dw(gw.numel());
                matmul_at(in_act.data.data(), d_cur.data.data(), dw.data(), s.in_units, b,
                          s.out_units);
                for (size_t i = 0; i < gw.numel(); ++i) gw.data[i] += dw[i];
                for (int bi = 0; bi < b; ++bi) {
                    const float* row = d_cur.data.data() + static_cast<size_t>(bi) * s.out_units;
                    for (int j = 0; j < s.out_units; ++j) gb.data[j] += row[j];
                }
                matmul_bt(d_cur.data.data(), wgt.data.data(), d_in.data.data(), b, s.out_units,
                          s.in_units);
                break;
            }
            case LayerKind::relu: {
                parallel_for_blocks(in_act.numel(), [&](size_t lo, size_t hi) {
                    for (size_t i = lo; i < hi; ++i)
                        d_in.data[i] = in_act.data[i] > 0.0f ? d_cur.data[i] : 0.0f;
                });
                break;
            }
            case LayerKind::sigmoid: {
                const Tensor& out_act = cache.acts[li_rev + 1];
                parallel_for_blocks(in_act.numel(), [&](size_t lo, size_t hi) {
                    for (size_t i = lo; i < hi; ++i) {
                        const float y = out_act.data[i];
                        d_in.data[i] = d_cur.data[i] * y * (1.0f - y);
                    }
                });
                break;
            }
            case LayerKind::flatten: {
                d_in.data = d_cur.data;
                break;
            }
        }
        d_cur = std::move(d_in);
    }
    if (d_input) *d_input = std::move(d_cur);
}

// ---- losses -----------------------------------------------------------------

namespace {

// Softmax cross entropy on raw logits [B, C]; fills dlogits and per-sample
// losses. Throws with the batch index on a non-finite loss.
float softmax_ce(const Tensor& logits, const std::vector<int>& labels, Tensor* dlogits) {
    const int b = logits.shape[0];
    const int c = logits.shape[1];
    if (static_cast<size_t>(b) != labels.size()) throw Error("cross entropy: label count mismatch");
    double total = 0.0;
    for (int bi = 0; bi < b; ++bi) {
        const int label = labels[bi];
        if (label < 0 || label >= c) throw Error("cross entropy: label out of range");
        const float* z = logits.data.data() + static_cast<size_t>(bi) * c;
        float zmax = z[0];
        for (int i = 1; i < c; ++i) zmax = std::max(zmax, z[i]);
        double denom = 0.0;
        for (int i = 0; i < c; ++i) denom += std::exp(static_cast<double>(z[i] - zmax));
        const double logp = static_cast<double>(z[label] - zmax) - std::log(denom);
        const double loss = -logp;
        if (!std::isfinite(loss))
            throw Error("cross entropy: non-finite loss at batch index " + std::to_string(bi));
        total += loss;
        if (dlogits) {
            float* d = dlogits->data.data() + static_cast<size_t>(bi) * c;
            for (int i = 0; i < c; ++i) {
                const double p = std::exp(static_cast<double>(z[i] - zmax)) / denom;
                d[i] = static_cast<float>((p - (i == label ? 1.0 : 0.0)) / b);
            }
        }
    }
    return static_cast<float>(total / b);
}

}  // namespace

float cross_entropy_loss_and_grad(const Model& model, const Tensor& inputs,
                                  const std::vector<int>& labels, std::vector<Tensor>& grads) {
    ForwardCache cache;
    Tensor logits = forward(model, inputs, &cache);
    if (logits.shape.size() != 2) throw Error("cross entropy: model output must be [B, classes]");
    Tensor dlogits(logits.shape);
    const float loss = softmax_ce(logits, labels, &dlogits);
    backward(model, cache, dlogits, grads);
    return loss;
}

float cross_entropy_loss(const Model& model, const Tensor& inputs, const std::vector<int>& labels) {
    Tensor logits = forward(model, inputs);
    return softmax_ce(logits, labels, nullptr);
}

VaeLoss vae_loss_and_grad(const VaeNet& net, const Tensor& inputs, float lambda_kl, Rng& noise,
                          std::vector<Tensor>& enc_grads, std::vector<Tensor>& dec_grads) {
    const int b = inputs.shape[0];
    const int latent = net.latent_dim;

    ForwardCache enc_cache;
    Tensor enc_out = forward(net.encoder, inputs, &enc_cache);
    if (enc_out.shape.size() != 2 || enc_out.shape[1] != 2 * latent)
        throw Error("vae: encoder output must be [B, 2*latent_dim]");

    // Reparameterized sample, epsilon drawn in fixed (sample, dim) order.
    Tensor z({b, latent});
    std::vector<float> eps(static_cast<size_t>(b) * latent);
    for (auto& e : eps) e = noise.normal_f();
    for (int bi = 0; bi < b; ++bi) {
        const float* mu = enc_out.data.data() + static_cast<size_t>(bi) * 2 * latent;
        const float* lv = mu + latent;
        float* zb = z.data.data() + static_cast<size_t>(bi) * latent;
        const float* eb = eps.data() + static_cast<size_t>(bi) * latent;
        for (int l = 0; l < latent; ++l) zb[l] = mu[l] + std::exp(0.5f * lv[l]) * eb[l];
    }

    ForwardCache dec_cache;
    Tensor recon = forward(net.decoder, z, &dec_cache);
    const size_t d = recon.numel() / b;
    if (inputs.numel() != recon.numel())
        throw Error("vae: decoder output size != input size");

    // MSE over all pixels, mean over batch and dims.
    const double inv_bd = 1.0 / static_cast<double>(recon.numel());
    double mse = 0.0;
    Tensor drecon(recon.shape);
    for (size_t i = 0; i < recon.numel(); ++i) {
        const double diff = static_cast<double>(recon.data[i]) - static_cast<double>(inputs.data[i]);
        mse += diff * diff * inv_bd;
        drecon.data[i] = static_cast<float>(2.0 * diff * inv_bd);
    }

    // KL(q || N(0,I)) summed over dims, mean over batch.
    double kl = 0.0;
    for (int bi = 0; bi < b; ++bi) {
        const float* mu = enc_out.data.data() + static_cast<size_t>(bi) * 2 * latent;
        const float* lv = mu + latent;
        for (int l = 0; l < latent; ++l) {
            kl += -0.5 * (1.0 + lv[l] - static_cast<double>(mu[l]) * mu[l] - std::exp(static_cast<double>(lv[l])));
        }
    }
    kl /= b;

    Tensor dz({b, latent});
    backward(net.decoder, dec_cache, drecon, dec_grads, &dz);

    Tensor denc({b, 2 * latent});
    const float lam_b = lambda_kl / static_cast<float>(b);
    for (int bi = 0; bi < b; ++bi) {
        const float* mu = enc_out.data.data() + static_cast<size_t>(bi) * 2 * latent;
        const float* lv = mu + latent;
        const float* dzb = dz.data.data() + static_cast<size_t>(bi) * latent;
        const float* eb = eps.data() + static_cast<size_t>(bi) * latent;
        float* dmu = denc.data.data() + static_cast<size_t>(bi) * 2 * latent;
        float* dlv = dmu + latent;
        for (int l = 0; l < latent; ++l) {
            dmu[l] = dzb[l] + lam_b * mu[l];
            dlv[l] = dzb[l] * eb[l] * 0.5f * std::exp(0.5f * lv[l]) +
                     lam_b * 0.5f * (std::exp(lv[l]) - 1.0f);
        }
    }
    backward(net.encoder, enc_cache, denc, enc_grads);

    VaeLoss out;
    out.mse = static_cast<float>(mse);
    out.kl = static_cast<float>(kl);
    out.total = static_cast<float>(mse + static_cast<double>(lambda_kl) * kl);
    if (!std::isfinite(out.total)) throw Error("vae: non-finite loss");
    (void)d;
    return out;
}

Tensor vae_encode_mean(const VaeNet& net, const Tensor& inputs) {
    Tensor enc_out = forward(net.encoder, inputs);
    const int b = enc_out.shape[0];
    const int latent = net.latent_dim;
    if (enc_out.shape[1] != 2 * latent) throw Error("vae: encoder output dim mismatch");
    Tensor mu({b, latent});
    for (int bi = 0; bi < b; ++bi)
        std::memcpy(mu.data.data() + static_cast<size_t>(bi) * latent,
                    enc_out.data.data() + static_cast<size_t>(bi) * 2 * latent,
                    sizeof(float) * latent);
    return mu;
}

Tensor vae_decode(const VaeNet& net, const Tensor& latents) { return forward(net.decoder, latents); }

// ---- optimizer ----------------------------------------------------------------

AdamState AdamState::for_params(const std::vector<Tensor>& params, float lr) {
    AdamState st;
    st.lr = lr;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const auto& p : params) {
        st.m.emplace_back(p.shape);
        st.v.emplace_back(p.shape);
    }
    return st;
}

void adam_step(AdamState& state, std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
    if (params.size() != state.m.size() || grads.size() != params.size())
        throw Error("adam_step: state/params/grads size mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), static_cast<double>(state.step));
    const float inv_bc1 = static_cast<float>(1.0 / bc1);
    const float inv_bc2 = static_cast<float>(1.0 / bc2);
    for (size_t pi = 0; pi < params.size(); ++pi) {
        if (!params[pi].same_shape(grads[pi])) throw Error("adam_step: grad shape mismatch");
        float* p = params[pi].data.data();
        float* m = state.m[pi].data.data();
        float* v = state.v[pi].data.data();
        const float* g = grads[pi].data.data();
        const size_t n = params[pi].numel();
        parallel_for_blocks(n, [&](size_t lo, size_t hi) {
            for (size_t i = lo; i < hi; ++i) {
                m[i] = state.beta1 * m[i] + (1.0f - state.beta1) * g[i];
                v[i] = state.beta2 * v[i] + (1.0f - state.beta2) * g[i] * g[i];
                const float mhat = m[i] * inv_bc1;
                const float vhat = v[i] * inv_bc2;
                p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
            }
        });
    }
}

// ---- checkpoints ---------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'T', 'R', 'I', 'M', 'C', 'T', '0', '1'};

json layer_to_json(const LayerSpec& s) {
    json j;
    j["kind"] = layer_kind_name(s.kind);
    switch (s.kind) {
        case LayerKind::conv2d:
            j["in_channels"] = s.in_channels;
            j["out_channels"] = s.out_channels;
            j["kernel"] = s.kernel;
            j["stride"] = s.stride;
            j["padding"] = s.padding;
            break;
        case LayerKind::maxpool2d:
            j["pool"] = s.pool;
            break;
        case LayerKind::dense:
            j["in_units"] = s.in_units;
            j["out_units"] = s.out_units;
            break;
        default:
            break;
    }
    return j;
}

LayerSpec layer_from_json(const json& j) {
    LayerSpec s;
    s.kind = layer_kind_from_name(j.at("kind").get<std::string>());
    switch (s.kind) {
        case LayerKind::conv2d:
            s.in_channels = j.at("in_channels").get<int>();
            s.out_channels = j.at("out_channels").get<int>();
            s.kernel = j.at("kernel").get<int>();
            s.stride = j.at("stride").get<int>();
            s.padding = j.at("padding").get<int>();
            break;
        case LayerKind::maxpool2d:
            s.pool = j.at("pool").get<int>();
            break;
        case LayerKind::dense:
            s.in_units = j.at("in_units").get<int>();
            s.out_units = j.at("out_units").get<int>();
            break;
        default:
            break;
    }
    return s;
}

}  // namespace

std::vector<uint8_t> model_to_bytes(const Model& model) {
    json header;
    header["format_version"] = 1;
    header["input_shape"] = model.input_shape;
    header["seed"] = hex64(model.seed);
    json layers = json::array();
    for (const auto& l : model.layers) layers.push_back(layer_to_json(l));
    header["layers"] = layers;
    header["metadata"] = model.metadata;
    const std::string hs = header.dump();

    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 8);
    put_u32_le(out, static_cast<uint32_t>(hs.size()));
    out.insert(out.end(), hs.begin(), hs.end());
    for (const auto& p : model.params)
        for (float v : p.data) put_f32_le(out, v);
    return out;
}

Model model_from_bytes(const uint8_t* data, size_t len) {
    if (len < 12 || std::memcmp(data, kMagic, 8) != 0) throw Error("checkpoint: bad magic");
    const uint32_t hlen = get_u32_le(data + 8);
    if (12 + static_cast<size_t>(hlen) > len) throw Error("checkpoint: truncated header");
    json header = json::parse(std::string(reinterpret_cast<const char*>(data + 12), hlen));
    if (header.at("format_version").get<int>() != 1) throw Error("checkpoint: unknown format version");

    std::vector<LayerSpec> layers;
    for (const auto& lj : header.at("layers")) layers.push_back(layer_from_json(lj));
    const auto input_shape = header.at("input_shape").get<std::vector<int>>();
    const uint64_t seed = std::stoull(header.at("seed").get<std::string>(), nullptr, 16);

    Model m = build_model(layers, input_shape, seed);
    m.metadata = header.at("metadata").get<std::map<std::string, std::string>>();

    size_t off = 12 + hlen;
    for (auto& p : m.params) {
        const size_t need = p.numel() * 4;
        if (off + need > len) throw Error("checkpoint: truncated payload");
        for (size_t i = 0; i < p.numel(); ++i) p.data[i] = get_f32_le(data + off + i * 4);
        off += need;
    }
    if (off != len) throw Error("checkpoint: trailing bytes");
    return m;
}

void save_model(const std::filesystem::path& path, const Model& model) {
    const auto bytes = model_to_bytes(model);
    write_file_bytes(path, bytes.data(), bytes.size());
}

Model load_model(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return model_from_bytes(bytes.data(), bytes.size());
}

}  // namespace trimct::nn
