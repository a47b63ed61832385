#include "trimct/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "json_util.hpp"
#include "trimct/common.hpp"

namespace trimct {

using nlohmann::json;

std::vector<size_t> Dataset::train_indices() const {
    std::vector<size_t> idx;
    for (size_t i = 0; i < manifest.split.size(); ++i)
        if (manifest.split[i] == 0) idx.push_back(i);
    return idx;
}

std::vector<size_t> Dataset::val_indices() const {
    std::vector<size_t> idx;
    for (size_t i = 0; i < manifest.split.size(); ++i)
        if (manifest.split[i] == 1) idx.push_back(i);
    return idx;
}

std::vector<Image8> Dataset::images_of(const std::vector<size_t>& idx) const {
    std::vector<Image8> out;
    out.reserve(idx.size());
    for (size_t i : idx) out.push_back(samples[i].image);
    return out;
}

namespace {

struct GlyphStyle {
    // unit coordinates (fractions of width/height)
    float logo_cx, logo_cy, logo_r;
    int logo_shape;  // 0 diamond, 1 square, 2 disc
    int line1_bars;
    float line1_y0, line1_y1, line1_x0, line1_step, line1_w;
    int line2_bars;
    float line2_y0, line2_y1, line2_x0, line2_step, line2_w;
    // background palette
    int base_r, base_g, base_b;
    float grain_period, grain_amp;
};

// Style 0 is the fixed use-case print; other ids generate distinct layouts
// and palettes for the pretraining corpus.
GlyphStyle glyph_style(int style_id) {
    GlyphStyle st;
    st.logo_cx = 0.20f;
    st.logo_cy = 0.50f;
    st.logo_r = 0.10f;
    st.logo_shape = 0;
    st.line1_bars = 5;
    st.line1_y0 = 0.36f;
    st.line1_y1 = 0.47f;
    st.line1_x0 = 0.34f;
    st.line1_step = 0.115f;
    st.line1_w = 0.060f;
    st.line2_bars = 7;
    st.line2_y0 = 0.56f;
    st.line2_y1 = 0.64f;
    st.line2_x0 = 0.34f;
    st.line2_step = 0.085f;
    st.line2_w = 0.042f;
    st.base_r = 186;
    st.base_g = 152;
    st.base_b = 110;
    st.grain_period = 9.0f;
    st.grain_amp = 8.0f;
    if (style_id == 0) return st;

    Rng r(0x51717eull * static_cast<uint64_t>(style_id) + 0xace5u);
    st.logo_cx = r.uniform_f(0.14f, 0.30f);
    st.logo_cy = r.uniform_f(0.38f, 0.60f);
    st.logo_r = r.uniform_f(0.07f, 0.13f);
    st.logo_shape = static_cast<int>(r.uniform_int(3));
    st.line1_bars = 3 + static_cast<int>(r.uniform_int(4));
    st.line1_y0 = r.uniform_f(0.28f, 0.40f);
    st.line1_y1 = st.line1_y0 + r.uniform_f(0.08f, 0.14f);
    st.line1_x0 = r.uniform_f(0.32f, 0.42f);
    st.line1_step = r.uniform_f(0.09f, 0.14f);
    st.line1_w = r.uniform_f(0.04f, 0.07f);
    st.line2_bars = 4 + static_cast<int>(r.uniform_int(5));
    st.line2_y0 = st.line1_y1 + r.uniform_f(0.05f, 0.12f);
    st.line2_y1 = st.line2_y0 + r.uniform_f(0.05f, 0.09f);
    st.line2_x0 = st.line1_x0;
    st.line2_step = r.uniform_f(0.06f, 0.10f);
    st.line2_w = r.uniform_f(0.03f, 0.05f);
    st.base_r = 130 + static_cast<int>(r.uniform_int(90));
    st.base_g = 110 + static_cast<int>(r.uniform_int(80));
    st.base_b = 80 + static_cast<int>(r.uniform_int(80));
    st.grain_period = r.uniform_f(6.0f, 14.0f);
    st.grain_amp = r.uniform_f(5.0f, 11.0f);
    return st;
}

bool in_glyph(const GlyphStyle& st, float ux, float uy) {
    // logo
    const float dx = ux - st.logo_cx, dy = uy - st.logo_cy;
    switch (st.logo_shape) {
        case 0:
            if (std::abs(dx) + std::abs(dy) <= st.logo_r) return true;
            break;
        case 1:
            if (std::abs(dx) <= st.logo_r * 0.85f && std::abs(dy) <= st.logo_r * 0.85f) return true;
            break;
        default:
            if (dx * dx + dy * dy <= st.logo_r * st.logo_r) return true;
            break;
    }
    // text bars
    if (uy >= st.line1_y0 && uy <= st.line1_y1) {
        const float rel = ux - st.line1_x0;
        if (rel >= 0.0f) {
            const int k = static_cast<int>(rel / st.line1_step);
            if (k < st.line1_bars && rel - k * st.line1_step <= st.line1_w) return true;
        }
    }
    if (uy >= st.line2_y0 && uy <= st.line2_y1) {
        const float rel = ux - st.line2_x0;
        if (rel >= 0.0f) {
            const int k = static_cast<int>(rel / st.line2_step);
            if (k < st.line2_bars && rel - k * st.line2_step <= st.line2_w) return true;
        }
    }
    return false;
}

struct GlyphBBox {
    float x0, x1, y0, y1;
};

GlyphBBox glyph_bbox(const GlyphStyle& st) {
    GlyphBBox b;
    b.x0 = std::min(st.logo_cx - st.logo_r, st.line1_x0);
    b.x1 = std::max({st.logo_cx + st.logo_r,
                     st.line1_x0 + (st.line1_bars - 1) * st.line1_step + st.line1_w,
                     st.line2_x0 + (st.line2_bars - 1) * st.line2_step + st.line2_w});
    b.y0 = std::min(st.logo_cy - st.logo_r, st.line1_y0);
    b.y1 = std::max(st.logo_cy + st.logo_r, st.line2_y1);
    return b;
}

inline uint8_t clamp8(int v) { return static_cast<uint8_t>(std::clamp(v, 0, 255)); }

}  // namespace

Image8 render_item(Rng& rng, int h, int w, DefectSubtype subtype, const DefectParams& params,
                   int style_id, bool hard) {
    if (h < 32 || w < 32) throw Error("render_item: dims too small for the glyph pattern");
    const GlyphStyle st = glyph_style(style_id);

    // per-item appearance (draw order is fixed; do not reorder)
    const int base_r = st.base_r + static_cast<int>(rng.uniform_int(13)) - 6;
    const int base_g = st.base_g + static_cast<int>(rng.uniform_int(13)) - 6;
    const int base_b = st.base_b + static_cast<int>(rng.uniform_int(13)) - 6;
    const float grain_phase = rng.uniform_f(0.0f, 6.2831853f);
    const float grain_period = st.grain_period * rng.uniform_f(0.9f, 1.1f);
    const int ink_r = 52 + static_cast<int>(rng.uniform_int(11)) - 5;
    const int ink_g = 38 + static_cast<int>(rng.uniform_int(11)) - 5;
    const int ink_b = 28 + static_cast<int>(rng.uniform_int(11)) - 5;

    float alpha;
    switch (subtype) {
        case DefectSubtype::pale:
            alpha = hard ? rng.uniform_f(params.pale_alpha_hi - 0.04f, params.pale_alpha_hi + 0.10f)
                         : rng.uniform_f(params.pale_alpha_lo, params.pale_alpha_hi);
            break;
        case DefectSubtype::none:
            alpha = hard ? rng.uniform_f(params.good_alpha_lo - 0.12f, params.good_alpha_lo + 0.04f)
                         : rng.uniform_f(params.good_alpha_lo, params.good_alpha_hi);
            break;
        default:
            alpha = rng.uniform_f(params.good_alpha_lo, params.good_alpha_hi);
            break;
    }

    // glyph placement jitter; the shifted defect decentralizes the print
    int off_x = static_cast<int>(rng.uniform_int(3)) - 1;
    int off_y = static_cast<int>(rng.uniform_int(3)) - 1;
    if (subtype == DefectSubtype::shifted) {
        const float mag = rng.uniform_f(params.shift_frac_min, params.shift_frac_max);
        const int px = std::max(2, static_cast<int>(mag * std::min(h, w)));
        const bool along_x = rng.bernoulli(0.5);
        const int sign = rng.bernoulli(0.5) ? 1 : -1;
        if (along_x)
            off_x += sign * px;
        else
            off_y += sign * px;
    }

    // erased-region rectangle in unit coordinates
    const GlyphBBox bbox = glyph_bbox(st);
    float er_x0 = 0, er_x1 = 0, er_y0 = 0, er_y1 = 0;
    if (subtype == DefectSubtype::erased) {
        const float rw = rng.uniform_f(0.35f, 0.60f) * (bbox.x1 - bbox.x0);
        const float rh = rng.uniform_f(0.45f, 0.85f) * (bbox.y1 - bbox.y0);
        er_x0 = bbox.x0 + rng.uniform_f(0.0f, (bbox.x1 - bbox.x0) - rw);
        er_y0 = bbox.y0 + rng.uniform_f(0.0f, (bbox.y1 - bbox.y0) - rh);
        er_x1 = er_x0 + rw;
        er_y1 = er_y0 + rh;
    }

    // novel smudge blob (production-only geometry)
    float sm_cx = 0, sm_cy = 0, sm_rx = 0, sm_ry = 0, sm_alpha = 0, sm_phase = 0;
    if (subtype == DefectSubtype::smudge) {
        sm_cx = rng.uniform_f(bbox.x0 + 0.05f, bbox.x1 - 0.05f);
        sm_cy = rng.uniform_f(bbox.y0, bbox.y1);
        sm_rx = rng.uniform_f(0.10f, 0.17f);
        sm_ry = rng.uniform_f(0.08f, 0.14f);
        sm_alpha = rng.uniform_f(0.55f, 0.85f);
        sm_phase = rng.uniform_f(0.0f, 6.2831853f);
    }

    Image8 img(h, w);
    for (int y = 0; y < h; ++y) {
        const float grain =
            st.grain_amp * std::sin(6.2831853f * static_cast<float>(y) / grain_period + grain_phase);
        for (int x = 0; x < w; ++x) {
            const int noise = static_cast<int>(rng.uniform_int(2 * params.noise_amp + 1)) - params.noise_amp;
            float r = static_cast<float>(base_r + grain + noise);
            float g = static_cast<float>(base_g + grain + noise);
            float b = static_cast<float>(base_b + grain + noise);

            const float ux = (static_cast<float>(x - off_x) + 0.5f) / static_cast<float>(w);
            const float uy = (static_cast<float>(y - off_y) + 0.5f) / static_cast<float>(h);
            if (in_glyph(st, ux, uy)) {
                float a = alpha;
                if (subtype == DefectSubtype::erased && ux >= er_x0 && ux <= er_x1 && uy >= er_y0 &&
                    uy <= er_y1)
                    a *= params.erase_keep;
                r = r * (1.0f - a) + ink_r * a;
                g = g * (1.0f - a) + ink_g * a;
                b = b * (1.0f - a) + ink_b * a;
            }
            if (subtype == DefectSubtype::smudge) {
                const float ddx = (static_cast<float>(x) + 0.5f) / w - sm_cx;
                const float ddy = (static_cast<float>(y) + 0.5f) / h - sm_cy;
                const float d2 = (ddx * ddx) / (sm_rx * sm_rx) + (ddy * ddy) / (sm_ry * sm_ry);
                const float wobble =
                    0.30f * std::sin(23.0f * ddx + 17.0f * ddy + sm_phase) * std::cos(11.0f * ddy + sm_phase);
                if (d2 <= 1.0f + wobble) {
                    const float fade = std::max(0.0f, 1.0f - 0.5f * d2);
                    const float a = sm_alpha * fade;
                    r = r * (1.0f - a) + 34.0f * a;
                    g = g * (1.0f - a) + 27.0f * a;
                    b = b * (1.0f - a) + 22.0f * a;
                }
            }
            img.at(y, x, 0) = clamp8(static_cast<int>(std::lround(r)));
            img.at(y, x, 1) = clamp8(static_cast<int>(std::lround(g)));
            img.at(y, x, 2) = clamp8(static_cast<int>(std::lround(b)));
        }
    }
    return img;
}

Dataset generate_dataset(uint64_t seed, int h, int w, int n_good, int n_defect,
                         const DefectParams& params, const std::string& name, double split_ratio) {
    if (n_good < 0 || n_defect < 0 || n_good + n_defect < 1)
        throw Error("generate_dataset: need at least one sample");
    if (split_ratio <= 0.0 || split_ratio >= 1.0)
        throw Error("generate_dataset: split ratio must be in (0,1)");
    if (h < 32 || w < 32) throw Error("generate_dataset: dims too small for the glyph pattern");

    const int n = n_good + n_defect;
    Dataset ds;
    ds.manifest.name = name;
    ds.manifest.height = h;
    ds.manifest.width = w;
    ds.manifest.n_good = n_good;
    ds.manifest.n_defect = n_defect;
    ds.manifest.split_ratio = split_ratio;
    ds.manifest.seed = seed;
    ds.manifest.defect_params = params;

    // interleave classes deterministically, defect subtypes cycling
    std::vector<int> labels(static_cast<size_t>(n), 0);
    {
        Rng order(Rng::derive_seed(seed, 0xdead));
        for (int i = 0; i < n_defect; ++i) labels[static_cast<size_t>(i)] = 1;
        for (size_t i = labels.size(); i > 1; --i)
            std::swap(labels[i - 1], labels[order.uniform_int(i)]);
    }

    ds.samples.resize(static_cast<size_t>(n));
    std::vector<int> defect_rank(static_cast<size_t>(n), 0);
    {
        int k = 0;
        for (int i = 0; i < n; ++i)
            if (labels[static_cast<size_t>(i)] == 1) defect_rank[static_cast<size_t>(i)] = k++;
    }
    parallel_for(static_cast<size_t>(n), [&](size_t i) {
        Rng rng(Rng::derive_seed(seed, 1000 + i));
        DefectSubtype sub = DefectSubtype::none;
        if (labels[i] == 1) {
            switch (defect_rank[i] % 3) {
                case 0: sub = DefectSubtype::pale; break;
                case 1: sub = DefectSubtype::erased; break;
                default: sub = DefectSubtype::shifted; break;
            }
        }
        LabeledSample& s = ds.samples[i];
        s.id = static_cast<int>(i);
        s.label = labels[i];
        s.origin = Origin::original;
        s.image = render_item(rng, h, w, sub, params, 0, false);
    });
    ds.manifest.labels = labels;

    // stratified split: per class, a seeded permutation, first ratio -> train
    ds.manifest.split.assign(static_cast<size_t>(n), 0);
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<size_t> members;
        for (int i = 0; i < n; ++i)
            if (labels[static_cast<size_t>(i)] == cls) members.push_back(static_cast<size_t>(i));
        Rng split_rng(Rng::derive_seed(seed, 0x5117 + cls));
        for (size_t i = members.size(); i > 1; --i)
            std::swap(members[i - 1], members[split_rng.uniform_int(i)]);
        const size_t train_n = static_cast<size_t>(std::lround(split_ratio * members.size()));
        for (size_t i = 0; i < members.size(); ++i)
            ds.manifest.split[members[i]] = i < train_n ? 0 : 1;
    }

    char buf[32];
    for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "images/%05d.ppm", i);
        ds.manifest.files.emplace_back(buf);
    }
    return ds;
}

ProductionStream generate_production_stream(const Dataset& base, const DriftScenario& scenario,
                                            uint64_t seed) {
    if (scenario.shifted_fraction < 0 || scenario.shifted_fraction > 1 ||
        scenario.novel_defect_rate < 0 || scenario.novel_defect_rate > 1 ||
        scenario.hard_fraction < 0 || scenario.hard_fraction > 1 || scenario.defect_fraction < 0 ||
        scenario.defect_fraction > 1)
        throw Error("generate_production_stream: scenario fractions must be in [0,1]");
    if (scenario.length < 1) throw Error("generate_production_stream: empty stream");
    if (scenario.shifted_fraction > 0 && scenario.transforms.empty())
        throw Error("generate_production_stream: shifted_fraction > 0 needs transforms");

    const int h = base.manifest.height, w = base.manifest.width;
    const DefectParams& params = base.manifest.defect_params;

    ProductionStream stream;
    stream.samples.resize(static_cast<size_t>(scenario.length));
    stream.truth.labels.resize(stream.samples.size());
    stream.truth.subtype.resize(stream.samples.size());
    stream.truth.shifted.resize(stream.samples.size());
    stream.truth.hard.resize(stream.samples.size());

    parallel_for(stream.samples.size(), [&](size_t i) {
        Rng rng(Rng::derive_seed(seed, 0xab00 + i));
        const bool defect = rng.bernoulli(scenario.defect_fraction);
        const bool hard = rng.bernoulli(scenario.hard_fraction);
        DefectSubtype sub = DefectSubtype::none;
        if (defect) {
            if (rng.bernoulli(scenario.novel_defect_rate))
                sub = DefectSubtype::smudge;
            else
                switch (rng.uniform_int(3)) {
                    case 0: sub = DefectSubtype::pale; break;
                    case 1: sub = DefectSubtype::erased; break;
                    default: sub = DefectSubtype::shifted; break;
                }
        }
        Image8 img = render_item(rng, h, w, sub, params, 0, hard);
        bool was_shifted = false;
        if (!scenario.transforms.empty() && rng.bernoulli(scenario.shifted_fraction)) {
            const auto& spec = scenario.transforms[rng.uniform_int(scenario.transforms.size())];
            img = apply_shift(img, spec);
            was_shifted = true;
        }
        StreamSample& s = stream.samples[i];
        s.id = static_cast<int>(i);
        s.image = std::move(img);
        stream.truth.labels[i] = defect ? 1 : 0;
        stream.truth.subtype[i] = static_cast<int>(sub);
        stream.truth.shifted[i] = was_shifted ? 1 : 0;
        stream.truth.hard[i] = hard ? 1 : 0;
    });
    return stream;
}

std::vector<Image8> generate_pretrain_corpus(uint64_t seed, int h, int w, int count) {
    std::vector<Image8> out(static_cast<size_t>(count));
    const auto moderate = moderate_shift_defaults();
    parallel_for(out.size(), [&](size_t i) {
        Rng rng(Rng::derive_seed(seed, 0xbeef00 + i));
        const int style = 1 + static_cast<int>(rng.uniform_int(8));
        DefectSubtype sub = DefectSubtype::none;
        const double roll = rng.uniform();
        if (roll > 0.50) {
            if (roll < 0.64)
                sub = DefectSubtype::pale;
            else if (roll < 0.78)
                sub = DefectSubtype::erased;
            else if (roll < 0.92)
                sub = DefectSubtype::shifted;
            else
                sub = DefectSubtype::smudge;
        }
        DefectParams params;
        Image8 img = render_item(rng, h, w, sub, params, style, false);
        if (rng.bernoulli(0.30))
            img = apply_shift(img, moderate[rng.uniform_int(moderate.size())]);
        out[i] = std::move(img);
    });
    return out;
}

// ---- persistence ----------------------------------------------------------------

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    std::filesystem::create_directories(dir / "images");
    json j;
    j["name"] = ds.manifest.name;
    j["height"] = ds.manifest.height;
    j["width"] = ds.manifest.width;
    j["n_good"] = ds.manifest.n_good;
    j["n_defect"] = ds.manifest.n_defect;
    j["split_ratio"] = ds.manifest.split_ratio;
    j["seed"] = hex64(ds.manifest.seed);
    j["defect_params"] = defect_params_to_json(ds.manifest.defect_params);
    j["files"] = ds.manifest.files;
    j["labels"] = ds.manifest.labels;
    j["split"] = ds.manifest.split;
    write_file_text(dir / "manifest.json", j.dump(2) + "\n");
    parallel_for(ds.samples.size(), [&](size_t i) {
        save_ppm(dir / ds.manifest.files[i], ds.samples[i].image);
    });
}

Dataset load_dataset(const std::filesystem::path& dir) {
    const json j = json::parse(read_file_text(dir / "manifest.json"));
    Dataset ds;
    ds.manifest.name = j.at("name").get<std::string>();
    ds.manifest.height = j.at("height").get<int>();
    ds.manifest.width = j.at("width").get<int>();
    ds.manifest.n_good = j.at("n_good").get<int>();
    ds.manifest.n_defect = j.at("n_defect").get<int>();
    ds.manifest.split_ratio = j.at("split_ratio").get<double>();
    ds.manifest.seed = std::stoull(j.at("seed").get<std::string>(), nullptr, 16);
    ds.manifest.defect_params = defect_params_from_json(j.at("defect_params"));
    ds.manifest.files = j.at("files").get<std::vector<std::string>>();
    ds.manifest.labels = j.at("labels").get<std::vector<int>>();
    ds.manifest.split = j.at("split").get<std::vector<int>>();
    if (ds.manifest.files.size() != ds.manifest.labels.size() ||
        ds.manifest.files.size() != ds.manifest.split.size())
        throw Error("dataset manifest: inconsistent list lengths");
    ds.samples.resize(ds.manifest.files.size());
    parallel_for(ds.samples.size(), [&](size_t i) {
        LabeledSample& s = ds.samples[i];
        s.id = static_cast<int>(i);
        s.label = ds.manifest.labels[i];
        s.origin = Origin::original;
        s.image = load_ppm(dir / ds.manifest.files[i]);
    });
    const int n = static_cast<int>(ds.samples.size());
    int goods = 0;
    for (int l : ds.manifest.labels) goods += l == 0 ? 1 : 0;
    if (goods != ds.manifest.n_good || n - goods != ds.manifest.n_defect)
        throw Error("dataset manifest: counts do not match files on disk");
    return ds;
}

void save_stream(const std::filesystem::path& dir, const ProductionStream& stream,
                 const DriftScenario& scenario, uint64_t seed) {
    std::filesystem::create_directories(dir / "images");
    json j;
    j["scenario"] = {{"name", scenario.name},
                     {"shifted_fraction", scenario.shifted_fraction},
                     {"novel_defect_rate", scenario.novel_defect_rate},
                     {"hard_fraction", scenario.hard_fraction},
                     {"defect_fraction", scenario.defect_fraction},
                     {"length", scenario.length}};
    json transforms = json::array();
    for (const auto& t : scenario.transforms) transforms.push_back(shift_spec_to_json(t));
    j["scenario"]["transforms"] = transforms;
    j["seed"] = hex64(seed);
    json files = json::array();
    char buf[32];
    for (size_t i = 0; i < stream.samples.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "images/%05zu.ppm", i);
        files.push_back(std::string(buf));
    }
    j["files"] = files;
    j["truth"] = {{"labels", stream.truth.labels},
                  {"subtype", stream.truth.subtype},
                  {"shifted", stream.truth.shifted},
                  {"hard", stream.truth.hard}};
    write_file_text(dir / "stream.json", j.dump(2) + "\n");
    parallel_for(stream.samples.size(), [&](size_t i) {
        char name[32];
        std::snprintf(name, sizeof(name), "images/%05zu.ppm", i);
        save_ppm(dir / name, stream.samples[i].image);
    });
}

ProductionStream load_stream(const std::filesystem::path& dir) {
    const json j = json::parse(read_file_text(dir / "stream.json"));
    ProductionStream stream;
    const auto files = j.at("files").get<std::vector<std::string>>();
    stream.samples.resize(files.size());
    parallel_for(files.size(), [&](size_t i) {
        stream.samples[i].id = static_cast<int>(i);
        stream.samples[i].image = load_ppm(dir / files[i]);
    });
    stream.truth.labels = j.at("truth").at("labels").get<std::vector<int>>();
    stream.truth.subtype = j.at("truth").at("subtype").get<std::vector<int>>();
    stream.truth.shifted = j.at("truth").at("shifted").get<std::vector<uint8_t>>();
    stream.truth.hard = j.at("truth").at("hard").get<std::vector<uint8_t>>();
    if (stream.truth.labels.size() != stream.samples.size())
        throw Error("stream manifest: truth/sample length mismatch");
    return stream;
}

}  // namespace trimct
