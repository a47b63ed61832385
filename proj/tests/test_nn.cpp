#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "oracle_nn.hpp"
#include "trimct/nn.hpp"
#include "trimct/rng.hpp"

using namespace trimct;
using namespace trimct::nn;

namespace {

Tensor batch1(const std::vector<int>& shape, std::vector<float> vals) {
    std::vector<int> s{1};
    s.insert(s.end(), shape.begin(), shape.end());
    return Tensor(s, std::move(vals));
}

// Random model over all layer kinds, ending in a 2-class head.
Model random_classifier_model(Rng& rng) {
    const int c = 1 + static_cast<int>(rng.uniform_int(3));
    const int hw = 4 + 2 * static_cast<int>(rng.uniform_int(2));  // 4 or 6, pool-friendly
    std::vector<LayerSpec> layers;
    const int oc = 1 + static_cast<int>(rng.uniform_int(3));
    const int k = 1 + static_cast<int>(rng.uniform_int(3));
    const int pad = static_cast<int>(rng.uniform_int(2));
    layers.push_back(LayerSpec::conv(c, oc, k, 1, pad));
    const int conv_hw = hw + 2 * pad - k + 1;
    int cur_hw = conv_hw;
    if (conv_hw % 2 == 0 && rng.bernoulli(0.5)) {
        layers.push_back(LayerSpec::maxpool(2));
        cur_hw = conv_hw / 2;
    }
    if (rng.bernoulli(0.5))
        layers.push_back(LayerSpec::relu());
    else
        layers.push_back(LayerSpec::sigmoid());
    layers.push_back(LayerSpec::flatten());
    const int flat = oc * cur_hw * cur_hw;
    const int mid = 2 + static_cast<int>(rng.uniform_int(4));
    layers.push_back(LayerSpec::dense(flat, mid));
    layers.push_back(LayerSpec::relu());
    layers.push_back(LayerSpec::dense(mid, 2));
    Model m = build_model(layers, {c, hw, hw}, rng.next_u64());
    // Randomize biases: zero biases put padded conv outputs exactly on the
    // relu/maxpool kink, where the loss is not differentiable.
    for (size_t pi = 1; pi < m.params.size(); pi += 2)
        for (auto& v : m.params[pi].data) v = rng.uniform_f(-0.3f, 0.3f);
    return m;
}

}  // namespace

TEST_CASE("identity dense layer returns its input") {
    Model m = build_model({LayerSpec::dense(4, 4)}, {4}, 1);
    m.params[0].fill(0.0f);
    for (int i = 0; i < 4; ++i) m.params[0].data[i * 4 + i] = 1.0f;
    m.params[1].fill(0.0f);
    Tensor in = batch1({4}, {0.5f, -2.0f, 3.25f, 0.0f});
    Tensor out = forward(m, in);
    CHECK(out.data == in.data);
}

TEST_CASE("relu clamps negatives") {
    Model m = build_model({LayerSpec::relu()}, {3}, 1);
    Tensor out = forward(m, batch1({3}, {-1.0f, 0.0f, 2.0f}));
    CHECK(out.data == std::vector<float>{0.0f, 0.0f, 2.0f});
}

TEST_CASE("2x2 maxpool picks the max") {
    Model m = build_model({LayerSpec::maxpool(2)}, {1, 2, 2}, 1);
    Tensor out = forward(m, batch1({1, 2, 2}, {1.0f, 2.0f, 3.0f, 4.0f}));
    REQUIRE(out.numel() == 1);
    CHECK(out.data[0] == 4.0f);
}

TEST_CASE("shape mismatch errors name the offending layer") {
    CHECK_THROWS_WITH_AS(build_model({LayerSpec::conv(3, 4, 3)}, {1, 8, 8}, 1),
                         doctest::Contains("layer 0 (conv2d)"), Error);
    CHECK_THROWS_WITH_AS(build_model({LayerSpec::flatten(), LayerSpec::dense(10, 2)}, {1, 3, 3}, 1),
                         doctest::Contains("layer 1 (dense)"), Error);
}

TEST_CASE("one-hot prediction gives zero cross entropy") {
    Model m = build_model({LayerSpec::dense(2, 2)}, {2}, 1);
    m.params[0].fill(0.0f);
    m.params[1].data = {60.0f, -60.0f};
    auto grads = zero_grads(m);
    const float loss = cross_entropy_loss_and_grad(m, batch1({2}, {0.0f, 0.0f}), {0}, grads);
    CHECK(loss >= 0.0f);
    CHECK(loss < 1e-12f);
}

TEST_CASE("dense gradient on a 3-unit toy net matches central differences (h=1e-3)") {
    Rng rng(77);
    Model m = build_model({LayerSpec::dense(3, 3), LayerSpec::relu(), LayerSpec::dense(3, 2)}, {3},
                          rng.next_u64());
    Tensor in = batch1({3}, {0.4f, -0.3f, 0.9f});
    std::vector<int> labels{1};
    auto grads = zero_grads(m);
    cross_entropy_loss_and_grad(m, in, labels, grads);
    for (size_t pi = 0; pi < m.params.size(); ++pi) {
        for (size_t i = 0; i < m.params[pi].numel(); ++i) {
            const double fd = oracle::fd_grad(m.params, pi, i, 1e-3f,
                                              [&] { return oracle::ce_loss(m, in, labels); });
            CHECK(oracle::grad_rel_err(grads[pi].data[i], fd) < 1e-3);
        }
    }
}

TEST_CASE("gradient check across all layer kinds (>=100 randomized trials)") {
    Rng rng(20240601);
    int trials = 0;
    size_t checked = 0;
    double worst = 0.0;
    while (trials < 110) {
        Model m = random_classifier_model(rng);
        const int b = 1 + static_cast<int>(rng.uniform_int(3));
        std::vector<int> bshape{b};
        bshape.insert(bshape.end(), m.input_shape.begin(), m.input_shape.end());
        Tensor in(bshape);
        for (auto& v : in.data) v = rng.uniform_f(-1.0f, 1.0f);
        std::vector<int> labels(b);
        for (auto& l : labels) l = static_cast<int>(rng.uniform_int(2));

        auto grads = zero_grads(m);
        cross_entropy_loss_and_grad(m, in, labels, grads);

        // Check every parameter on small nets, a random subset on larger ones.
        size_t total = m.param_count();
        for (size_t pi = 0; pi < m.params.size(); ++pi) {
            const size_t n = m.params[pi].numel();
            const size_t stride = total > 150 ? 1 + n / 12 : 1;
            for (size_t i = rng.uniform_int(stride); i < n; i += stride) {
                const auto fd = oracle::fd_grad_smooth(
                    m.params, pi, i, 1e-3f, [&] { return oracle::ce_loss(m, in, labels); });
                if (!fd) continue;  // kink inside the FD step; not measurable
                worst = std::max(worst, oracle::grad_rel_err(grads[pi].data[i], *fd));
                ++checked;
            }
        }
        ++trials;
    }
    INFO("worst relative error: ", worst, " over ", checked, " coordinates");
    CHECK(checked > 2000);
    CHECK(worst < 1e-3);
}

TEST_CASE("vae loss: exact reconstruction with standard-normal posterior is zero") {
    // Encoder forced to mu=0, logvar=0; decoder ignores z and emits the input.
    Model enc = build_model({LayerSpec::dense(4, 4)}, {4}, 1);
    enc.params[0].fill(0.0f);
    enc.params[1].fill(0.0f);
    Model dec = build_model({LayerSpec::dense(2, 4)}, {2}, 1);
    dec.params[0].fill(0.0f);
    dec.params[1].data = {0.1f, 0.2f, 0.3f, 0.4f};
    VaeNet net{enc, dec, 2};
    Tensor in = batch1({4}, {0.1f, 0.2f, 0.3f, 0.4f});
    Rng noise(5);
    auto eg = zero_grads(net.encoder);
    auto dg = zero_grads(net.decoder);
    const VaeLoss l = vae_loss_and_grad(net, in, 0.01f, noise, eg, dg);
    CHECK(l.total == 0.0f);
    CHECK(l.mse == 0.0f);
    CHECK(l.kl == 0.0f);
}

TEST_CASE("vae loss parts are nonnegative and gradients match finite differences") {
    Rng rng(99);
    Model enc = build_model({LayerSpec::dense(6, 5), LayerSpec::relu(), LayerSpec::dense(5, 4)},
                            {6}, rng.next_u64());
    Model dec = build_model({LayerSpec::dense(2, 5), LayerSpec::relu(), LayerSpec::dense(5, 6),
                             LayerSpec::sigmoid()},
                            {2}, rng.next_u64());
    VaeNet net{enc, dec, 2};
    Tensor in({2, 6});
    for (auto& v : in.data) v = rng.uniform_f(0.0f, 1.0f);
    const float lambda = 0.05f;
    const uint64_t noise_seed = 1234;

    Rng noise(noise_seed);
    auto eg = zero_grads(net.encoder);
    auto dg = zero_grads(net.decoder);
    const VaeLoss l = vae_loss_and_grad(net, in, lambda, noise, eg, dg);
    CHECK(l.mse >= 0.0f);
    CHECK(l.kl >= 0.0f);

    auto check_grads = [&](Model& m, const std::vector<Tensor>& grads) {
        for (size_t pi = 0; pi < m.params.size(); ++pi) {
            for (size_t i = 0; i < m.params[pi].numel(); ++i) {
                const double fd = oracle::fd_grad(m.params, pi, i, 1e-3f, [&] {
                    return oracle::vae_loss(net, in, lambda, Rng(noise_seed));
                });
                CHECK(oracle::grad_rel_err(grads[pi].data[i], fd) < 1e-3);
            }
        }
    };
    check_grads(net.encoder, eg);
    check_grads(net.decoder, dg);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Model m = build_model({LayerSpec::dense(3, 2)}, {3}, 11);
    const auto before = m.params;
    auto st = AdamState::for_params(m.params, 1e-4f);
    auto grads = zero_grads(m);
    adam_step(st, m.params, grads);
    CHECK(st.step == 1);
    for (size_t i = 0; i < before.size(); ++i) CHECK(m.params[i].data == before[i].data);
}

TEST_CASE("adam: unit gradient at step 1 moves a scalar by ~lr") {
    std::vector<Tensor> params{Tensor({1}, {1.0f})};
    auto st = AdamState::for_params(params, 1e-4f);
    std::vector<Tensor> grads{Tensor({1}, {1.0f})};
    adam_step(st, params, grads);
    CHECK(params[0].data[0] == doctest::Approx(1.0f - 1e-4f).epsilon(1e-6));
}

TEST_CASE("training determinism: same seed gives bit-identical parameters") {
    auto run = [] {
        Rng data_rng(3);
        Model m = build_model(
            {LayerSpec::conv(1, 2, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool(2),
             LayerSpec::flatten(), LayerSpec::dense(2 * 2 * 2, 2)},
            {1, 4, 4}, 42);
        auto st = AdamState::for_params(m.params, 1e-3f);
        Tensor in({4, 1, 4, 4});
        for (auto& v : in.data) v = data_rng.uniform_f(0.0f, 1.0f);
        std::vector<int> labels{0, 1, 1, 0};
        for (int step = 0; step < 10; ++step) {
            auto grads = zero_grads(m);
            cross_entropy_loss_and_grad(m, in, labels, grads);
            adam_step(st, m.params, grads);
        }
        return m.params;
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].data == b[i].data);
}

TEST_CASE("backward never changes parameter shapes") {
    Rng rng(5);
    Model m = random_classifier_model(rng);
    const auto shapes_before = [&] {
        std::vector<std::vector<int>> s;
        for (const auto& p : m.params) s.push_back(p.shape);
        return s;
    }();
    Tensor in(std::vector<int>{2, m.input_shape[0], m.input_shape[1], m.input_shape[2]});
    for (auto& v : in.data) v = rng.uniform_f(-1.0f, 1.0f);
    auto grads = zero_grads(m);
    cross_entropy_loss_and_grad(m, in, {0, 1}, grads);
    for (size_t i = 0; i < m.params.size(); ++i) {
        CHECK(m.params[i].shape == shapes_before[i]);
        CHECK(grads[i].shape == shapes_before[i]);
    }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    Rng rng(8);
    Model m = random_classifier_model(rng);
    m.metadata["trained_on"] = "toy";
    m.metadata["val_f1"] = "0.97";
    const auto tmp = std::filesystem::temp_directory_path() / "trimct_test_ckpt.bin";
    save_model(tmp, m);
    Model back = load_model(tmp);
    CHECK(back.layers == m.layers);
    CHECK(back.input_shape == m.input_shape);
    CHECK(back.seed == m.seed);
    CHECK(back.metadata == m.metadata);
    REQUIRE(back.params.size() == m.params.size());
    for (size_t i = 0; i < m.params.size(); ++i) CHECK(back.params[i].data == m.params[i].data);
    // save(load(x)) produces identical bytes
    const auto bytes1 = model_to_bytes(m);
    const auto bytes2 = model_to_bytes(back);
    CHECK(bytes1 == bytes2);
    std::filesystem::remove(tmp);
}
