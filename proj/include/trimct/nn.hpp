#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trimct/rng.hpp"
#include "trimct/tensor.hpp"

namespace trimct::nn {

enum class LayerKind { conv2d, maxpool2d, dense, relu, sigmoid, flatten };

const char* layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    // conv2d
    int in_channels = 0, out_channels = 0, kernel = 0, stride = 1, padding = 0;
    // maxpool2d (square window, stride == window)
    int pool = 0;
    // dense
    int in_units = 0, out_units = 0;

    static LayerSpec conv(int in_c, int out_c, int k, int stride = 1, int padding = 0);
    static LayerSpec maxpool(int window);
    static LayerSpec dense(int in, int out);
    static LayerSpec relu();
    static LayerSpec sigmoid();
    static LayerSpec flatten();

    bool operator==(const LayerSpec&) const = default;
};

// A sequential network: layer specs plus parameters in declaration order
// (weight then bias for each parameterized layer).
struct Model {
    std::vector<LayerSpec> layers;
    std::vector<int> input_shape;  // per-sample shape, e.g. {3, 64, 64}
    std::vector<Tensor> params;
    std::vector<int> layer_param_start;  // index into params per layer, -1 if none
    uint64_t seed = 0;
    std::map<std::string, std::string> metadata;

    std::vector<int> output_shape() const;
    size_t param_count() const;
};

// Validates that consecutive layer shapes compose and initializes parameters
// with uniform fan-in scaling from the seeded generator.
Model build_model(std::vector<LayerSpec> layers, std::vector<int> input_shape, uint64_t seed);

// Shape of the output of `layers` applied to `input_shape`; throws naming the
// offending layer if shapes do not compose.
std::vector<int> infer_output_shape(const std::vector<LayerSpec>& layers,
                                    const std::vector<int>& input_shape);

struct ForwardCache {
    std::vector<Tensor> acts;                    // acts[0] = input, acts[i+1] = layer i output
    std::vector<std::vector<int32_t>> pool_idx;  // per maxpool layer: argmax flat indices
};

// Batched forward pass. `input` is [B, ...input_shape...]; returns the final
// activation. Deterministic for fixed parameters and any worker count.
Tensor forward(const Model& model, const Tensor& input, ForwardCache* cache = nullptr);

// Backpropagates dOut through the cached forward pass, accumulating parameter
// gradients in declaration order. Optionally emits the input gradient.
void backward(const Model& model, const ForwardCache& cache, const Tensor& d_out,
              std::vector<Tensor>& grads, Tensor* d_input = nullptr);

std::vector<Tensor> zero_grads(const Model& model);

// ---- losses -----------------------------------------------------------------

// Mean cross entropy over the batch for integer labels in {0, 1}. Fills
// `grads` (shaped like model params) and returns the loss. Throws with the
// batch index if any per-sample loss is non-finite.
float cross_entropy_loss_and_grad(const Model& model, const Tensor& inputs,
                                  const std::vector<int>& labels, std::vector<Tensor>& grads);

// Forward-only batch loss (used by training-loop validation).
float cross_entropy_loss(const Model& model, const Tensor& inputs, const std::vector<int>& labels);

// Encoder emits [B, 2*latent] (mean then log-variance); decoder consumes a
// sampled latent and reconstructs the flattened input.
struct VaeNet {
    Model encoder;
    Model decoder;
    int latent_dim = 0;
};

struct VaeLoss {
    float total = 0.0f;
    float mse = 0.0f;
    float kl = 0.0f;  // before lambda weighting
};

// MSE over pixels plus lambda-weighted KL(q(z|x) || N(0, I)), mean over the
// batch. Samples the latent with the reparameterization trick from `noise`.
VaeLoss vae_loss_and_grad(const VaeNet& net, const Tensor& inputs, float lambda_kl, Rng& noise,
                          std::vector<Tensor>& enc_grads, std::vector<Tensor>& dec_grads);

VaeLoss vae_loss(const VaeNet& net, const Tensor& inputs, float lambda_kl, Rng& noise);

// Deterministic encoder mean for a batch: [B, latent_dim].
Tensor vae_encode_mean(const VaeNet& net, const Tensor& inputs);

Tensor vae_decode(const VaeNet& net, const Tensor& latents);

// ---- optimizer ----------------------------------------------------------------

struct AdamState {
    int64_t step = 0;
    float lr = 1e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    static AdamState for_params(const std::vector<Tensor>& params, float lr);
};

// Bias-corrected Adam update; increments the step counter.
void adam_step(AdamState& state, std::vector<Tensor>& params, const std::vector<Tensor>& grads);

// ---- checkpoints ---------------------------------------------------------------

// Checkpoint layout: magic, little-endian header length, JSON header (format
// version, layer specs, seed, metadata), then parameters as little-endian
// float32 in declaration order. Round-trips bit-exactly.
std::vector<uint8_t> model_to_bytes(const Model& model);
Model model_from_bytes(const uint8_t* data, size_t len);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace trimct::nn
