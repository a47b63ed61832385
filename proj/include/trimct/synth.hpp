#pragma once

#include <optional>
#include <string>
#include <vector>

#include "trimct/image.hpp"
#include "trimct/rng.hpp"
#include "trimct/transforms.hpp"

namespace trimct {

enum class Origin { original, production };

enum class DefectSubtype : int {
    none = 0,    // good item
    pale = 1,    // washed-out print
    erased = 2,  // missing print region
    shifted = 3, // decentralized print
    smudge = 4,  // novel geometry: never appears in original datasets
};

// A sample from the original (engineering-time) datasets. Ground truth is
// open here; training legitimately consumes it.
struct LabeledSample {
    int id = 0;
    Image8 image;
    int label = 0;  // 0 good, 1 defect
    Origin origin = Origin::original;
    std::optional<int> self_label;
    std::optional<float> confidence;
};

// Rendering knobs for the item generator. Alphas are print-ink coverages;
// the gap between good_alpha_lo and pale_alpha_hi sets task difficulty.
struct DefectParams {
    float good_alpha_lo = 0.66f;
    float good_alpha_hi = 0.95f;
    float pale_alpha_lo = 0.22f;
    float pale_alpha_hi = 0.52f;
    float erase_keep = 0.15f;     // residual ink inside the erased region
    float shift_frac_min = 0.09f; // glyph offset as a fraction of image size
    float shift_frac_max = 0.16f;
    int noise_amp = 7;            // background pixel noise amplitude
    bool operator==(const DefectParams&) const = default;
};

struct DatasetManifest {
    std::string name;
    int height = 0, width = 0;
    int n_good = 0, n_defect = 0;
    double split_ratio = 0.8;  // train fraction
    uint64_t seed = 0;
    DefectParams defect_params;     // recorded so regeneration is bit-exact
    std::vector<std::string> files;  // relative to the manifest directory
    std::vector<int> labels;
    std::vector<int> split;  // 0 train, 1 val; stratified, seeded
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<LabeledSample> samples;

    std::vector<size_t> train_indices() const;
    std::vector<size_t> val_indices() const;
    std::vector<Image8> images_of(const std::vector<size_t>& idx) const;
};

// A production-time scenario: how the stream deviates from the original
// distribution. All-zero rates reproduce the original generator path.
struct DriftScenario {
    std::string name = "none";
    std::vector<ShiftSpec> transforms;  // one is picked per shifted item
    double shifted_fraction = 0.0;
    double novel_defect_rate = 0.0;  // among defective items
    double hard_fraction = 0.0;      // borderline-ink corner cases
    double defect_fraction = 0.42;
    int length = 400;
};

// Production sample: no ground-truth field at all. Filters and CT operate on
// these; truth travels separately through StreamTruth.
struct StreamSample {
    int id = 0;
    Image8 image;
    std::optional<int> self_label;
    std::optional<float> confidence;
};

// Evaluation-only ground truth and provenance for a production stream. Kept
// out of StreamSample so filter/CT code paths cannot read labels.
struct StreamTruth {
    std::vector<int> labels;
    std::vector<int> subtype;       // DefectSubtype as int
    std::vector<uint8_t> shifted;   // 1 if a scenario transform was applied
    std::vector<uint8_t> hard;      // 1 if drawn from the borderline ranges

    int label_of(size_t i) const { return labels.at(i); }
};

struct ProductionStream {
    std::vector<StreamSample> samples;
    StreamTruth truth;
};

// ---- generators ---------------------------------------------------------------

// Renders one inspection item. style_id 0 is the use-case print; other ids
// vary glyph geometry and palette for the pretraining corpus.
Image8 render_item(Rng& rng, int h, int w, DefectSubtype subtype, const DefectParams& params,
                   int style_id = 0, bool hard = false);

// Deterministic dataset of good/defective items; defect subtypes cycle
// through {pale, erased, shifted}. Throws if dims are too small for the
// glyph pattern.
Dataset generate_dataset(uint64_t seed, int h, int w, int n_good, int n_defect,
                         const DefectParams& params, const std::string& name,
                         double split_ratio = 0.8);

// Production stream per scenario; same rendering path as generate_dataset
// plus scenario-driven shifts and novel defects.
ProductionStream generate_production_stream(const Dataset& base, const DriftScenario& scenario,
                                            uint64_t seed);

// Broad corpus for VAE pretraining: varied glyph styles, palettes, and a
// share of moderately shifted variants.
std::vector<Image8> generate_pretrain_corpus(uint64_t seed, int h, int w, int count);

// ---- persistence ----------------------------------------------------------------

void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

void save_stream(const std::filesystem::path& dir, const ProductionStream& stream,
                 const DriftScenario& scenario, uint64_t seed);
ProductionStream load_stream(const std::filesystem::path& dir);

}  // namespace trimct
