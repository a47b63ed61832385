#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "trimct/synth.hpp"

using namespace trimct;

namespace {
DriftScenario quiet_scenario(int length) {
    DriftScenario sc;
    sc.name = "quiet";
    sc.length = length;
    return sc;
}
}  // namespace

TEST_CASE("dataset generation is deterministic per seed") {
    DefectParams p;
    const Dataset a = generate_dataset(7, 64, 64, 20, 12, p, "t");
    const Dataset b = generate_dataset(7, 64, 64, 20, 12, p, "t");
    REQUIRE(a.samples.size() == b.samples.size());
    for (size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].image == b.samples[i].image);
    const Dataset c = generate_dataset(8, 64, 64, 20, 12, p, "t");
    CHECK(a.samples[0].image != c.samples[0].image);
}

TEST_CASE("counts and split match the request") {
    DefectParams p;
    const Dataset ds = generate_dataset(3, 64, 64, 10, 0, p, "goods-only");
    CHECK(ds.manifest.n_good == 10);
    CHECK(ds.manifest.n_defect == 0);
    int goods = 0;
    for (const auto& s : ds.samples) goods += s.label == 0 ? 1 : 0;
    CHECK(goods == 10);

    const Dataset mixed = generate_dataset(3, 64, 64, 25, 15, p, "mixed");
    const auto train = mixed.train_indices();
    const auto val = mixed.val_indices();
    CHECK(train.size() + val.size() == 40);
    CHECK(train.size() == 32);  // 0.8 stratified split
    // both classes in both splits
    auto has_both = [&](const std::vector<size_t>& idx) {
        bool g = false, d = false;
        for (size_t i : idx) (mixed.samples[i].label == 0 ? g : d) = true;
        return g && d;
    };
    CHECK(has_both(train));
    CHECK(has_both(val));
}

TEST_CASE("bad arguments are rejected") {
    DefectParams p;
    CHECK_THROWS_AS(generate_dataset(1, 16, 16, 5, 5, p, "tiny"), Error);
    CHECK_THROWS_AS(generate_dataset(1, 64, 64, 0, 0, p, "empty"), Error);
    CHECK_THROWS_AS(generate_dataset(1, 64, 64, 4, 4, p, "ratio", 1.5), Error);
}

TEST_CASE("dataset save/load round-trip is bit-exact") {
    DefectParams p;
    const Dataset ds = generate_dataset(11, 64, 64, 8, 6, p, "rt");
    const auto dir = std::filesystem::temp_directory_path() / "trimct_test_ds";
    std::filesystem::remove_all(dir);
    save_dataset(dir, ds);
    const Dataset back = load_dataset(dir);
    REQUIRE(back.samples.size() == ds.samples.size());
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        CHECK(back.samples[i].image == ds.samples[i].image);
        CHECK(back.samples[i].label == ds.samples[i].label);
    }
    CHECK(back.manifest.split == ds.manifest.split);
    CHECK(back.manifest.defect_params == ds.manifest.defect_params);
    std::filesystem::remove_all(dir);
}

TEST_CASE("quiet scenario mirrors the original generator path") {
    DefectParams p;
    const Dataset ds = generate_dataset(5, 64, 64, 30, 20, p, "base");
    const ProductionStream s1 = generate_production_stream(ds, quiet_scenario(60), 99);
    const ProductionStream s2 = generate_production_stream(ds, quiet_scenario(60), 99);
    REQUIRE(s1.samples.size() == 60);
    for (size_t i = 0; i < s1.samples.size(); ++i) CHECK(s1.samples[i].image == s2.samples[i].image);
    // no shifts, no novel defects
    for (size_t i = 0; i < s1.samples.size(); ++i) {
        CHECK(s1.truth.shifted[i] == 0);
        CHECK(s1.truth.subtype[i] != static_cast<int>(DefectSubtype::smudge));
    }
}

TEST_CASE("full novel rate makes every defect a smudge") {
    DefectParams p;
    const Dataset ds = generate_dataset(5, 64, 64, 30, 20, p, "base");
    DriftScenario sc;
    sc.name = "novel";
    sc.novel_defect_rate = 1.0;
    sc.length = 80;
    const ProductionStream stream = generate_production_stream(ds, sc, 42);
    int defects = 0;
    for (size_t i = 0; i < stream.samples.size(); ++i) {
        if (stream.truth.labels[i] == 1) {
            ++defects;
            CHECK(stream.truth.subtype[i] == static_cast<int>(DefectSubtype::smudge));
        }
    }
    CHECK(defects > 0);
}

TEST_CASE("novel-defect images are pixel-distinct from every training defect") {
    DefectParams p;
    const Dataset ds = generate_dataset(5, 64, 64, 12, 10, p, "base");
    DriftScenario sc;
    sc.novel_defect_rate = 1.0;
    sc.defect_fraction = 1.0;
    sc.length = 10;
    const ProductionStream stream = generate_production_stream(ds, sc, 777);
    for (const auto& s : stream.samples)
        for (const auto& t : ds.samples) CHECK(s.image != t.image);
}

TEST_CASE("stream transforms are applied to the configured fraction") {
    DefectParams p;
    const Dataset ds = generate_dataset(5, 64, 64, 30, 20, p, "base");
    DriftScenario sc;
    sc.transforms = {{ShiftKind::brighten, 2.5f, ShiftRegime::harmful}};
    sc.shifted_fraction = 1.0;
    sc.length = 30;
    const ProductionStream stream = generate_production_stream(ds, sc, 4);
    for (size_t i = 0; i < stream.samples.size(); ++i) CHECK(stream.truth.shifted[i] == 1);

    sc.shifted_fraction = 0.5;
    sc.length = 200;
    const ProductionStream half = generate_production_stream(ds, sc, 4);
    int shifted = 0;
    for (auto f : half.truth.shifted) shifted += f;
    CHECK(shifted > 60);
    CHECK(shifted < 140);
}

TEST_CASE("stream save/load round-trip") {
    DefectParams p;
    const Dataset ds = generate_dataset(5, 64, 64, 10, 8, p, "base");
    DriftScenario sc = quiet_scenario(12);
    const ProductionStream stream = generate_production_stream(ds, sc, 6);
    const auto dir = std::filesystem::temp_directory_path() / "trimct_test_stream";
    std::filesystem::remove_all(dir);
    save_stream(dir, stream, sc, 6);
    const ProductionStream back = load_stream(dir);
    REQUIRE(back.samples.size() == stream.samples.size());
    for (size_t i = 0; i < stream.samples.size(); ++i) {
        CHECK(back.samples[i].image == stream.samples[i].image);
        CHECK(back.truth.labels[i] == stream.truth.labels[i]);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("pretrain corpus is deterministic and varied") {
    const auto a = generate_pretrain_corpus(21, 64, 64, 24);
    const auto b = generate_pretrain_corpus(21, 64, 64, 24);
    REQUIRE(a.size() == 24);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    // images differ from each other (styles/palettes vary)
    int distinct = 0;
    for (size_t i = 1; i < a.size(); ++i) distinct += a[i] != a[0] ? 1 : 0;
    CHECK(distinct == 23);
}
