#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "gckd/kernels.hpp"
#include "gckd/synth_data.hpp"

using namespace gckd;

namespace {

DatasetSpec small_spec() {
    DatasetSpec s;
    s.num_identities_source = 6;
    s.num_identities_target = 5;
    s.samples_per_identity = 3;
    s.d_raw = 8;
    s.rng_seed = 31;
    return s;
}

Vector block_mean(const std::vector<Sample>& samples) {
    Vector mean(samples[0].raw.size(), 0.0);
    for (const auto& s : samples)
        kernels::axpy(1.0 / static_cast<double>(samples.size()), s.raw.data(),
                      mean.data(), mean.size());
    return mean;
}

}  // namespace

TEST_CASE("all perturbations off: modalities coincide per identity") {
    DatasetSpec s = small_spec();
    s.domain_shift_strength = 0.0;
    s.modality_gap_strength = 0.0;
    s.noise_sigma = 0.0;
    auto ds = generate(s);
    for (std::size_t i = 0; i < ds.source_images.size(); ++i) {
        REQUIRE(ds.source_images[i].identity == ds.source_texts[i].identity);
        CHECK(ds.source_images[i].raw == ds.source_texts[i].raw);
    }
}

TEST_CASE("same spec and seed twice: bitwise-identical datasets") {
    DatasetSpec s = small_spec();
    auto a = generate(s);
    auto b = generate(s);
    REQUIRE(a.source_images.size() == b.source_images.size());
    for (std::size_t i = 0; i < a.source_images.size(); ++i)
        CHECK(a.source_images[i].raw == b.source_images[i].raw);
    for (std::size_t i = 0; i < a.target_texts.size(); ++i) {
        CHECK(a.target_texts[i].raw == b.target_texts[i].raw);
        CHECK(a.target_texts[i].identity == b.target_texts[i].identity);
    }
}

TEST_CASE("pure shift: per-modality mean difference norm equals the offset norm") {
    DatasetSpec s = small_spec();
    s.num_identities_source = 40;
    s.num_identities_target = 30;
    s.domain_shift_strength = 1.7;
    s.modality_gap_strength = 0.0;
    s.noise_sigma = 0.0;
    auto ds = generate(s);

    auto check_modality = [&](const std::vector<Sample>& src,
                              const std::vector<Sample>& tgt, const Vector& offset) {
        Vector diff = block_mean(tgt);
        const Vector ms = block_mean(src);
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= ms[i];
        const double norm = std::sqrt(kernels::squared_norm(diff.data(), diff.size()));
        const double offset_norm =
            std::sqrt(kernels::squared_norm(offset.data(), offset.size()));
        // offset norm = strength * sqrt(d_raw): dimensionless strength knob
        CHECK(offset_norm == doctest::Approx(1.7 * std::sqrt(8.0)).epsilon(1e-12));
        CHECK(norm == doctest::Approx(offset_norm).epsilon(1e-9));
        for (std::size_t i = 0; i < diff.size(); ++i)
            CHECK(diff[i] == doctest::Approx(offset[i]).epsilon(1e-9));
    };
    check_modality(ds.source_images, ds.target_images, ds.shift_offset_image);
    check_modality(ds.source_texts, ds.target_texts, ds.shift_offset_text);
}

TEST_CASE("sample counts follow from the dataset spec") {
    DatasetSpec s = small_spec();
    auto ds = generate(s);
    CHECK(ds.source_images.size() == s.num_identities_source * s.samples_per_identity);
    CHECK(ds.source_texts.size() == s.num_identities_source * s.samples_per_identity);
    CHECK(ds.target_images.size() == s.num_identities_target * s.samples_per_identity);
    CHECK(ds.target_image_ids.size() == ds.target_images.size());
}

TEST_CASE("noiseless zero-gap data is perfectly retrievable cross-modally") {
    DatasetSpec s = small_spec();
    s.domain_shift_strength = 0.0;
    s.modality_gap_strength = 0.0;
    s.noise_sigma = 0.0;
    auto ds = generate(s);
    // nearest image (by cosine) for every text shares the identity
    for (const auto& txt : ds.source_texts) {
        double best = -2.0;
        int best_id = -1;
        for (const auto& img : ds.source_images) {
            const double sim = cosine_sim(txt.raw, img.raw);
            if (sim > best) {
                best = sim;
                best_id = img.identity;
            }
        }
        CHECK(best_id == txt.identity);
    }
}

TEST_CASE("dataset spec validation") {
    DatasetSpec s = small_spec();
    s.num_identities_target = 0;
    CHECK_THROWS_AS(generate(s), ConfigError);
    s = small_spec();
    s.noise_sigma = -0.1;
    CHECK_THROWS_AS(generate(s), ConfigError);
}

TEST_CASE("batch_indices sizes and determinism") {
    auto batches = batch_indices(10, 4, 7);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].size() == 4);
    CHECK(batches[1].size() == 4);
    CHECK(batches[2].size() == 2);

    auto ones = batch_indices(5, 1, 3);
    std::set<std::size_t> seen;
    for (const auto& b : ones) {
        REQUIRE(b.size() == 1);
        seen.insert(b[0]);
    }
    CHECK(seen.size() == 5);

    CHECK(batch_indices(10, 4, 7) == batches);
    CHECK(batch_indices(0, 4, 7).empty());
    CHECK_THROWS_AS(batch_indices(10, 0, 7), ParamError);

    // sample-materializing variant mirrors the index batches
    DatasetSpec s = small_spec();
    auto ds = generate(s);
    auto sample_batches = batch_iter(ds.source_images, 4, 7);
    auto idx_batches = batch_indices(ds.source_images.size(), 4, 7);
    REQUIRE(sample_batches.size() == idx_batches.size());
    for (std::size_t b = 0; b < sample_batches.size(); ++b)
        for (std::size_t i = 0; i < sample_batches[b].size(); ++i)
            CHECK(sample_batches[b][i].raw == ds.source_images[idx_batches[b][i]].raw);
}

TEST_CASE("record files round-trip and withhold target identities") {
    DatasetSpec s = small_spec();
    auto ds = generate(s);
    const auto dir = std::filesystem::temp_directory_path() / "gckd_records_test";
    std::filesystem::create_directories(dir);

    write_records(dir / "src.records", {&ds.source_images, &ds.source_texts}, false,
                  "cafe");
    auto src = read_records(dir / "src.records");
    REQUIRE(src.size() == ds.source_images.size() + ds.source_texts.size());
    for (std::size_t i = 0; i < ds.source_images.size(); ++i) {
        CHECK(src[i].raw == ds.source_images[i].raw);  // shortest round-trip is exact
        CHECK(src[i].identity == ds.source_images[i].identity);
        CHECK(src[i].modality == Modality::Image);
        CHECK(src[i].domain == Domain::Source);
    }

    write_records(dir / "tgt.records", {&ds.target_images}, true, "cafe");
    auto tgt = read_records(dir / "tgt.records");
    for (const auto& smp : tgt) CHECK(smp.identity == -1);

    std::filesystem::remove_all(dir);
}
