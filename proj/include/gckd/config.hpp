#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "gckd/synth_data.hpp"
#include "gckd/trainer.hpp"

namespace gckd {

// Flat sectioned key-value experiment configuration. Parsing is strict:
// unknown sections or keys are rejected. Seeds for the data generator and the
// trainer are derived from the single run seed.
struct ExperimentConfig {
    DatasetSpec data;
    TrainConfig train;
    AblationMode mode = AblationMode::CmkdGmp;
    std::uint64_t seed = 1;
    std::size_t ablate_seeds = 5;
    std::string output_dir = "out";

    static ExperimentConfig from_text(const std::string& text);
    static ExperimentConfig load(const std::filesystem::path& path);

    // Canonical serialization: every key, fixed order. load(canonical()) is
    // lossless.
    std::string canonical() const;

    // Hash of the canonical form with seed, mode and output_dir replaced by
    // placeholders, so runs of one experiment family share a fingerprint.
    std::uint64_t fingerprint() const;
    std::string fingerprint_hex() const;

    // Propagates the run seed into the derived data/train seeds and fills
    // dependent dims defaults. Called by load; call again after overrides.
    void finalize();
    void validate() const;
};

std::uint64_t fnv1a64(std::string_view text);

}  // namespace gckd
