#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gckd/numerics.hpp"

namespace gckd {

enum class Domain { Source, Target };
enum class Modality { Image, Text };

const char* to_string(Domain d);
const char* to_string(Modality m);

struct Sample {
    Vector raw;
    int identity = -1;  // -1 = withheld (target-domain records)
    Modality modality = Modality::Image;
    Domain domain = Domain::Source;
};

struct DatasetSpec {
    std::size_t num_identities_source = 200;
    std::size_t num_identities_target = 200;
    std::size_t samples_per_identity = 4;  // per modality
    std::size_t d_raw = 64;
    double domain_shift_strength = 1.0;
    double modality_gap_strength = 0.5;
    double noise_sigma = 0.05;
    std::uint64_t rng_seed = 1;

    void validate() const;
};

// Paired source lists (source_images[i] matches source_texts[i]) and
// independently shuffled unpaired target lists. Target identities are kept
// in the sidecar arrays; they are consumed by the evaluator only.
struct SyntheticDataset {
    std::vector<Sample> source_images;
    std::vector<Sample> source_texts;
    std::vector<Sample> target_images;
    std::vector<Sample> target_texts;
    std::vector<int> target_image_ids;
    std::vector<int> target_text_ids;
    // per-modality target offset actually applied (norm = shift strength)
    Vector shift_offset_image;
    Vector shift_offset_text;
};

SyntheticDataset generate(const DatasetSpec& spec);

// Shuffled epoch order, deterministic per seed; the final partial batch is
// emitted. batch_size must be >= 1.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t count,
                                                    std::size_t batch_size,
                                                    std::uint64_t seed);
std::vector<std::vector<Sample>> batch_iter(const std::vector<Sample>& set,
                                            std::size_t batch_size,
                                            std::uint64_t seed);

Matrix raws_to_matrix(const std::vector<Sample>& samples);

// Line-delimited record files: "# ..." comment header, then one sample per
// line as "<domain> <modality> <identity> v0 v1 ...". Floats use shortest
// round-trip formatting. withhold_identity writes -1 in the identity column.
void write_records(const std::filesystem::path& path,
                   const std::vector<const std::vector<Sample>*>& blocks,
                   bool withhold_identity, const std::string& fingerprint);
std::vector<Sample> read_records(const std::filesystem::path& path);

}  // namespace gckd
