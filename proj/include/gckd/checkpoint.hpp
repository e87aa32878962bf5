#pragma once

#include <cstdint>
#include <filesystem>

#include "gckd/trainer.hpp"

namespace gckd {

// Flat little-endian binary checkpoint: student + teacher parameter stacks
// (per stack: layer count, per-layer dims, then row-major doubles), memory
// banks, optimizer moments, iteration counter and RNG state.
void save_checkpoint(const std::filesystem::path& path, const TrainState& state,
                     const ModelDims& dims, std::uint64_t fingerprint);

struct LoadedCheckpoint {
    TrainState state;
    ModelDims dims;
    std::uint64_t fingerprint = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Encoder-style flat serialization of one affine stack, reused for every
// parameter group in the checkpoint.
void write_affine_stack(std::ostream& os, const std::vector<AffineLayer>& layers);
std::vector<AffineLayer> read_affine_stack(std::istream& is);

}  // namespace gckd
