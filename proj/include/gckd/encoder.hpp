#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gckd/numerics.hpp"
#include "gckd/synth_data.hpp"

namespace gckd {

struct AffineLayer {
    Matrix w;  // d_in x d_out
    Vector b;  // d_out
    bool operator==(const AffineLayer&) const = default;
};

// Per-modality encoder: affine stack with tanh between layers, final layer
// linear followed by row L2 normalization.
struct EncoderParams {
    std::vector<AffineLayer> layers;
    bool operator==(const EncoderParams&) const = default;

    std::size_t input_dim() const { return layers.front().w.rows; }
    std::size_t output_dim() const { return layers.back().w.cols; }
};

enum class Provenance { Student, Teacher };

enum class FeatureRole {
    SourceImage,
    SourceText,
    TargetImage,
    TargetText,
    TeacherTargetImage,
    TeacherTargetText,
};

struct FeatureBatch {
    Matrix features;  // B x D, unit-norm rows
    Domain domain = Domain::Source;
    Modality modality = Modality::Image;
    Provenance provenance = Provenance::Student;
    FeatureRole role = FeatureRole::SourceImage;
};

// Throws UsageError when the role's implied domain/modality disagree with
// the batch tags, or when rows are not unit norm.
void validate_feature_batch(const FeatureBatch& fb);
FeatureRole feature_role(Domain d, Modality m, Provenance p);

// Affine stack with tanh hidden activations and a linear final layer.
struct MlpCache {
    Matrix input;
    std::vector<Matrix> pre;   // z_l per layer
    std::vector<Matrix> acts;  // tanh(z_l) for hidden layers
};
Matrix mlp_forward(const std::vector<AffineLayer>& layers, const Matrix& input,
                   MlpCache* cache);
// Accumulates parameter gradients into `grads` (same shapes as `layers`) and
// returns the gradient with respect to the input.
Matrix mlp_backward(const std::vector<AffineLayer>& layers, const MlpCache& cache,
                    const Matrix& d_output, std::vector<AffineLayer>& grads);

struct EncoderCache {
    MlpCache mlp;
    Vector norms;       // pre-normalization row norms
    Matrix normalized;  // forward output
};

Matrix encoder_forward(const EncoderParams& params, const Matrix& raw,
                       EncoderCache* cache = nullptr);
Matrix encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                        const Matrix& d_normalized, EncoderParams& grads);

// Sample-level forward over tagged samples; all samples must share a modality.
FeatureBatch forward(const EncoderParams& params, std::span<const Sample> batch,
                     Provenance provenance);

// Weights uniform in [-1/sqrt(d_in), 1/sqrt(d_in)], biases zero.
// dims = {d_in, hidden..., d_out}.
EncoderParams init_encoder(std::uint64_t seed, const std::vector<std::size_t>& dims);
std::vector<AffineLayer> init_affine_stack(std::uint64_t seed,
                                           const std::vector<std::size_t>& dims);

EncoderParams clone_params(const EncoderParams& p);

std::vector<AffineLayer> zeros_like(const std::vector<AffineLayer>& layers);

}  // namespace gckd
