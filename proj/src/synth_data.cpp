#include "gckd/synth_data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gckd/kernels.hpp"
#include "gckd/rng.hpp"

namespace gckd {

namespace {

// Fixed RNG stream ids; adding a consumer must not shift existing streams.
enum Stream : std::uint64_t {
    kSourceProtos = 0,
    kTargetProtos = 1,
    kModalityMaps = 2,
    kShiftDirections = 3,
    kSourceNoise = 4,
    kTargetNoise = 5,
    kTargetImageShuffle = 6,
    kTargetTextShuffle = 7,
};

// Covariance scaling applied to target latents: 1 + kCovScalePerShift * s.
constexpr double kCovScalePerShift = 0.25;

// Prototypes are centered within each domain so the configured offset is the
// exact mean difference between domains.
Matrix centered_prototypes(Rng& rng, std::size_t count, std::size_t d) {
    Matrix protos = gaussian_matrix(rng, count, d);
    Vector mean(d, 0.0);
    for (std::size_t i = 0; i < count; ++i)
        kernels::axpy(1.0 / static_cast<double>(count), protos.row(i), mean.data(), d);
    for (std::size_t i = 0; i < count; ++i)
        kernels::axpy(-1.0, mean.data(), protos.row(i), d);
    return protos;
}

struct ModalityMap {
    Matrix rotation;  // d_raw x d_raw orthogonal
    Vector bias;      // unit norm
};

Vector make_sample_raw(const Vector& proto, const ModalityMap& map, double gap,
                       Domain domain, const Vector& shift_offset, double cov_scale,
                       Rng& noise_rng, double sigma) {
    const std::size_t d = proto.size();
    Vector x = proto;
    if (gap > 0.0) {
        // x += gap * (R * proto + bias)
        for (std::size_t i = 0; i < d; ++i)
            x[i] += gap * (kernels::dot(map.rotation.row(i), proto.data(), d) + map.bias[i]);
    }
    if (domain == Domain::Target) {
        kernels::axpy(cov_scale - 1.0, proto.data(), x.data(), d);
        kernels::axpy(1.0, shift_offset.data(), x.data(), d);
    }
    if (sigma > 0.0) {
        std::normal_distribution<double> dist(0.0, sigma);
        for (auto& v : x) v += dist(noise_rng);
    }
    return x;
}

}  // namespace

const char* to_string(Domain d) { return d == Domain::Source ? "source" : "target"; }
const char* to_string(Modality m) { return m == Modality::Image ? "image" : "text"; }

void DatasetSpec::validate() const {
    if (num_identities_source < 1 || num_identities_target < 1)
        throw ConfigError("dataset: identity counts must be >= 1");
    if (samples_per_identity < 1)
        throw ConfigError("dataset: samples_per_identity must be >= 1");
    if (d_raw < 1) throw ConfigError("dataset: d_raw must be >= 1");
    if (domain_shift_strength < 0.0 || modality_gap_strength < 0.0 || noise_sigma < 0.0)
        throw ConfigError("dataset: strengths and noise_sigma must be >= 0");
}

SyntheticDataset generate(const DatasetSpec& spec) {
    spec.validate();
    const std::size_t d = spec.d_raw;

    Rng proto_src_rng(derive_seed(spec.rng_seed, kSourceProtos));
    Rng proto_tgt_rng(derive_seed(spec.rng_seed, kTargetProtos));
    Rng map_rng(derive_seed(spec.rng_seed, kModalityMaps));
    Rng shift_rng(derive_seed(spec.rng_seed, kShiftDirections));
    Rng noise_src_rng(derive_seed(spec.rng_seed, kSourceNoise));
    Rng noise_tgt_rng(derive_seed(spec.rng_seed, kTargetNoise));

    const Matrix src_protos = centered_prototypes(proto_src_rng, spec.num_identities_source, d);
    const Matrix tgt_protos = centered_prototypes(proto_tgt_rng, spec.num_identities_target, d);

    ModalityMap img_map{random_orthogonal(map_rng, d), random_unit_vector(map_rng, d)};
    ModalityMap txt_map{random_orthogonal(map_rng, d), random_unit_vector(map_rng, d)};

    // Shift directions differ per modality: image conditions and text style
    // drift independently across datasets. The offset is scaled to the latent
    // magnitude (~sqrt(d)) so strength is dimensionless.
    Vector shift_img = random_unit_vector(shift_rng, d);
    Vector shift_txt = random_unit_vector(shift_rng, d);

    const double s = spec.domain_shift_strength;
    const double cov_scale = 1.0 + kCovScalePerShift * s;
    const double offset_scale = s * std::sqrt(static_cast<double>(d));
    kernels::scale(shift_img.data(), d, offset_scale);
    kernels::scale(shift_txt.data(), d, offset_scale);

    SyntheticDataset out;
    out.shift_offset_image = shift_img;
    out.shift_offset_text = shift_txt;

    auto emit_domain = [&](Domain domain, const Matrix& protos, std::size_t n_ids,
                           Rng& noise_rng, std::vector<Sample>& images,
                           std::vector<Sample>& texts) {
        for (std::size_t id = 0; id < n_ids; ++id) {
            Vector proto(protos.row(id), protos.row(id) + d);
            for (std::size_t k = 0; k < spec.samples_per_identity; ++k) {
                Sample img;
                img.raw = make_sample_raw(proto, img_map, spec.modality_gap_strength,
                                          domain, shift_img, cov_scale, noise_rng,
                                          spec.noise_sigma);
                img.identity = static_cast<int>(id);
                img.modality = Modality::Image;
                img.domain = domain;
                images.push_back(std::move(img));

                Sample txt;
                txt.raw = make_sample_raw(proto, txt_map, spec.modality_gap_strength,
                                          domain, shift_txt, cov_scale, noise_rng,
                                          spec.noise_sigma);
                txt.identity = static_cast<int>(id);
                txt.modality = Modality::Text;
                txt.domain = domain;
                texts.push_back(std::move(txt));
            }
        }
    };

    emit_domain(Domain::Source, src_protos, spec.num_identities_source, noise_src_rng,
                out.source_images, out.source_texts);
    emit_domain(Domain::Target, tgt_protos, spec.num_identities_target, noise_tgt_rng,
                out.target_images, out.target_texts);

    // Unpair the target lists: independent shuffles.
    auto shuffle_inplace = [](std::vector<Sample>& v, std::uint64_t seed) {
        Rng rng(seed);
        std::shuffle(v.begin(), v.end(), rng);
    };
    shuffle_inplace(out.target_images, derive_seed(spec.rng_seed, kTargetImageShuffle));
    shuffle_inplace(out.target_texts, derive_seed(spec.rng_seed, kTargetTextShuffle));

    out.target_image_ids.reserve(out.target_images.size());
    for (const auto& smp : out.target_images) out.target_image_ids.push_back(smp.identity);
    out.target_text_ids.reserve(out.target_texts.size());
    for (const auto& smp : out.target_texts) out.target_text_ids.push_back(smp.identity);

    return out;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t count,
                                                    std::size_t batch_size,
                                                    std::uint64_t seed) {
    if (batch_size < 1) throw ParamError("batch_indices: batch_size must be >= 1");
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < count; start += batch_size) {
        const std::size_t end = std::min(count, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

std::vector<std::vector<Sample>> batch_iter(const std::vector<Sample>& set,
                                            std::size_t batch_size,
                                            std::uint64_t seed) {
    std::vector<std::vector<Sample>> out;
    for (const auto& batch : batch_indices(set.size(), batch_size, seed)) {
        std::vector<Sample> b;
        b.reserve(batch.size());
        for (auto idx : batch) b.push_back(set[idx]);
        out.push_back(std::move(b));
    }
    return out;
}

Matrix raws_to_matrix(const std::vector<Sample>& samples) {
    if (samples.empty()) return Matrix(0, 0);
    Matrix m(samples.size(), samples[0].raw.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].raw.size() != m.cols)
            throw ShapeError("raws_to_matrix: ragged sample widths");
        std::copy(samples[i].raw.begin(), samples[i].raw.end(), m.row(i));
    }
    return m;
}

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

}  // namespace

void write_records(const std::filesystem::path& path,
                   const std::vector<const std::vector<Sample>*>& blocks,
                   bool withhold_identity, const std::string& fingerprint) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << "# gckd-records v1 fingerprint=" << fingerprint << "\n";
    std::string line;
    for (const auto* block : blocks) {
        for (const Sample& smp : *block) {
            line.clear();
            line += to_string(smp.domain);
            line += ' ';
            line += to_string(smp.modality);
            line += ' ';
            line += std::to_string(withhold_identity ? -1 : smp.identity);
            for (double v : smp.raw) {
                line += ' ';
                append_double(line, v);
            }
            line += '\n';
            f << line;
        }
    }
    if (!f) throw IoError("write failed: " + path.string());
}

std::vector<Sample> read_records(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path.string());
    std::vector<Sample> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string domain, modality;
        int identity;
        if (!(ss >> domain >> modality >> identity))
            throw IoError("malformed record line in " + path.string());
        Sample smp;
        smp.domain = (domain == "source") ? Domain::Source : Domain::Target;
        smp.modality = (modality == "image") ? Modality::Image : Modality::Text;
        smp.identity = identity;
        double v;
        while (ss >> v) smp.raw.push_back(v);
        if (smp.raw.empty()) throw IoError("record with no values in " + path.string());
        out.push_back(std::move(smp));
    }
    return out;
}

}  // namespace gckd
