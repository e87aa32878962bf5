#include "gckd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace gckd {

namespace {

constexpr char kMagic[8] = {'G', 'C', 'K', 'D', 'C', 'K', 'P', '1'};

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw IoError("checkpoint: truncated file");
    return v;
}

void put_doubles(std::ostream& os, const double* p, std::size_t n) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::istream& is, double* p, std::size_t n) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw IoError("checkpoint: truncated file");
}

void put_model(std::ostream& os, const ModelParams& p) {
    write_affine_stack(os, p.image_encoder.layers);
    write_affine_stack(os, p.text_encoder.layers);
    write_affine_stack(os, p.gnn);
    write_affine_stack(os, p.head);
}

ModelParams get_model(std::istream& is) {
    ModelParams p;
    p.image_encoder.layers = read_affine_stack(is);
    p.text_encoder.layers = read_affine_stack(is);
    p.gnn = read_affine_stack(is);
    p.head = read_affine_stack(is);
    return p;
}

void put_bank(std::ostream& os, const MemoryBank& bank) {
    put<std::uint8_t>(os, bank.domain() == Domain::Source ? 0 : 1);
    put<std::uint8_t>(os, bank.modality() == Modality::Image ? 0 : 1);
    put<std::uint64_t>(os, bank.capacity());
    const Matrix snap = bank.snapshot();
    const auto stamps = bank.stamps();
    put<std::uint64_t>(os, snap.rows);
    put<std::uint64_t>(os, snap.cols);
    put_doubles(os, snap.data.data(), snap.data.size());
    for (auto s : stamps) put<std::uint64_t>(os, s);
}

MemoryBank get_bank(std::istream& is) {
    const auto dom = get<std::uint8_t>(is) == 0 ? Domain::Source : Domain::Target;
    const auto mod = get<std::uint8_t>(is) == 0 ? Modality::Image : Modality::Text;
    const auto capacity = get<std::uint64_t>(is);
    const auto rows = get<std::uint64_t>(is);
    const auto cols = get<std::uint64_t>(is);
    Matrix snap(rows, cols);
    get_doubles(is, snap.data.data(), snap.data.size());
    std::vector<std::uint64_t> stamps(rows);
    for (auto& s : stamps) s = get<std::uint64_t>(is);
    MemoryBank bank(capacity, dom, mod);
    Matrix one(1, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        std::copy(snap.row(i), snap.row(i) + cols, one.row(0));
        bank.push_rows(one, stamps[i]);
    }
    return bank;
}

}  // namespace

void write_affine_stack(std::ostream& os, const std::vector<AffineLayer>& layers) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(layers.size()));
    for (const auto& l : layers) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(l.w.rows));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(l.w.cols));
    }
    for (const auto& l : layers) {
        put_doubles(os, l.w.data.data(), l.w.data.size());
        put_doubles(os, l.b.data(), l.b.size());
    }
}

std::vector<AffineLayer> read_affine_stack(std::istream& is) {
    const auto count = get<std::uint32_t>(is);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes(count);
    for (auto& [r, c] : shapes) {
        r = get<std::uint32_t>(is);
        c = get<std::uint32_t>(is);
    }
    std::vector<AffineLayer> layers;
    layers.reserve(count);
    for (auto [r, c] : shapes) {
        AffineLayer l{Matrix(r, c), Vector(c, 0.0)};
        get_doubles(is, l.w.data.data(), l.w.data.size());
        get_doubles(is, l.b.data(), l.b.size());
        layers.push_back(std::move(l));
    }
    return layers;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state,
                     const ModelDims& dims, std::uint64_t fingerprint) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os.write(kMagic, sizeof(kMagic));
    put<std::uint64_t>(os, fingerprint);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dims.d_raw));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dims.embed_dim));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dims.hidden_dim));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dims.gnn_layers));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dims.head_hidden));
    put<std::uint64_t>(os, state.iteration);
    put<double>(os, state.pair.momentum);
    put_model(os, state.pair.student);
    put_model(os, state.pair.teacher);
    put<std::uint64_t>(os, state.opt.step);
    put<std::uint64_t>(os, state.opt.m.size());
    put_doubles(os, state.opt.m.data(), state.opt.m.size());
    put_doubles(os, state.opt.v.data(), state.opt.v.size());
    for (const auto& bank : state.banks) put_bank(os, bank);
    std::ostringstream rng_ss;
    rng_ss << state.rng;
    const std::string rng_str = rng_ss.str();
    put<std::uint64_t>(os, rng_str.size());
    os.write(rng_str.data(), static_cast<std::streamsize>(rng_str.size()));
    if (!os) throw IoError("write failed: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw StructuralError("checkpoint: bad magic");

    LoadedCheckpoint out{
        TrainState{TeacherStudentPair{}, {}, AdamWState{}, 0, Rng{}},
        ModelDims{},
        0,
    };
    out.fingerprint = get<std::uint64_t>(is);
    out.dims.d_raw = get<std::uint32_t>(is);
    out.dims.embed_dim = get<std::uint32_t>(is);
    out.dims.hidden_dim = get<std::uint32_t>(is);
    out.dims.gnn_layers = get<std::uint32_t>(is);
    out.dims.head_hidden = get<std::uint32_t>(is);
    out.state.iteration = get<std::uint64_t>(is);
    out.state.pair.momentum = get<double>(is);
    out.state.pair.student = get_model(is);
    out.state.pair.teacher = get_model(is);
    out.state.opt.step = get<std::uint64_t>(is);
    const auto n = get<std::uint64_t>(is);
    out.state.opt.m.resize(n);
    out.state.opt.v.resize(n);
    get_doubles(is, out.state.opt.m.data(), n);
    get_doubles(is, out.state.opt.v.data(), n);
    for (int i = 0; i < 4; ++i) out.state.banks.push_back(get_bank(is));
    const auto rng_len = get<std::uint64_t>(is);
    std::string rng_str(rng_len, '\0');
    is.read(rng_str.data(), static_cast<std::streamsize>(rng_len));
    if (!is) throw IoError("checkpoint: truncated file");
    std::istringstream rng_ss(rng_str);
    rng_ss >> out.state.rng;
    if (rng_ss.fail()) throw StructuralError("checkpoint: bad rng state");
    return out;
}

}  // namespace gckd
