#include "gckd/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "gckd/rng.hpp"

namespace gckd {

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    double out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ConfigError("config: bad numeric value for " + key + ": '" + v + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ConfigError("config: bad integer value for " + key + ": '" + v + "'");
    return out;
}

void append_double(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
    ExperimentConfig c;
    std::istringstream ss(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("config: malformed section at line " +
                                  std::to_string(line_no));
            section = t.substr(1, t.size() - 2);
            if (section != "data" && section != "model" && section != "train" &&
                section != "graph" && section != "memory" && section != "loss" &&
                section != "run")
                throw ConfigError("config: unknown section [" + section + "]");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected key = value at line " +
                              std::to_string(line_no));
        const std::string key = trim(t.substr(0, eq));
        const std::string val = trim(t.substr(eq + 1));
        const std::string qual = section + "." + key;

        if (qual == "data.num_identities_source") c.data.num_identities_source = parse_u64(qual, val);
        else if (qual == "data.num_identities_target") c.data.num_identities_target = parse_u64(qual, val);
        else if (qual == "data.samples_per_identity") c.data.samples_per_identity = parse_u64(qual, val);
        else if (qual == "data.d_raw") c.data.d_raw = parse_u64(qual, val);
        else if (qual == "data.domain_shift_strength") c.data.domain_shift_strength = parse_double(qual, val);
        else if (qual == "data.modality_gap_strength") c.data.modality_gap_strength = parse_double(qual, val);
        else if (qual == "data.noise_sigma") c.data.noise_sigma = parse_double(qual, val);
        else if (qual == "model.embed_dim") c.train.dims.embed_dim = parse_u64(qual, val);
        else if (qual == "model.hidden_dim") c.train.dims.hidden_dim = parse_u64(qual, val);
        else if (qual == "model.head_hidden") c.train.dims.head_hidden = parse_u64(qual, val);
        else if (qual == "model.gnn_layers") c.train.dims.gnn_layers = parse_u64(qual, val);
        else if (qual == "train.batch_size") c.train.batch_size = parse_u64(qual, val);
        else if (qual == "train.lr") c.train.lr = parse_double(qual, val);
        else if (qual == "train.weight_decay") c.train.weight_decay = parse_double(qual, val);
        else if (qual == "train.epochs") c.train.epochs = parse_u64(qual, val);
        else if (qual == "train.warmup_epochs") c.train.warmup_epochs = parse_u64(qual, val);
        else if (qual == "train.grad_clip") c.train.grad_clip = parse_double(qual, val);
        else if (qual == "train.ema_momentum") c.train.ema_momentum = parse_double(qual, val);
        else if (qual == "graph.knn_k") c.train.knn_k = parse_u64(qual, val);
        else if (qual == "graph.dump_dir") c.train.graph_dump_dir = val;
        else if (qual == "memory.capacity") c.train.memory_capacity = parse_u64(qual, val);
        else if (qual == "memory.min_fill") c.train.memory_min_fill = parse_u64(qual, val);
        else if (qual == "loss.tau") c.train.loss.tau = parse_double(qual, val);
        else if (qual == "loss.delta") c.train.loss.delta = parse_double(qual, val);
        else if (qual == "loss.lambda1") c.train.loss.lambda1 = parse_double(qual, val);
        else if (qual == "loss.lambda2") c.train.loss.lambda2 = parse_double(qual, val);
        else if (qual == "loss.lambda3") c.train.loss.lambda3 = parse_double(qual, val);
        else if (qual == "run.seed") c.seed = parse_u64(qual, val);
        else if (qual == "run.mode") c.mode = parse_mode(val);
        else if (qual == "run.ablate_seeds") c.ablate_seeds = parse_u64(qual, val);
        else if (qual == "run.output_dir") c.output_dir = val;
        else throw ConfigError("config: unknown key '" + qual + "'");
    }
    c.finalize();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open config: " + path.string());
    std::stringstream buf;
    buf << f.rdbuf();
    return from_text(buf.str());
}

void ExperimentConfig::finalize() {
    if (train.dims.hidden_dim == 0) train.dims.hidden_dim = 2 * train.dims.embed_dim;
    if (train.dims.head_hidden == 0) train.dims.head_hidden = train.dims.embed_dim;
    train.dims.d_raw = data.d_raw;
    data.rng_seed = derive_seed(seed, 1);
    train.seed = derive_seed(seed, 2);
}

void ExperimentConfig::validate() const {
    data.validate();
    train.validate();
    if (ablate_seeds < 1) throw ConfigError("config: ablate_seeds must be >= 1");
    if (output_dir.empty()) throw ConfigError("config: output_dir must be set");
}

namespace {

void emit(std::string& out, const char* key, double v) {
    out += key;
    out += " = ";
    append_double(out, v);
    out += '\n';
}
void emit(std::string& out, const char* key, std::uint64_t v) {
    out += key;
    out += " = ";
    out += std::to_string(v);
    out += '\n';
}
void emit(std::string& out, const char* key, const std::string& v) {
    out += key;
    out += " = ";
    out += v;
    out += '\n';
}

std::string canonical_with(const ExperimentConfig& c, const std::string& seed,
                           const std::string& mode, const std::string& out_dir) {
    std::string s;
    s += "[data]\n";
    emit(s, "num_identities_source", static_cast<std::uint64_t>(c.data.num_identities_source));
    emit(s, "num_identities_target", static_cast<std::uint64_t>(c.data.num_identities_target));
    emit(s, "samples_per_identity", static_cast<std::uint64_t>(c.data.samples_per_identity));
    emit(s, "d_raw", static_cast<std::uint64_t>(c.data.d_raw));
    emit(s, "domain_shift_strength", c.data.domain_shift_strength);
    emit(s, "modality_gap_strength", c.data.modality_gap_strength);
    emit(s, "noise_sigma", c.data.noise_sigma);
    s += "[model]\n";
    emit(s, "embed_dim", static_cast<std::uint64_t>(c.train.dims.embed_dim));
    emit(s, "hidden_dim", static_cast<std::uint64_t>(c.train.dims.hidden_dim));
    emit(s, "head_hidden", static_cast<std::uint64_t>(c.train.dims.head_hidden));
    emit(s, "gnn_layers", static_cast<std::uint64_t>(c.train.dims.gnn_layers));
    s += "[train]\n";
    emit(s, "batch_size", static_cast<std::uint64_t>(c.train.batch_size));
    emit(s, "lr", c.train.lr);
    emit(s, "weight_decay", c.train.weight_decay);
    emit(s, "epochs", static_cast<std::uint64_t>(c.train.epochs));
    emit(s, "warmup_epochs", static_cast<std::uint64_t>(c.train.warmup_epochs));
    emit(s, "grad_clip", c.train.grad_clip);
    emit(s, "ema_momentum", c.train.ema_momentum);
    s += "[graph]\n";
    emit(s, "knn_k", static_cast<std::uint64_t>(c.train.knn_k));
    emit(s, "dump_dir", c.train.graph_dump_dir);
    s += "[memory]\n";
    emit(s, "capacity", static_cast<std::uint64_t>(c.train.memory_capacity));
    emit(s, "min_fill", static_cast<std::uint64_t>(c.train.memory_min_fill));
    s += "[loss]\n";
    emit(s, "tau", c.train.loss.tau);
    emit(s, "delta", c.train.loss.delta);
    emit(s, "lambda1", c.train.loss.lambda1);
    emit(s, "lambda2", c.train.loss.lambda2);
    emit(s, "lambda3", c.train.loss.lambda3);
    s += "[run]\n";
    emit(s, "seed", seed);
    emit(s, "mode", mode);
    emit(s, "ablate_seeds", static_cast<std::uint64_t>(c.ablate_seeds));
    emit(s, "output_dir", out_dir);
    return s;
}

}  // namespace

std::string ExperimentConfig::canonical() const {
    return canonical_with(*this, std::to_string(seed), to_string(mode), output_dir);
}

std::uint64_t ExperimentConfig::fingerprint() const {
    return fnv1a64(canonical_with(*this, "*", "*", "*"));
}

std::string ExperimentConfig::fingerprint_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fingerprint()));
    return buf;
}

}  // namespace gckd
