#include "clair/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace clair {

namespace {

using nlohmann::json;

constexpr char kMagic[6] = {'C', 'L', 'A', 'I', 'R', '1'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is)
        throw std::runtime_error("checkpoint truncated at byte offset " +
                                 std::to_string(static_cast<long long>(is.tellg())) + ": " + path);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_bytes(std::ostream& os, const void* data, size_t len) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(len));
}

void read_bytes(std::istream& is, void* data, size_t len, const std::string& path) {
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(len));
    if (!is || is.gcount() != static_cast<std::streamsize>(len))
        throw std::runtime_error("checkpoint truncated at byte offset " +
                                 std::to_string(static_cast<long long>(is.tellg())) + ": " + path);
}

json config_to_json(const ModelConfig& c) {
    json j;
    j["d_model"] = c.d_model;
    j["n_heads"] = c.n_heads;
    j["n_enc_layers"] = c.n_enc_layers;
    j["n_dec_layers"] = c.n_dec_layers;
    j["d_ff"] = c.d_ff;
    j["vocab_size"] = c.vocab_size;
    j["audio_feat_dim"] = c.audio_feat_dim;
    j["max_audio_frames"] = c.max_audio_frames;
    j["max_text_len"] = c.max_text_len;
    j["rng_seed"] = c.rng_seed;
    return j;
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.d_model = j.at("d_model");
    c.n_heads = j.at("n_heads");
    c.n_enc_layers = j.at("n_enc_layers");
    c.n_dec_layers = j.at("n_dec_layers");
    c.d_ff = j.at("d_ff");
    c.vocab_size = j.at("vocab_size");
    c.audio_feat_dim = j.at("audio_feat_dim");
    c.max_audio_frames = j.at("max_audio_frames");
    c.max_text_len = j.at("max_text_len");
    c.rng_seed = j.at("rng_seed");
    return c;
}

}  // namespace

void save_checkpoint(const TranscriberModel& model, const CheckpointMeta& meta,
                     const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    f.write(kMagic, sizeof kMagic);
    write_u32(f, kVersion);
    json header;
    header["config"] = config_to_json(model.cfg);
    header["metadata"] = {{"regime", meta.regime},
                          {"seed", meta.seed},
                          {"steps", meta.steps},
                          {"parent_hash", meta.parent_hash}};
    std::string hs = header.dump();
    write_u32(f, static_cast<uint32_t>(hs.size()));
    write_bytes(f, hs.data(), hs.size());
    write_u32(f, static_cast<uint32_t>(model.param_order.size()));
    for (const auto& name : model.param_order) {
        const Tensor& t = model.p(name);
        write_u32(f, static_cast<uint32_t>(name.size()));
        write_bytes(f, name.data(), name.size());
        write_u32(f, static_cast<uint32_t>(t->shape.size()));
        for (int d : t->shape) write_u32(f, static_cast<uint32_t>(d));
        std::vector<float> payload(t->data->begin(), t->data->end());
        write_bytes(f, payload.data(), payload.size() * sizeof(float));
    }
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[6];
    read_bytes(f, magic, 6, path);
    if (std::memcmp(magic, kMagic, 6) != 0)
        throw std::runtime_error("not a CLAIR1 checkpoint (bad magic): " + path);
    uint32_t version = read_u32(f, path);
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                                 ": " + path);
    uint32_t header_len = read_u32(f, path);
    std::string hs(header_len, '\0');
    read_bytes(f, hs.data(), header_len, path);
    json header = json::parse(hs);
    Checkpoint out;
    out.model.cfg = config_from_json(header.at("config"));
    const json& md = header.at("metadata");
    out.meta.regime = md.at("regime");
    out.meta.seed = md.at("seed");
    out.meta.steps = md.at("steps");
    out.meta.parent_hash = md.at("parent_hash");

    uint32_t n_tensors = read_u32(f, path);
    for (uint32_t i = 0; i < n_tensors; ++i) {
        uint32_t name_len = read_u32(f, path);
        std::string name(name_len, '\0');
        read_bytes(f, name.data(), name_len, path);
        uint32_t ndim = read_u32(f, path);
        std::vector<int> shape(ndim);
        size_t numel = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            shape[d] = static_cast<int>(read_u32(f, path));
            numel *= static_cast<size_t>(shape[d]);
        }
        std::vector<float> payload(numel);
        read_bytes(f, payload.data(), numel * sizeof(float), path);
        std::vector<double> values(payload.begin(), payload.end());
        out.model.param_order.push_back(name);
        out.model.params[name] = make_tensor(shape, std::move(values), true);
    }
    // text-only checkpoints record training mode in metadata; loaded models
    // always start in CrossAttend, the inference-time mode
    out.model.mode = AudioMode::CrossAttend;
    return out;
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot hash file: " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[4096];
    while (f) {
        f.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace clair
