#include "clair/model.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace clair {

namespace {

// Attention over already-projected Q/K/V with optional additive mask
// (mask is a constant [Tq x Tk] tensor, no gradient).
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, int n_heads,
                            const Tensor& mask) {
    int d = q->cols();
    int dh = d / n_heads;
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> heads;
    heads.reserve(n_heads);
    for (int h = 0; h < n_heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
        Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
        Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
        Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
        if (mask) scores = add(scores, mask);
        Tensor probs = softmax(scores, -1);
        heads.push_back(matmul(probs, vh));
    }
    return concat_cols(heads);
}

Tensor causal_mask(int t_len) {
    Tensor m = make_tensor({t_len, t_len});
    for (int i = 0; i < t_len; ++i)
        for (int j = i + 1; j < t_len; ++j) m->at(i, j) = -1e30;
    return m;
}

struct Builder {
    TranscriberModel& m;
    Rng& rng;
    void mat(const std::string& name, int r, int c, double scl) {
        m.param_order.push_back(name);
        m.params[name] = randn_tensor({r, c}, rng, scl, true);
    }
    void row(const std::string& name, int c, double fill) {
        m.param_order.push_back(name);
        Tensor t = make_tensor({1, c}, true);
        for (double& v : *t->data) v = fill;
        m.params[name] = t;
    }
};

void add_attn_params(Builder& b, const std::string& prefix, int d) {
    double s = 1.0 / std::sqrt(static_cast<double>(d));
    for (const char* w : {"wq", "wk", "wv", "wo"}) b.mat(prefix + "." + w, d, d, s);
    for (const char* bn : {"bq", "bk", "bv", "bo"}) b.row(prefix + "." + bn, d, 0.0);
}

void add_ff_params(Builder& b, const std::string& prefix, int d, int d_ff) {
    b.mat(prefix + ".w1", d, d_ff, 1.0 / std::sqrt(static_cast<double>(d)));
    b.row(prefix + ".b1", d_ff, 0.0);
    b.mat(prefix + ".w2", d_ff, d, 1.0 / std::sqrt(static_cast<double>(d_ff)));
    b.row(prefix + ".b2", d, 0.0);
}

void add_ln_params(Builder& b, const std::string& prefix, int d) {
    b.row(prefix + ".g", d, 1.0);
    b.row(prefix + ".s", d, 0.0);
}

Tensor apply_ln(const TranscriberModel& m, const std::string& prefix, const Tensor& x) {
    return layer_norm(x, m.p(prefix + ".g"), m.p(prefix + ".s"));
}

Tensor apply_ff(const TranscriberModel& m, const std::string& prefix, const Tensor& x) {
    Tensor h = gelu(add_rowvec(matmul(x, m.p(prefix + ".w1")), m.p(prefix + ".b1")));
    return add_rowvec(matmul(h, m.p(prefix + ".w2")), m.p(prefix + ".b2"));
}

Tensor project(const TranscriberModel& m, const std::string& prefix, const char* w, const char* b,
               const Tensor& x) {
    return add_rowvec(matmul(x, m.p(prefix + "." + w)), m.p(prefix + "." + b));
}

Tensor self_attention_block(const TranscriberModel& m, const std::string& prefix, const Tensor& x,
                            const Tensor& mask) {
    Tensor n = apply_ln(m, prefix + ".ln", x);
    Tensor q = project(m, prefix, "wq", "bq", n);
    Tensor k = project(m, prefix, "wk", "bk", n);
    Tensor v = project(m, prefix, "wv", "bv", n);
    Tensor ctx = multi_head_attention(q, k, v, m.cfg.n_heads, mask);
    return project(m, prefix, "wo", "bo", ctx);
}

}  // namespace

void ModelConfig::validate() const {
    if (d_model <= 0 || n_heads <= 0 || n_enc_layers <= 0 || n_dec_layers <= 0 || d_ff <= 0 ||
        vocab_size <= 0 || audio_feat_dim <= 0 || max_audio_frames <= 0 || max_text_len <= 0)
        throw std::invalid_argument("ModelConfig: all dimensions must be positive");
    if (d_model % n_heads != 0)
        throw std::invalid_argument("ModelConfig: d_model must be divisible by n_heads");
}

const Tensor& TranscriberModel::p(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::out_of_range("no such parameter: " + name);
    return it->second;
}

std::vector<Tensor> TranscriberModel::parameters() const {
    std::vector<Tensor> out;
    out.reserve(param_order.size());
    for (const auto& n : param_order) out.push_back(p(n));
    return out;
}

TranscriberModel TranscriberModel::grad_view() const {
    TranscriberModel v;
    v.cfg = cfg;
    v.mode = mode;
    v.param_order = param_order;
    for (const auto& name : param_order) v.params[name] = leaf_view(p(name));
    return v;
}

uint64_t TranscriberModel::param_checksum() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& name : param_order) {
        h = hash_combine(h, hash_str(name));
        for (double d : *p(name)->data) {
            uint64_t bits;
            std::memcpy(&bits, &d, sizeof bits);
            h = hash_combine(h, bits);
        }
    }
    return h;
}

size_t TranscriberModel::total_param_count() const {
    size_t n = 0;
    for (const auto& name : param_order) n += p(name)->size();
    return n;
}

std::vector<double> sinusoidal_positions(int n, int d) {
    std::vector<double> pe(static_cast<size_t>(n) * d);
    for (int pos = 0; pos < n; ++pos) {
        for (int i = 0; i < d; i += 2) {
            double angle = pos / std::pow(10000.0, static_cast<double>(i) / d);
            pe[static_cast<size_t>(pos) * d + i] = std::sin(angle);
            if (i + 1 < d) pe[static_cast<size_t>(pos) * d + i + 1] = std::cos(angle);
        }
    }
    return pe;
}

TranscriberModel make_model(const ModelConfig& cfg) {
    cfg.validate();
    TranscriberModel m;
    m.cfg = cfg;
    Rng rng(hash_combine(cfg.rng_seed, hash_str("model-init")));
    Builder b{m, rng};
    int d = cfg.d_model;

    b.mat("enc.in_proj.w", cfg.audio_feat_dim, d, 1.0 / std::sqrt((double)cfg.audio_feat_dim));
    b.row("enc.in_proj.b", d, 0.0);
    for (int l = 0; l < cfg.n_enc_layers; ++l) {
        std::string pfx = "enc." + std::to_string(l);
        add_ln_params(b, pfx + ".attn.ln", d);
        add_attn_params(b, pfx + ".attn", d);
        add_ln_params(b, pfx + ".ff.ln", d);
        add_ff_params(b, pfx + ".ff", d, cfg.d_ff);
    }
    add_ln_params(b, "enc.final_ln", d);

    b.mat("dec.tok_emb", cfg.vocab_size, d, 0.05);
    for (int l = 0; l < cfg.n_dec_layers; ++l) {
        std::string pfx = "dec." + std::to_string(l);
        add_ln_params(b, pfx + ".attn.ln", d);
        add_attn_params(b, pfx + ".attn", d);
        add_ln_params(b, pfx + ".cross.ln", d);
        add_attn_params(b, pfx + ".cross", d);
        b.row(pfx + ".xbias", d, 0.0);  // cross-attention replacement bias
        add_ln_params(b, pfx + ".ff.ln", d);
        add_ff_params(b, pfx + ".ff", d, cfg.d_ff);
    }
    add_ln_params(b, "dec.final_ln", d);
    b.mat("dec.out_proj.w", d, cfg.vocab_size, 1.0 / std::sqrt((double)d));
    b.row("dec.out_proj.b", cfg.vocab_size, 0.0);
    return m;
}

Tensor encode_audio(const TranscriberModel& model, const AudioFeatures& features) {
    const ModelConfig& cfg = model.cfg;
    if (features.n_frames < 1) throw std::invalid_argument("encode_audio: empty audio");
    if (features.feat_dim != cfg.audio_feat_dim)
        throw std::invalid_argument("encode_audio: feature dim " +
                                    std::to_string(features.feat_dim) + " != expected " +
                                    std::to_string(cfg.audio_feat_dim));
    int n = features.n_frames, d = cfg.d_model;
    Tensor frames = make_tensor({n, cfg.audio_feat_dim}, features.frames);
    Tensor x = project(model, "enc.in_proj", "w", "b", frames);
    Tensor pe = make_tensor({n, d}, sinusoidal_positions(n, d));
    x = add(x, pe);
    for (int l = 0; l < cfg.n_enc_layers; ++l) {
        std::string pfx = "enc." + std::to_string(l);
        x = add(x, self_attention_block(model, pfx + ".attn", x, nullptr));
        x = add(x, apply_ff(model, pfx + ".ff", apply_ln(model, pfx + ".ff.ln", x)));
    }
    return apply_ln(model, "enc.final_ln", x);
}

static Tensor decoder_forward(const TranscriberModel& model, const std::vector<int>& tokens,
                              const Tensor& audio_emb, std::vector<Tensor>* cross_outputs) {
    const ModelConfig& cfg = model.cfg;
    if (tokens.empty()) throw std::invalid_argument("decoder_logits: empty token sequence");
    if (model.mode == AudioMode::CrossAttend && !audio_emb)
        throw std::invalid_argument("decoder_logits: CrossAttend mode requires an audio embedding");
    int t_len = static_cast<int>(tokens.size());
    int d = cfg.d_model;
    Tensor x = embedding_lookup(model.p("dec.tok_emb"), tokens);
    Tensor pe = make_tensor({t_len, d}, sinusoidal_positions(t_len, d));
    x = add(x, pe);
    Tensor mask = causal_mask(t_len);
    for (int l = 0; l < cfg.n_dec_layers; ++l) {
        std::string pfx = "dec." + std::to_string(l);
        x = add(x, self_attention_block(model, pfx + ".attn", x, mask));
        if (model.mode == AudioMode::CrossAttend) {
            Tensor n = apply_ln(model, pfx + ".cross.ln", x);
            Tensor q = project(model, pfx + ".cross", "wq", "bq", n);
            Tensor k = project(model, pfx + ".cross", "wk", "bk", audio_emb);
            Tensor v = project(model, pfx + ".cross", "wv", "bv", audio_emb);
            Tensor ctx = multi_head_attention(q, k, v, cfg.n_heads, nullptr);
            Tensor out = project(model, pfx + ".cross", "wo", "bo", ctx);
            if (cross_outputs) cross_outputs->push_back(out);
            x = add(x, out);
        } else {
            // bias vector replaces the cross-attention sublayer output,
            // broadcast over positions, then the usual residual add
            Tensor zero = make_tensor({t_len, d});
            x = add(x, add_rowvec(zero, model.p(pfx + ".xbias")));
        }
        x = add(x, apply_ff(model, pfx + ".ff", apply_ln(model, pfx + ".ff.ln", x)));
    }
    x = apply_ln(model, "dec.final_ln", x);
    return project(model, "dec.out_proj", "w", "b", x);
}

Tensor decoder_logits(const TranscriberModel& model, const std::vector<int>& tokens,
                      const Tensor& audio_emb) {
    return decoder_forward(model, tokens, audio_emb, nullptr);
}

std::vector<std::vector<double>> mean_cross_attention_outputs(const TranscriberModel& model,
                                                              const std::vector<int>& tokens,
                                                              const Tensor& audio_emb) {
    if (model.mode != AudioMode::CrossAttend)
        throw std::invalid_argument("mean_cross_attention_outputs: requires CrossAttend mode");
    std::vector<Tensor> outs;
    decoder_forward(model, tokens, audio_emb, &outs);
    std::vector<std::vector<double>> means;
    for (const Tensor& o : outs) {
        std::vector<double> mean(o->cols(), 0.0);
        for (int r = 0; r < o->rows(); ++r)
            for (int c = 0; c < o->cols(); ++c) mean[c] += o->at(r, c);
        for (auto& v : mean) v /= o->rows();
        means.push_back(std::move(mean));
    }
    return means;
}

void set_audio_mode(TranscriberModel& model, AudioMode mode) { model.mode = mode; }

bool is_encoder_param(const std::string& name) { return name.rfind("enc.", 0) == 0; }

std::vector<std::string> trainable_parameters(const TranscriberModel& model, ParamRegime regime) {
    std::vector<std::string> out;
    for (const auto& name : model.param_order) {
        if (regime == ParamRegime::Full || !is_encoder_param(name)) out.push_back(name);
    }
    return out;
}

}  // namespace clair
