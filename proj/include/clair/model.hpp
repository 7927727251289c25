#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "clair/tensor.hpp"

namespace clair {

struct ModelConfig {
    int d_model = 64;
    int n_heads = 4;
    int n_enc_layers = 2;
    int n_dec_layers = 2;
    int d_ff = 256;
    int vocab_size = 0;
    int audio_feat_dim = 16;
    int max_audio_frames = 120;
    int max_text_len = 96;
    uint64_t rng_seed = 1;

    void validate() const;
};

enum class AudioMode { CrossAttend, TextOnly };

struct AudioFeatures {
    int n_frames = 0;
    int feat_dim = 0;
    std::vector<double> frames;  // row-major [n_frames x feat_dim]
};

enum class ParamRegime { Full, DecoderOnlyPlusBiases };

// Encoder-decoder transcriber. Pre-layer-norm blocks, fixed sinusoidal
// positional encodings. Each decoder layer carries a learnable bias vector
// ("dec.{l}.xbias"); in TextOnly mode that vector replaces the cross-attention
// sublayer output (before the residual add) and no audio path exists.
struct TranscriberModel {
    ModelConfig cfg;
    AudioMode mode = AudioMode::CrossAttend;
    std::vector<std::string> param_order;
    std::unordered_map<std::string, Tensor> params;

    const Tensor& p(const std::string& name) const;
    std::vector<Tensor> parameters() const;  // in param_order

    // Aliased-storage copy with private gradient buffers; shares data with
    // this model so several workers can build independent graphs.
    TranscriberModel grad_view() const;

    uint64_t param_checksum() const;
    size_t total_param_count() const;
};

TranscriberModel make_model(const ModelConfig& cfg);

Tensor encode_audio(const TranscriberModel& model, const AudioFeatures& features);

// audio_emb may be null only in TextOnly mode (it is ignored there).
Tensor decoder_logits(const TranscriberModel& model, const std::vector<int>& tokens,
                      const Tensor& audio_emb);

void set_audio_mode(TranscriberModel& model, AudioMode mode);

// Per-decoder-layer cross-attention sublayer outputs averaged over positions,
// computed in CrossAttend mode. Text-only training warm-starts the replacement
// biases from these so the decoder keeps seeing familiar activations.
std::vector<std::vector<double>> mean_cross_attention_outputs(const TranscriberModel& model,
                                                              const std::vector<int>& tokens,
                                                              const Tensor& audio_emb);

std::vector<std::string> trainable_parameters(const TranscriberModel& model, ParamRegime regime);

bool is_encoder_param(const std::string& name);

// Fixed sinusoidal positional encoding table [n x d].
std::vector<double> sinusoidal_positions(int n, int d);

}  // namespace clair
