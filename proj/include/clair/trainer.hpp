#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clair/corpus.hpp"
#include "clair/model.hpp"
#include "clair/tokens.hpp"

namespace clair {

enum class Regime { Pretrain, PromptAudioText, PromptTextOnly, DaAudioText, DaTextOnly };

std::string regime_name(Regime r);
Regime regime_from_name(const std::string& name);

// Text-only regimes train the decoder plus biases in TextOnly mode;
// the others train the full model with cross-attention.
bool regime_is_text_only(Regime r);
bool regime_uses_prompts(Regime r);

struct TrainConfig {
    Regime regime = Regime::Pretrain;
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double weight_decay = 0.01;
    // Larger eps makes small-gradient coordinates move in proportion to their
    // gradient instead of at the full Adam step; text-only regimes rely on it
    // to adapt gently without unlearning the audio pathway.
    double adam_eps = 1e-8;
    // Learning-rate multiplier for the decoder's structural weights
    // (self-attention, feed-forward, layer norms) relative to the lexical
    // ones (token embedding, output projection, cross-attention biases).
    // Text-only regimes keep structure nearly frozen: transcripts alone
    // cannot teach alignment, only vocabulary preferences, so letting the
    // structural weights chase the text objective unlearns audio alignment.
    double structural_lr_scale = 1.0;
    int batch_size = 16;
    int max_steps = 4000;
    int eval_every = 0;  // 0 disables periodic eval
    double grad_clip_norm = 1.0;
    uint64_t seed = 1;

    void validate() const;
    static TrainConfig defaults_for(Regime r, uint64_t seed);
};

struct TrainLogEntry {
    int step = 0;
    double loss = 0.0;
    std::optional<double> eval_wer;
};

struct TrainLog {
    std::vector<TrainLogEntry> entries;
    void save(const std::string& path) const;  // append-only JSONL
};

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double weight_decay = 0.01;
    double eps = 1e-8;
    // Optional per-parameter learning-rate multipliers, parallel to the
    // parameter list; empty means 1.0 for every parameter.
    std::vector<double> lr_scales;
};

struct AdamWState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    int64_t t = 0;

    void init_for(const std::vector<Tensor>& params);
};

// One decoupled-weight-decay update from the grads stored in `params`.
// Returns false (and leaves params/state untouched) on non-finite grads.
bool adamw_step(const std::vector<Tensor>& params, AdamWState& state, const AdamWConfig& cfg);

// Builds the regime's decoder input for one training sample.
DecoderInput training_decoder_input(const Sample& sample, const Vocab& vocab, Regime regime,
                                    double p_noprompt, Rng& rng);

// Runs one regime over `data`, mutating `model`. Throws on divergence
// (loss > 10x initial for 100 consecutive steps).
void train(TranscriberModel& model, const std::vector<Sample>& data, const Vocab& vocab,
           double p_noprompt, const TrainConfig& cfg, TrainLog* log = nullptr,
           const std::vector<Sample>* eval_set = nullptr);

}  // namespace clair
