#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "clair/model.hpp"
#include "clair/tokens.hpp"

namespace clair {

struct DecodeConfig {
    int beam_size = 3;
    int max_new_tokens = 48;
    std::optional<std::vector<std::string>> prompt_tags;
    bool use_history_for_longform = true;
    int pad_frames = 0;  // silence frames prepended to the audio

    double pad_seconds(int frame_rate) const {
        return static_cast<double>(pad_frames) / frame_rate;
    }
};

struct Hypothesis {
    std::vector<int> tokens;  // generated tokens only (prefix excluded)
    double log_prob = 0.0;
    bool finished = false;
};

// log-probabilities of the next token given the full prefix so far
using StepScorer = std::function<std::vector<double>(const std::vector<int>&)>;

// Standard beam search, scored by the sum of token log-probs (no length
// normalization). Ties break by lower token id, then lower hypothesis index.
Hypothesis beam_search(const StepScorer& scorer, const std::vector<int>& prefix, int vocab_size,
                       int eot_id, int beam_size, int max_new_tokens);

StepScorer model_scorer(const TranscriberModel& model, const Tensor& audio_emb);

AudioFeatures pad_audio(const AudioFeatures& features, int pad_frames, int max_audio_frames);

std::string transcribe(const TranscriberModel& model, const AudioFeatures& audio,
                       const Vocab& vocab, const DecodeConfig& cfg);

// One record per decoded window, for inspecting PREV-slot behavior.
struct DecodeTraceRecord {
    int window = 0;
    std::string prev_slot_kind;  // "none" | "prompt" | "history"
    std::string prev_slot_text;
    std::string output;
};

std::string transcribe_longform(const TranscriberModel& model, const AudioFeatures& audio,
                                const Vocab& vocab, const DecodeConfig& cfg,
                                std::vector<DecodeTraceRecord>* trace = nullptr);

}  // namespace clair
