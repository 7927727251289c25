#include "clair/decode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace clair {

namespace {

std::vector<double> log_softmax_row(const Tensor& logits, int row) {
    int v = logits->cols();
    std::vector<double> out(v);
    const double* in = logits->data->data() + static_cast<size_t>(row) * v;
    double mx = in[0];
    for (int j = 1; j < v; ++j) mx = std::max(mx, in[j]);
    double denom = 0.0;
    for (int j = 0; j < v; ++j) denom += std::exp(in[j] - mx);
    double lse = mx + std::log(denom);
    for (int j = 0; j < v; ++j) out[j] = in[j] - lse;
    return out;
}

std::vector<int> infer_prefix_with_history(const Vocab& vocab, const std::string& history) {
    std::vector<int> ids = {TOK_PREV};
    for (int id : vocab.tokenize_lossy(history)) ids.push_back(id);
    for (int id : {TOK_SOT, TOK_LANG_EN, TOK_TRANSCRIBE, TOK_NOTIMESTAMPS}) ids.push_back(id);
    return ids;
}

std::string decode_window(const TranscriberModel& model, const AudioFeatures& window,
                          const Vocab& vocab, const DecodeConfig& cfg,
                          const std::optional<std::string>& history, int window_index,
                          std::vector<DecodeTraceRecord>* trace) {
    AudioFeatures padded = pad_audio(window, cfg.pad_frames, model.cfg.max_audio_frames);
    Tensor audio_emb = encode_audio(model, padded);
    std::vector<int> prefix;
    DecodeTraceRecord rec;
    rec.window = window_index;
    if (cfg.prompt_tags) {
        // the prompt occupies the PREV slot; history is dropped, the two
        // never coexist
        DecoderInput di = build_decoder_input(vocab, cfg.prompt_tags, std::nullopt,
                                              BuildMode::Infer);
        prefix = di.tokens;
        rec.prev_slot_kind = "prompt";
        rec.prev_slot_text = format_prompt(*cfg.prompt_tags);
    } else if (history && !history->empty()) {
        prefix = infer_prefix_with_history(vocab, *history);
        rec.prev_slot_kind = "history";
        rec.prev_slot_text = *history;
    } else {
        DecoderInput di = build_decoder_input(vocab, std::nullopt, std::nullopt, BuildMode::Infer);
        prefix = di.tokens;
        rec.prev_slot_kind = "none";
    }
    Hypothesis best = beam_search(model_scorer(model, audio_emb), prefix, model.cfg.vocab_size,
                                  TOK_EOT, cfg.beam_size, cfg.max_new_tokens);
    std::vector<int> words;
    for (int id : best.tokens)
        if (id != TOK_EOT) words.push_back(id);
    std::string text = vocab.detokenize(words);
    if (trace) {
        rec.output = text;
        trace->push_back(rec);
    }
    return text;
}

}  // namespace

Hypothesis beam_search(const StepScorer& scorer, const std::vector<int>& prefix, int vocab_size,
                       int eot_id, int beam_size, int max_new_tokens) {
    if (beam_size < 1) throw std::invalid_argument("beam_search: beam_size must be >= 1");
    std::vector<Hypothesis> live = {Hypothesis{}};
    std::vector<Hypothesis> finished;
    for (int step = 0; step < max_new_tokens && !live.empty(); ++step) {
        struct Cand {
            double score;
            int token;
            int hyp;
        };
        std::vector<Cand> cands;
        cands.reserve(live.size() * vocab_size);
        for (size_t h = 0; h < live.size(); ++h) {
            std::vector<int> seq = prefix;
            seq.insert(seq.end(), live[h].tokens.begin(), live[h].tokens.end());
            std::vector<double> logp = scorer(seq);
            if (static_cast<int>(logp.size()) != vocab_size)
                throw std::invalid_argument("beam_search: scorer returned wrong width");
            for (int t = 0; t < vocab_size; ++t)
                cands.push_back({live[h].log_prob + logp[t], t, static_cast<int>(h)});
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.token != b.token) return a.token < b.token;
            return a.hyp < b.hyp;
        });
        std::vector<Hypothesis> next;
        for (const Cand& cd : cands) {
            if (static_cast<int>(next.size()) >= beam_size) break;
            Hypothesis h = live[cd.hyp];
            h.tokens.push_back(cd.token);
            h.log_prob = cd.score;
            if (cd.token == eot_id) {
                h.finished = true;
                finished.push_back(std::move(h));
            } else {
                next.push_back(std::move(h));
            }
        }
        live = std::move(next);
    }
    for (auto& h : live) {
        h.finished = true;  // length cap reached
        finished.push_back(std::move(h));
    }
    if (finished.empty()) throw std::logic_error("beam_search: no hypotheses");
    const Hypothesis* best = &finished[0];
    for (const auto& h : finished) {
        if (h.log_prob > best->log_prob ||
            (h.log_prob == best->log_prob && h.tokens < best->tokens))
            best = &h;
    }
    return *best;
}

StepScorer model_scorer(const TranscriberModel& model, const Tensor& audio_emb) {
    return [&model, audio_emb](const std::vector<int>& seq) {
        Tensor logits = decoder_logits(model, seq, audio_emb);
        return log_softmax_row(logits, logits->rows() - 1);
    };
}

AudioFeatures pad_audio(const AudioFeatures& features, int pad_frames, int max_audio_frames) {
    if (pad_frames < 0) throw std::invalid_argument("pad_audio: pad_frames must be >= 0");
    if (features.n_frames + pad_frames > max_audio_frames)
        throw std::invalid_argument(
            "pad_audio: padded length " + std::to_string(features.n_frames + pad_frames) +
            " exceeds max_audio_frames " + std::to_string(max_audio_frames) +
            "; shrink the window");
    if (pad_frames == 0) return features;
    AudioFeatures out;
    out.feat_dim = features.feat_dim;
    out.n_frames = features.n_frames + pad_frames;
    out.frames.assign(static_cast<size_t>(pad_frames) * features.feat_dim, 0.0);
    out.frames.insert(out.frames.end(), features.frames.begin(), features.frames.end());
    return out;
}

std::string transcribe(const TranscriberModel& model, const AudioFeatures& audio,
                       const Vocab& vocab, const DecodeConfig& cfg) {
    if (model.mode != AudioMode::CrossAttend)
        throw std::invalid_argument("transcribe: model must be in CrossAttend mode");
    if (audio.n_frames + cfg.pad_frames > model.cfg.max_audio_frames)
        throw std::invalid_argument("transcribe: audio exceeds max_audio_frames; use "
                                    "transcribe_longform for long inputs");
    return decode_window(model, audio, vocab, cfg, std::nullopt, 0, nullptr);
}

std::string transcribe_longform(const TranscriberModel& model, const AudioFeatures& audio,
                                const Vocab& vocab, const DecodeConfig& cfg,
                                std::vector<DecodeTraceRecord>* trace) {
    if (model.mode != AudioMode::CrossAttend)
        throw std::invalid_argument("transcribe_longform: model must be in CrossAttend mode");
    int window_len = model.cfg.max_audio_frames - cfg.pad_frames;
    if (window_len < 1) throw std::invalid_argument("transcribe_longform: pad_frames too large");
    std::string result;
    std::optional<std::string> history;
    int window_index = 0;
    for (int start = 0; start < audio.n_frames; start += window_len, ++window_index) {
        int len = std::min(window_len, audio.n_frames - start);
        AudioFeatures window;
        window.feat_dim = audio.feat_dim;
        window.n_frames = len;
        window.frames.assign(
            audio.frames.begin() + static_cast<size_t>(start) * audio.feat_dim,
            audio.frames.begin() + static_cast<size_t>(start + len) * audio.feat_dim);
        std::string text = decode_window(model, window, vocab, cfg, history, window_index, trace);
        if (!result.empty() && !text.empty()) result += ' ';
        result += text;
        if (cfg.use_history_for_longform && !cfg.prompt_tags) history = text;
    }
    return result;
}

}  // namespace clair
