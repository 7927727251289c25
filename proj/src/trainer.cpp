#include "clair/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <json.hpp>

#include "clair/decode.hpp"
#include "clair/metrics.hpp"

namespace clair {

namespace {

struct RegimeTraits {
    const char* name;
    bool text_only;
    bool prompts;
};

const RegimeTraits kRegimes[] = {
    {"pretrain", false, false},
    {"prompt_audio_text", false, true},
    {"prompt_text_only", true, true},
    {"da_audio_text", false, false},
    {"da_text_only", true, false},
};

}  // namespace

std::string regime_name(Regime r) { return kRegimes[static_cast<int>(r)].name; }

Regime regime_from_name(const std::string& name) {
    for (int i = 0; i < 5; ++i)
        if (name == kRegimes[i].name) return static_cast<Regime>(i);
    throw std::invalid_argument("unknown training regime: '" + name + "'");
}

bool regime_is_text_only(Regime r) { return kRegimes[static_cast<int>(r)].text_only; }
bool regime_uses_prompts(Regime r) { return kRegimes[static_cast<int>(r)].prompts; }

void TrainConfig::validate() const {
    if (learning_rate <= 0 || beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1 ||
        weight_decay < 0 || batch_size < 1 || max_steps < 1 || grad_clip_norm <= 0)
        throw std::invalid_argument("TrainConfig: hyperparameters out of range");
}

TrainConfig TrainConfig::defaults_for(Regime r, uint64_t seed) {
    TrainConfig cfg;
    cfg.regime = r;
    cfg.seed = seed;
    if (r == Regime::Pretrain) {
        cfg.learning_rate = 3e-4;
        cfg.max_steps = 4000;
    } else {
        cfg.learning_rate = regime_uses_prompts(r) && !regime_is_text_only(r) ? 3e-4 : 1e-4;
        cfg.max_steps = 1000;
    }
    if (regime_is_text_only(r)) {
        cfg.adam_eps = 1e-3;
        // the prompt regime trains only the tag embedding rows, which need a
        // high rate to pick up domain identity within the step budget
        cfg.learning_rate = r == Regime::PromptTextOnly ? 1e-2 : 3e-4;
        cfg.structural_lr_scale = 0.0;
    }
    return cfg;
}

void TrainLog::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write train log: " + path);
    for (const auto& e : entries) {
        nlohmann::json j;
        j["step"] = e.step;
        j["loss"] = e.loss;
        if (e.eval_wer) j["eval_wer"] = *e.eval_wer;
        f << j.dump() << '\n';
    }
}

void AdamWState::init_for(const std::vector<Tensor>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
        m.emplace_back(p->size(), 0.0);
        v.emplace_back(p->size(), 0.0);
    }
    t = 0;
}

bool adamw_step(const std::vector<Tensor>& params, AdamWState& state, const AdamWConfig& cfg) {
    if (state.m.size() != params.size())
        throw std::invalid_argument("adamw_step: state does not match parameter list");
    for (size_t i = 0; i < params.size(); ++i) {
        if (state.m[i].size() != params[i]->size())
            throw std::invalid_argument("adamw_step: state shape mismatch at parameter " +
                                        std::to_string(i));
        params[i]->ensure_grad();
        for (double g : params[i]->grad)
            if (!std::isfinite(g)) return false;  // skip the whole step
    }
    if (!cfg.lr_scales.empty() && cfg.lr_scales.size() != params.size())
        throw std::invalid_argument("adamw_step: lr_scales does not match parameter list");
    ++state.t;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        std::vector<double>& w = *params[i]->data;
        const std::vector<double>& g = params[i]->grad;
        std::vector<double>& mi = state.m[i];
        std::vector<double>& vi = state.v[i];
        double lr = cfg.lr * (cfg.lr_scales.empty() ? 1.0 : cfg.lr_scales[i]);
        for (size_t k = 0; k < w.size(); ++k) {
            mi[k] = cfg.beta1 * mi[k] + (1.0 - cfg.beta1) * g[k];
            vi[k] = cfg.beta2 * vi[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            double mhat = mi[k] / bc1;
            double vhat = vi[k] / bc2;
            w[k] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * w[k]);
        }
    }
    return true;
}

DecoderInput training_decoder_input(const Sample& sample, const Vocab& vocab, Regime regime,
                                    double p_noprompt, Rng& rng) {
    if (regime == Regime::Pretrain) {
        // history conditioning only, never domain prompts
        if (sample.previous_text)
            return build_history_input(vocab, *sample.previous_text, sample.transcript);
        return build_decoder_input(vocab, std::nullopt, sample.transcript, BuildMode::Train);
    }
    if (regime_uses_prompts(regime) && !sample.tags.empty()) {
        auto tags = sample_training_prompt(sample, p_noprompt, rng);
        return build_decoder_input(vocab, tags, sample.transcript, BuildMode::Train);
    }
    return build_decoder_input(vocab, std::nullopt, sample.transcript, BuildMode::Train);
}

namespace {

double clip_gradients(const std::vector<Tensor>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params)
        for (double g : p->grad) sq += g * g;
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        double s = max_norm / norm;
        for (const auto& p : params)
            for (double& g : p->grad) g *= s;
    }
    return norm;
}

double eval_greedy_wer(const TranscriberModel& model, const std::vector<Sample>& samples,
                       const Vocab& vocab, bool use_prompts, int limit) {
    // read-only snapshot semantics: evaluation runs between steps
    TranscriberModel snapshot = model;  // shallow copy of shared parameter data
    set_audio_mode(snapshot, AudioMode::CrossAttend);
    std::vector<std::string> refs, hyps;
    int n = std::min<int>(limit, static_cast<int>(samples.size()));
    for (int i = 0; i < n; ++i) {
        DecodeConfig dc;
        dc.beam_size = 1;
        if (use_prompts && !samples[i].tags.empty()) dc.prompt_tags = samples[i].tags;
        refs.push_back(normalize(samples[i].transcript));
        hyps.push_back(normalize(transcribe(snapshot, samples[i].audio, vocab, dc)));
    }
    return corpus_wer(refs, hyps).wer;
}

}  // namespace

void train(TranscriberModel& model, const std::vector<Sample>& data, const Vocab& vocab,
           double p_noprompt, const TrainConfig& cfg, TrainLog* log,
           const std::vector<Sample>* eval_set) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    if (regime_is_text_only(cfg.regime)) {
        // Warm-start each replacement bias at the mean cross-attention output
        // over a probe batch, so removing the audio path does not shift the
        // activation statistics the rest of the decoder was trained on.
        set_audio_mode(model, AudioMode::CrossAttend);
        std::vector<std::vector<double>> mean(
            model.cfg.n_dec_layers, std::vector<double>(model.cfg.d_model, 0.0));
        int probes = std::min<int>(16, static_cast<int>(data.size()));
        for (int i = 0; i < probes; ++i) {
            const Sample& s = data[i];
            DecoderInput di = build_decoder_input(vocab, std::nullopt, s.transcript,
                                                  BuildMode::Train);
            std::vector<int> inputs(di.tokens.begin(), di.tokens.end() - 1);
            auto outs = mean_cross_attention_outputs(model, inputs, encode_audio(model, s.audio));
            for (int l = 0; l < model.cfg.n_dec_layers; ++l)
                for (int c = 0; c < model.cfg.d_model; ++c) mean[l][c] += outs[l][c] / probes;
        }
        for (int l = 0; l < model.cfg.n_dec_layers; ++l)
            *model.p("dec." + std::to_string(l) + ".xbias")->data = mean[l];
    }
    set_audio_mode(model, regime_is_text_only(cfg.regime) ? AudioMode::TextOnly
                                                          : AudioMode::CrossAttend);
    ParamRegime preg = regime_is_text_only(cfg.regime) ? ParamRegime::DecoderOnlyPlusBiases
                                                       : ParamRegime::Full;
    std::vector<std::string> names = trainable_parameters(model, preg);
    std::vector<Tensor> params;
    for (const auto& n : names) params.push_back(model.p(n));

    AdamWConfig acfg{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.weight_decay, cfg.adam_eps};
    // With prompts, text can only legitimately teach how the prompt
    // vocabulary tilts the transcript distribution; without prompts, it can
    // only legitimately teach the output head's lexical preferences. Every
    // other parameter serves the audio pathway and is held to a crawl.
    std::vector<double> tok_emb_row_scale;  // per-row post-step blend factors
    std::vector<double> tok_emb_row_norm0;  // row norms at training start
    Tensor tok_emb;
    if (cfg.structural_lr_scale != 1.0) {
        bool prompts = regime_uses_prompts(cfg.regime);
        auto full_rate = [&](const std::string& n) {
            if (n == "dec.tok_emb") return true;  // row-scaled after the step
            if (n.size() >= 5 && n.compare(n.size() - 5, 5, "xbias") == 0) return true;
            if (!prompts && n.rfind("dec.out_proj", 0) == 0) return true;
            return false;
        };
        acfg.lr_scales.reserve(names.size());
        for (const auto& n : names)
            acfg.lr_scales.push_back(full_rate(n) ? 1.0 : cfg.structural_lr_scale);
        // embedding rows of the tag words adapt at full rate: tags are the
        // only prompt tokens that vary between domains, so they are the only
        // rows that can carry domain identity rather than a blanket "prompt
        // present" prior shift. Every row a prompt-free input can touch is
        // blended back after each step
        tok_emb = model.p("dec.tok_emb");
        std::vector<bool> is_tag(vocab.size(), false);
        for (const auto& s : data)
            for (const auto& t : s.tags)
                for (int id : vocab.tokenize_lossy(t)) is_tag[id] = true;
        std::vector<bool> in_transcripts(vocab.size(), false);
        for (int id = 0; id < kNumSpecialTokens; ++id) in_transcripts[id] = true;
        for (const auto& s : data)
            for (int id : vocab.tokenize_lossy(s.transcript)) in_transcripts[id] = true;
        tok_emb_row_scale.assign(vocab.size(), cfg.structural_lr_scale);
        for (size_t id = 0; id < tok_emb_row_scale.size(); ++id)
            if (prompts && is_tag[id] && !in_transcripts[id]) tok_emb_row_scale[id] = 1.0;
        tok_emb_row_norm0.resize(vocab.size());
        const std::vector<double>& e0 = *tok_emb->data;
        for (size_t row = 0; row < tok_emb_row_norm0.size(); ++row) {
            double n2 = 0.0;
            for (int k = 0; k < model.cfg.d_model; ++k)
                n2 += e0[row * model.cfg.d_model + k] * e0[row * model.cfg.d_model + k];
            tok_emb_row_norm0[row] = std::sqrt(n2);
        }
    }
    AdamWState state;
    state.init_for(params);

    double initial_loss = 0.0;
    int divergent_streak = 0;
    for (int step = 0; step < cfg.max_steps; ++step) {
        Rng rng(hash_combine(hash_combine(cfg.seed, hash_str("step")),
                             static_cast<uint64_t>(step)));
        zero_grads(params);
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const Sample& s = data[rng.uniform_int(0, static_cast<int>(data.size()) - 1)];
            DecoderInput di = training_decoder_input(s, vocab, cfg.regime, p_noprompt, rng);
            int n = static_cast<int>(di.tokens.size());
            std::vector<int> inputs(di.tokens.begin(), di.tokens.end() - 1);
            std::vector<int> targets(di.tokens.begin() + 1, di.tokens.end());
            std::vector<bool> mask(di.loss_mask.begin() + 1, di.loss_mask.end());
            (void)n;
            Tensor audio_emb;
            if (model.mode == AudioMode::CrossAttend) audio_emb = encode_audio(model, s.audio);
            Tensor logits = decoder_logits(model, inputs, audio_emb);
            Tensor loss = cross_entropy(logits, targets, mask);
            backward(loss);
            batch_loss += loss->scalar();
        }
        batch_loss /= cfg.batch_size;
        for (const auto& p : params)
            for (double& g : p->grad) g /= cfg.batch_size;
        clip_gradients(params, cfg.grad_clip_norm);
        std::vector<double> emb_before;
        if (!tok_emb_row_scale.empty()) emb_before = *tok_emb->data;
        if (!adamw_step(params, state, acfg)) {
            std::cerr << "train: non-finite gradients at step " << step << ", step skipped\n";
        } else if (!tok_emb_row_scale.empty()) {
            // per-row learning rates: blend each row back toward its
            // pre-step value by the row's scale factor
            std::vector<double>& w = *tok_emb->data;
            int d = model.cfg.d_model;
            for (size_t row = 0; row < tok_emb_row_scale.size(); ++row) {
                double a = tok_emb_row_scale[row];
                if (a == 1.0) continue;
                for (int k = 0; k < d; ++k) {
                    size_t idx = row * d + k;
                    w[idx] = emb_before[idx] + a * (w[idx] - emb_before[idx]);
                }
            }
        }

        if (step == 0) initial_loss = batch_loss;
        if (batch_loss > 10.0 * initial_loss) {
            if (++divergent_streak >= 100)
                throw std::runtime_error(
                    "train: diverged (loss " + std::to_string(batch_loss) + " > 10x initial " +
                    std::to_string(initial_loss) + " for 100 consecutive steps at step " +
                    std::to_string(step) + ")");
        } else {
            divergent_streak = 0;
        }
        if (log) {
            TrainLogEntry e;
            e.step = step;
            e.loss = batch_loss;
            if (cfg.eval_every > 0 && eval_set && (step + 1) % cfg.eval_every == 0)
                e.eval_wer = eval_greedy_wer(model, *eval_set, vocab,
                                             regime_uses_prompts(cfg.regime), 25);
            log->entries.push_back(e);
        }
    }
    if (!tok_emb_row_scale.empty()) {
        // Full-rate tag rows keep the direction they learned but are scaled
        // back to their initial norm. Trained without audio, the objective
        // inflates them into content surrogates; oversized rows knock the
        // frozen attention pattern out of distribution once real audio is
        // back, while the direction alone carries the domain identity.
        std::vector<double>& w = *tok_emb->data;
        int d = model.cfg.d_model;
        for (size_t row = 0; row < tok_emb_row_scale.size(); ++row) {
            if (tok_emb_row_scale[row] != 1.0) continue;
            double n2 = 0.0;
            for (int k = 0; k < d; ++k) n2 += w[row * d + k] * w[row * d + k];
            if (n2 > 0.0) {
                double s = tok_emb_row_norm0[row] / std::sqrt(n2);
                for (int k = 0; k < d; ++k) w[row * d + k] *= s;
            }
        }
    }
    // leave the model evaluable regardless of the training-time mode
    set_audio_mode(model, AudioMode::CrossAttend);
}

}  // namespace clair
