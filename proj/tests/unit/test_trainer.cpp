#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "clair/trainer.hpp"

using namespace clair;

namespace {

CorpusManifest tiny_manifest() {
    CorpusManifest m;
    m.seed = 5;
    m.n_pretrain = 60;
    m.n_finetune = 60;
    m.n_test_general = 8;
    m.n_test_unseen = 8;
    m.n_test_homophone = 8;
    m.n_test_segmented = 8;
    m.n_target = 20;
    return m;
}

const Corpus& tiny_corpus() {
    static Corpus c = generate_corpus(tiny_manifest());
    return c;
}

TranscriberModel tiny_model() {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_enc_layers = 1;
    cfg.n_dec_layers = 1;
    cfg.d_ff = 32;
    cfg.vocab_size = tiny_corpus().vocab.size();
    cfg.audio_feat_dim = tiny_manifest().feat_dim;
    cfg.rng_seed = 9;
    return make_model(cfg);
}

uint64_t encoder_checksum(const TranscriberModel& m) {
    uint64_t h = 1469598103934665603ull;
    for (const auto& name : m.param_order) {
        if (!is_encoder_param(name)) continue;
        for (double v : *m.p(name)->data) {
            uint64_t bits;
            static_assert(sizeof(bits) == sizeof(v));
            std::memcpy(&bits, &v, sizeof(bits));
            h = (h ^ bits) * 1099511628211ull;
        }
    }
    return h;
}

}  // namespace

TEST_CASE("regime table: names, text-only flag, prompt usage") {
    CHECK(regime_from_name("pretrain") == Regime::Pretrain);
    CHECK(regime_from_name("prompt_text_only") == Regime::PromptTextOnly);
    CHECK(regime_name(Regime::DaAudioText) == "da_audio_text");
    CHECK_THROWS(regime_from_name("nonsense"));

    CHECK(!regime_is_text_only(Regime::Pretrain));
    CHECK(!regime_is_text_only(Regime::PromptAudioText));
    CHECK(regime_is_text_only(Regime::PromptTextOnly));
    CHECK(!regime_is_text_only(Regime::DaAudioText));
    CHECK(regime_is_text_only(Regime::DaTextOnly));

    CHECK(!regime_uses_prompts(Regime::Pretrain));
    CHECK(regime_uses_prompts(Regime::PromptAudioText));
    CHECK(regime_uses_prompts(Regime::PromptTextOnly));
    CHECK(!regime_uses_prompts(Regime::DaAudioText));
    CHECK(!regime_uses_prompts(Regime::DaTextOnly));
}

TEST_CASE("training defaults: pretraining vs fine-tuning hyperparameters") {
    TrainConfig pre = TrainConfig::defaults_for(Regime::Pretrain, 1);
    CHECK(pre.learning_rate == doctest::Approx(3e-4));
    CHECK(pre.max_steps == 4000);
    CHECK(TrainConfig::defaults_for(Regime::PromptAudioText, 1).learning_rate ==
          doctest::Approx(3e-4));
    CHECK(TrainConfig::defaults_for(Regime::DaAudioText, 1).learning_rate ==
          doctest::Approx(1e-4));
    // text-only regimes adapt the lexical parameters at full rate and keep
    // the structural decoder weights frozen, with a damping epsilon
    for (Regime r : {Regime::PromptTextOnly, Regime::DaTextOnly}) {
        TrainConfig ft = TrainConfig::defaults_for(r, 1);
        CHECK(ft.learning_rate ==
              doctest::Approx(r == Regime::PromptTextOnly ? 1e-2 : 3e-4));
        CHECK(ft.adam_eps == doctest::Approx(1e-3));
        CHECK(ft.structural_lr_scale == doctest::Approx(0.0));
    }
    for (Regime r : {Regime::Pretrain, Regime::PromptAudioText, Regime::DaAudioText}) {
        CHECK(TrainConfig::defaults_for(r, 1).structural_lr_scale == doctest::Approx(1.0));
    }
    for (Regime r : {Regime::PromptAudioText, Regime::PromptTextOnly, Regime::DaAudioText,
                     Regime::DaTextOnly}) {
        TrainConfig ft = TrainConfig::defaults_for(r, 1);
        CHECK(ft.max_steps == 1000);
        CHECK(ft.batch_size == 16);
        CHECK(ft.beta1 == doctest::Approx(0.9));
        CHECK(ft.beta2 == doctest::Approx(0.98));
        CHECK(ft.weight_decay == doctest::Approx(0.01));
        CHECK(ft.grad_clip_norm == doctest::Approx(1.0));
    }
}

TEST_CASE("adamw two steps match the scalar recurrence") {
    Tensor p = make_tensor({1, 1}, {1.0}, true);
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.beta1 = 0.9;
    cfg.beta2 = 0.98;
    cfg.weight_decay = 0.01;
    AdamWState st;
    st.init_for({p});

    // scalar reference computed step by step alongside
    double m = 0, v = 0, x = 1.0;
    for (int t = 1; t <= 2; ++t) {
        double g = 0.5 * t;  // grads 0.5 then 1.0
        p->ensure_grad();
        p->grad[0] = g;
        REQUIRE(adamw_step({p}, st, cfg));

        m = cfg.beta1 * m + (1 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
        double mhat = m / (1 - std::pow(cfg.beta1, t));
        double vhat = v / (1 - std::pow(cfg.beta2, t));
        x -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * x);
        CHECK((*p->data)[0] == doctest::Approx(x).epsilon(1e-14));
    }
    CHECK(st.t == 2);
}

TEST_CASE("adamw with zero gradient applies pure decoupled decay") {
    Tensor p = make_tensor({1, 1}, {2.0}, true);
    AdamWConfig cfg;
    cfg.lr = 0.5;
    cfg.weight_decay = 0.1;
    AdamWState st;
    st.init_for({p});
    p->ensure_grad();
    p->grad[0] = 0.0;
    REQUIRE(adamw_step({p}, st, cfg));
    CHECK((*p->data)[0] == doctest::Approx(2.0 * (1 - cfg.lr * cfg.weight_decay)));
}

TEST_CASE("adamw skips the step on non-finite gradients") {
    Tensor p = make_tensor({1, 1}, {1.0}, true);
    AdamWConfig cfg;
    AdamWState st;
    st.init_for({p});
    p->ensure_grad();
    p->grad[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK(!adamw_step({p}, st, cfg));
    CHECK((*p->data)[0] == 1.0);
    CHECK(st.t == 0);
    CHECK(st.m[0][0] == 0.0);
}

TEST_CASE("training_decoder_input follows the regime") {
    const Corpus& c = tiny_corpus();
    Rng rng(17);
    SUBCASE("pretrain uses history when present, never prompts") {
        const Sample* hist = nullptr;
        const Sample* plain = nullptr;
        for (const auto& s : c.pretrain) {
            if (s.previous_text && !hist) hist = &s;
            if (!s.previous_text && !plain) plain = &s;
        }
        REQUIRE(hist);
        REQUIRE(plain);
        DecoderInput dh = training_decoder_input(*hist, c.vocab, Regime::Pretrain, 0.2, rng);
        CHECK(dh.tokens[0] == TOK_PREV);
        CHECK(dh.prompt_span.length() ==
              1 + static_cast<int>(c.vocab.tokenize(*hist->previous_text).size()));
        DecoderInput dp = training_decoder_input(*plain, c.vocab, Regime::Pretrain, 0.2, rng);
        CHECK(dp.tokens[0] == TOK_SOT);
    }
    SUBCASE("prompt regimes sample tag subsets; da regimes do not prompt") {
        const Sample& s = c.finetune_general[0];
        int prompted = 0;
        for (int t = 0; t < 200; ++t) {
            DecoderInput d =
                training_decoder_input(s, c.vocab, Regime::PromptAudioText, 0.2, rng);
            if (d.tokens[0] == TOK_PREV) ++prompted;
        }
        CHECK(prompted > 100);
        CHECK(prompted < 200);
        DecoderInput d = training_decoder_input(s, c.vocab, Regime::DaTextOnly, 0.2, rng);
        CHECK(d.tokens[0] == TOK_SOT);
    }
}

TEST_CASE("short training run reduces the loss") {
    const Corpus& c = tiny_corpus();
    TranscriberModel model = tiny_model();
    TrainConfig cfg = TrainConfig::defaults_for(Regime::Pretrain, 3);
    cfg.max_steps = 60;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-3;
    TrainLog log;
    train(model, c.pretrain, c.vocab, c.manifest.p_noprompt, cfg, &log);
    REQUIRE(log.entries.size() == 60);
    double first = log.entries[0].loss;
    double last = 0;
    for (size_t i = 50; i < 60; ++i) last += log.entries[i].loss;
    last /= 10;
    CHECK(last < 0.8 * first);
}

TEST_CASE("text-only fine-tuning leaves encoder parameters untouched") {
    const Corpus& c = tiny_corpus();
    TranscriberModel model = tiny_model();
    uint64_t enc_before = encoder_checksum(model);
    uint64_t all_before = model.param_checksum();
    TrainConfig cfg = TrainConfig::defaults_for(Regime::PromptTextOnly, 3);
    cfg.max_steps = 10;
    cfg.batch_size = 4;
    train(model, c.finetune_general, c.vocab, c.manifest.p_noprompt, cfg);
    CHECK(encoder_checksum(model) == enc_before);
    CHECK(model.param_checksum() != all_before);
    // model is restored to cross-attention afterward for evaluation loads
    CHECK(model.mode == AudioMode::CrossAttend);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const Corpus& c = tiny_corpus();
    TrainConfig cfg = TrainConfig::defaults_for(Regime::Pretrain, 11);
    cfg.max_steps = 15;
    cfg.batch_size = 4;
    TranscriberModel m1 = tiny_model();
    TranscriberModel m2 = tiny_model();
    train(m1, c.pretrain, c.vocab, c.manifest.p_noprompt, cfg);
    train(m2, c.pretrain, c.vocab, c.manifest.p_noprompt, cfg);
    CHECK(m1.param_checksum() == m2.param_checksum());
}
