#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "clair/decode.hpp"
#include "clair/rng.hpp"

using namespace clair;

namespace {

// Random but deterministic log-prob table indexed by (prefix suffix, step).
StepScorer table_scorer(uint64_t seed, int vocab_size, size_t prefix_len) {
    return [=](const std::vector<int>& prefix) {
        uint64_t h = seed;
        for (size_t i = prefix_len; i < prefix.size(); ++i)
            h = hash_combine(h, static_cast<uint64_t>(prefix[i] + 1));
        Rng rng(hash_combine(h, prefix.size()));
        std::vector<double> logits(vocab_size);
        for (auto& v : logits) v = rng.gaussian();
        double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0;
        for (double v : logits) z += std::exp(v - mx);
        std::vector<double> logp(vocab_size);
        for (int i = 0; i < vocab_size; ++i) logp[i] = logits[i] - mx - std::log(z);
        return logp;
    };
}

// Exhaustive search over every sequence of length <= max_new (stopping at EOT),
// with the same ranking rule: best score, ties by lexicographically smaller tokens.
Hypothesis exhaustive_best(const StepScorer& scorer, const std::vector<int>& prefix,
                           int vocab_size, int eot_id, int max_new) {
    Hypothesis best;
    best.log_prob = -1e300;
    std::vector<int> cur;
    std::function<void(std::vector<int>&, double)> rec = [&](std::vector<int>& toks, double lp) {
        bool done = !toks.empty() && toks.back() == eot_id;
        if (done || static_cast<int>(toks.size()) == max_new) {
            if (lp > best.log_prob ||
                (lp == best.log_prob && toks < best.tokens)) {
                best.tokens = toks;
                best.log_prob = lp;
                best.finished = done;
            }
            return;
        }
        std::vector<int> full = prefix;
        full.insert(full.end(), toks.begin(), toks.end());
        std::vector<double> logp = scorer(full);
        for (int t = 0; t < vocab_size; ++t) {
            toks.push_back(t);
            rec(toks, lp + logp[t]);
            toks.pop_back();
        }
    };
    rec(cur, 0.0);
    return best;
}

}  // namespace

TEST_CASE("beam size one equals greedy decoding") {
    Rng rng(66);
    for (int trial = 0; trial < 50; ++trial) {
        int vocab = rng.uniform_int(3, 8);
        int eot = 0;
        std::vector<int> prefix{1};
        StepScorer scorer = table_scorer(hash_combine(1234, trial), vocab, prefix.size());
        Hypothesis beam = beam_search(scorer, prefix, vocab, eot, 1, 6);

        // greedy reference
        std::vector<int> full = prefix, greedy;
        for (int step = 0; step < 6; ++step) {
            std::vector<double> logp = scorer(full);
            int arg = 0;
            for (int t = 1; t < vocab; ++t)
                if (logp[t] > logp[arg]) arg = t;
            greedy.push_back(arg);
            full.push_back(arg);
            if (arg == eot) break;
        }
        CHECK(beam.tokens == greedy);
    }
}

TEST_CASE("full-width beam equals exhaustive search over 1000 random tables") {
    Rng rng(4096);
    for (int trial = 0; trial < 1000; ++trial) {
        int vocab = rng.uniform_int(2, 8);    // V in [2, 8]
        int max_new = rng.uniform_int(1, 4);  // T in [1, 4]
        int eot = 0;
        std::vector<int> prefix{1, vocab - 1};
        StepScorer scorer = table_scorer(hash_combine(777, trial), vocab, prefix.size());

        int width = 1;
        for (int t = 0; t < max_new; ++t) width *= vocab;  // no pruning possible
        Hypothesis beam = beam_search(scorer, prefix, vocab, eot, width, max_new);
        Hypothesis brute = exhaustive_best(scorer, prefix, vocab, eot, max_new);
        CHECK(beam.tokens == brute.tokens);
        CHECK(beam.log_prob == doctest::Approx(brute.log_prob).epsilon(1e-12));
    }
}

TEST_CASE("shorter sequences win without length normalization") {
    // uniform scorer: each extra token only lowers the summed log-prob
    StepScorer uniform = [](const std::vector<int>&) {
        return std::vector<double>(4, std::log(0.25));
    };
    Hypothesis h = beam_search(uniform, {}, 4, 0, 4, 3);
    CHECK(h.tokens == std::vector<int>{0});
    CHECK(h.finished);
}

TEST_CASE("ties break toward lower token ids") {
    // step 0: tokens 2 and 3 tie for the top; step 1: EOT is forced
    StepScorer scorer = [](const std::vector<int>& prefix) {
        if (prefix.empty())
            return std::vector<double>{-10.0, -10.0, std::log(0.5), std::log(0.5)};
        return std::vector<double>{std::log(0.97), std::log(0.01), std::log(0.01),
                                   std::log(0.01)};
    };
    Hypothesis h = beam_search(scorer, {}, 4, 0, 4, 4);
    CHECK(h.tokens == std::vector<int>{2, 0});
    CHECK(h.finished);
}

TEST_CASE("beam search is deterministic") {
    StepScorer scorer = table_scorer(31337, 6, 1);
    Hypothesis a = beam_search(scorer, {2}, 6, 0, 3, 8);
    Hypothesis b = beam_search(scorer, {2}, 6, 0, 3, 8);
    CHECK(a.tokens == b.tokens);
    CHECK(a.log_prob == b.log_prob);
}

TEST_CASE("pad_audio prepends silence and guards the frame budget") {
    AudioFeatures a;
    a.n_frames = 3;
    a.feat_dim = 2;
    a.frames = {1, 2, 3, 4, 5, 6};
    AudioFeatures p = pad_audio(a, 2, 10);
    CHECK(p.n_frames == 5);
    CHECK(p.frames == std::vector<double>{0, 0, 0, 0, 1, 2, 3, 4, 5, 6});
    CHECK_NOTHROW(pad_audio(a, 7, 10));
    CHECK_THROWS(pad_audio(a, 8, 10));
    AudioFeatures same = pad_audio(a, 0, 10);
    CHECK(same.frames == a.frames);
}
