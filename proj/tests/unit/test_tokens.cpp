#include <doctest.h>

#include <filesystem>

#include "clair/rng.hpp"
#include "clair/tokens.hpp"

using namespace clair;

namespace {

Vocab small_vocab() {
    Vocab v;
    for (const char* w : {"finance", "real", "estate", "investment", "the", "market", "rose",
                          "today", "weather", "report"})
        v.add_word(w);
    return v;
}

}  // namespace

TEST_CASE("special token block is fixed") {
    Vocab v;
    CHECK(v.id("<|prev|>") == TOK_PREV);
    CHECK(v.id("<|startoftranscript|>") == TOK_SOT);
    CHECK(v.id("<|english|>") == TOK_LANG_EN);
    CHECK(v.id("<|transcribe|>") == TOK_TRANSCRIBE);
    CHECK(v.id("<|notimestamps|>") == TOK_NOTIMESTAMPS);
    CHECK(v.id("<|endoftext|>") == TOK_EOT);
    CHECK(v.id("<|pad|>") == TOK_PAD);
    CHECK(v.id("<|unk|>") == TOK_UNK);
}

TEST_CASE("format_prompt produces the exact surface form") {
    CHECK(format_prompt({"Finance"}) == "[ domain: Finance]");
    CHECK(format_prompt({"Finance", "Real Estate", "Investment"}) ==
          "[ domain: Finance, Real Estate, Investment]");
}

TEST_CASE("parse_prompt inverts format_prompt") {
    std::vector<std::vector<std::string>> cases = {
        {"finance"}, {"finance", "real estate"}, {"a", "b", "c", "d"}};
    for (const auto& tags : cases) CHECK(parse_prompt(format_prompt(tags)) == tags);

    // property check over random tag subsets
    Rng rng(99);
    std::vector<std::string> pool{"finance", "real estate", "investment", "weather report",
                                  "market", "the rose"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> tags = pool;
        rng.shuffle(tags);
        tags.resize(rng.uniform_int(1, static_cast<int>(pool.size())));
        CHECK(parse_prompt(format_prompt(tags)) == tags);
    }
}

TEST_CASE("render_tokens reproduces the documented sequence") {
    Vocab v = small_vocab();
    DecoderInput di = build_decoder_input(v, std::vector<std::string>{"finance"},
                                          std::string("the market rose"), BuildMode::Train);
    CHECK(render_tokens(v, di.tokens) ==
          "<|prev|> [ domain: finance] <|startoftranscript|> <|english|> <|transcribe|> "
          "<|notimestamps|> the market rose <|endoftext|>");
}

TEST_CASE("build_decoder_input spans and loss mask") {
    Vocab v = small_vocab();
    SUBCASE("train with prompt") {
        DecoderInput di = build_decoder_input(v, std::vector<std::string>{"finance", "market"},
                                              std::string("the market rose"), BuildMode::Train);
        CHECK(di.tokens.front() == TOK_PREV);
        CHECK(di.prompt_span.begin == 0);
        CHECK(di.task_span.length() == 4);
        CHECK(di.tokens[di.task_span.begin] == TOK_SOT);
        CHECK(di.tokens.back() == TOK_EOT);
        CHECK(di.transcript_span.end == static_cast<int>(di.tokens.size()));
        CHECK(di.transcript_span.length() == 4);  // 3 words + EOT
        // spans partition the sequence
        CHECK(di.prompt_span.end == di.task_span.begin);
        CHECK(di.task_span.end == di.transcript_span.begin);
        // loss mask true exactly on the transcript span
        for (int i = 0; i < static_cast<int>(di.tokens.size()); ++i)
            CHECK(di.loss_mask[i] == (i >= di.transcript_span.begin));
    }
    SUBCASE("train without prompt omits the PREV block") {
        DecoderInput di =
            build_decoder_input(v, std::nullopt, std::string("today"), BuildMode::Train);
        CHECK(di.tokens[0] == TOK_SOT);
        CHECK(di.prompt_span.length() == 0);
        CHECK(di.tokens.size() == 4 + 2);
    }
    SUBCASE("infer mode ends after NOTIMESTAMPS") {
        DecoderInput di =
            build_decoder_input(v, std::vector<std::string>{"finance"}, std::nullopt,
                                BuildMode::Infer);
        CHECK(di.tokens.back() == TOK_NOTIMESTAMPS);
        CHECK(di.transcript_span.length() == 0);
    }
    SUBCASE("contract violations throw") {
        CHECK_THROWS(build_decoder_input(v, std::nullopt, std::nullopt, BuildMode::Train));
        CHECK_THROWS(build_decoder_input(v, std::nullopt, std::string("today"), BuildMode::Infer));
    }
}

TEST_CASE("build_history_input places raw text after PREV") {
    Vocab v = small_vocab();
    DecoderInput di = build_history_input(v, "the market", "rose today");
    CHECK(di.tokens[0] == TOK_PREV);
    CHECK(v.word(di.tokens[1]) == "the");
    CHECK(v.word(di.tokens[2]) == "market");
    CHECK(di.prompt_span.length() == 3);
    CHECK(di.tokens.back() == TOK_EOT);

    SUBCASE("empty history degenerates to the no-prompt form") {
        DecoderInput plain = build_history_input(v, "", "rose today");
        DecoderInput expect =
            build_decoder_input(v, std::nullopt, std::string("rose today"), BuildMode::Train);
        CHECK(plain.tokens == expect.tokens);
        CHECK(plain.loss_mask == expect.loss_mask);
    }
}

TEST_CASE("vocab save/load round trip preserves ids") {
    Vocab v = small_vocab();
    std::string path = (std::filesystem::temp_directory_path() / "clair_vocab_test.txt").string();
    v.save(path);
    Vocab w = Vocab::load(path);
    CHECK(w.size() == v.size());
    for (int i = 0; i < v.size(); ++i) CHECK(w.word(i) == v.word(i));
    std::filesystem::remove(path);
}

TEST_CASE("tokenize: closed-vocab strictness and lossy fallback") {
    Vocab v = small_vocab();
    CHECK_THROWS(v.tokenize("the unknownword"));
    std::vector<int> ids = v.tokenize_lossy("the unknownword");
    CHECK(ids.size() == 2);
    CHECK(ids[1] == TOK_UNK);
    CHECK(v.detokenize(v.tokenize("the market rose")) == "the market rose");
}
