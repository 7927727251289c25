#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace clair {

// Reserved special-token block; ids 0..7, always first in the vocab file.
enum SpecialToken : int {
    TOK_PREV = 0,
    TOK_SOT = 1,
    TOK_LANG_EN = 2,
    TOK_TRANSCRIBE = 3,
    TOK_NOTIMESTAMPS = 4,
    TOK_EOT = 5,
    TOK_PAD = 6,
    TOK_UNK = 7,
};
constexpr int kNumSpecialTokens = 8;

const char* special_token_surface(int id);

// Closed word-level vocabulary. Ids are line numbers of the serialized file:
// the special block first, then punctuation, then words.
class Vocab {
public:
    Vocab();

    int add_word(const std::string& w);  // idempotent
    bool contains(const std::string& w) const { return word_to_id_.count(w) > 0; }
    int id(const std::string& w) const;           // throws on unknown
    int id_or_unk(const std::string& w) const;    // inference-side lookup
    const std::string& word(int id) const;
    int size() const { return static_cast<int>(id_to_word_.size()); }

    // whitespace-split tokenization over the closed vocabulary
    std::vector<int> tokenize(const std::string& text) const;          // throws on unknown word
    std::vector<int> tokenize_lossy(const std::string& text) const;    // unknown -> UNK
    std::string detokenize(const std::vector<int>& ids) const;

    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

private:
    std::unordered_map<std::string, int> word_to_id_;
    std::vector<std::string> id_to_word_;
};

struct Span {
    int begin = 0;
    int end = 0;  // half-open
    int length() const { return end - begin; }
};

// The decoder-input protocol sequence:
//   [PREV, prompt...]? SOT LANG_EN TRANSCRIBE NOTIMESTAMPS [transcript..., EOT]?
// loss_mask is true exactly on transcript tokens and the closing EOT.
struct DecoderInput {
    std::vector<int> tokens;
    std::vector<bool> loss_mask;
    Span prompt_span;      // covers PREV + prompt tokens (empty when no prompt)
    Span task_span;        // SOT..NOTIMESTAMPS
    Span transcript_span;  // transcript + EOT (empty in infer mode)
};

enum class BuildMode { Train, Infer };

// "[ domain: T1, T2, ..., Tn]"
std::string format_prompt(const std::vector<std::string>& tags);
std::vector<std::string> parse_prompt(const std::string& prompt);

// Token ids of the rendered prompt (brackets and separators included).
std::vector<int> prompt_token_ids(const Vocab& vocab, const std::vector<std::string>& tags);

DecoderInput build_decoder_input(const Vocab& vocab,
                                 const std::optional<std::vector<std::string>>& tags,
                                 const std::optional<std::string>& transcript, BuildMode mode);

// History conditioning: raw previous text after PREV, no brackets or marker.
DecoderInput build_history_input(const Vocab& vocab, const std::string& previous_text,
                                 const std::string& transcript);

// Human-readable rendering of a decoder-input token sequence, with prompt
// punctuation spaced exactly as format_prompt produces it.
std::string render_tokens(const Vocab& vocab, const std::vector<int>& ids);

}  // namespace clair
