#include "clair/tokens.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace clair {

namespace {

const char* kSpecialSurfaces[kNumSpecialTokens] = {
    "<|prev|>",          "<|startoftranscript|>", "<|english|>", "<|transcribe|>",
    "<|notimestamps|>",  "<|endoftext|>",         "<|pad|>",     "<|unk|>",
};

std::vector<std::string> split_ws(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

const char* special_token_surface(int id) {
    if (id < 0 || id >= kNumSpecialTokens) throw std::invalid_argument("not a special token id");
    return kSpecialSurfaces[id];
}

Vocab::Vocab() {
    for (int i = 0; i < kNumSpecialTokens; ++i) {
        id_to_word_.emplace_back(kSpecialSurfaces[i]);
        word_to_id_[kSpecialSurfaces[i]] = i;
    }
    // prompt punctuation block
    for (const char* p : {"[", "]", "domain", ":", ","}) add_word(p);
}

int Vocab::add_word(const std::string& w) {
    auto it = word_to_id_.find(w);
    if (it != word_to_id_.end()) return it->second;
    int id = static_cast<int>(id_to_word_.size());
    id_to_word_.push_back(w);
    word_to_id_[w] = id;
    return id;
}

int Vocab::id(const std::string& w) const {
    auto it = word_to_id_.find(w);
    if (it == word_to_id_.end()) throw std::out_of_range("word not in vocabulary: '" + w + "'");
    return it->second;
}

int Vocab::id_or_unk(const std::string& w) const {
    auto it = word_to_id_.find(w);
    return it == word_to_id_.end() ? TOK_UNK : it->second;
}

const std::string& Vocab::word(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("token id out of range");
    return id_to_word_[id];
}

std::vector<int> Vocab::tokenize(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& w : split_ws(text)) ids.push_back(id(w));
    return ids;
}

std::vector<int> Vocab::tokenize_lossy(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& w : split_ws(text)) ids.push_back(id_or_unk(w));
    return ids;
}

std::string Vocab::detokenize(const std::vector<int>& ids) const {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += word(ids[i]);
    }
    return out;
}

void Vocab::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write vocab file: " + path);
    for (const auto& w : id_to_word_) f << w << '\n';
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read vocab file: " + path);
    Vocab v;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        if (lineno < v.size()) {
            if (line != v.id_to_word_[lineno])
                throw std::runtime_error("vocab file reserved block mismatch at line " +
                                         std::to_string(lineno));
        } else {
            v.add_word(line);
        }
        ++lineno;
    }
    return v;
}

std::string format_prompt(const std::vector<std::string>& tags) {
    if (tags.empty()) throw std::invalid_argument("format_prompt: empty tag list");
    std::string out = "[ domain:";
    for (size_t i = 0; i < tags.size(); ++i) {
        std::string t = trim(tags[i]);
        if (t.empty()) throw std::invalid_argument("format_prompt: empty tag");
        out += (i ? ", " : " ") + t;
    }
    out += "]";
    return out;
}

std::vector<std::string> parse_prompt(const std::string& prompt) {
    const std::string head = "[ domain: ";
    if (prompt.rfind(head, 0) != 0 || prompt.back() != ']')
        throw std::invalid_argument("parse_prompt: not a prompt: '" + prompt + "'");
    std::string body = prompt.substr(head.size(), prompt.size() - head.size() - 1);
    std::vector<std::string> tags;
    size_t pos = 0;
    while (true) {
        size_t comma = body.find(", ", pos);
        if (comma == std::string::npos) {
            tags.push_back(body.substr(pos));
            break;
        }
        tags.push_back(body.substr(pos, comma - pos));
        pos = comma + 2;
    }
    return tags;
}

std::vector<int> prompt_token_ids(const Vocab& vocab, const std::vector<std::string>& tags) {
    if (tags.empty()) throw std::invalid_argument("prompt_token_ids: empty tag list");
    std::vector<int> ids = {vocab.id("["), vocab.id("domain"), vocab.id(":")};
    for (size_t i = 0; i < tags.size(); ++i) {
        if (i) ids.push_back(vocab.id(","));
        for (const auto& w : split_ws(tags[i])) ids.push_back(vocab.id_or_unk(w));
    }
    ids.push_back(vocab.id("]"));
    return ids;
}

DecoderInput build_decoder_input(const Vocab& vocab,
                                 const std::optional<std::vector<std::string>>& tags,
                                 const std::optional<std::string>& transcript, BuildMode mode) {
    if (mode == BuildMode::Train && !transcript)
        throw std::invalid_argument("build_decoder_input: train mode requires a transcript");
    if (mode == BuildMode::Infer && transcript)
        throw std::invalid_argument("build_decoder_input: infer mode takes no transcript");
    DecoderInput di;
    if (tags) {
        di.tokens.push_back(TOK_PREV);
        for (int id : prompt_token_ids(vocab, *tags)) di.tokens.push_back(id);
    }
    di.prompt_span = {0, static_cast<int>(di.tokens.size())};
    di.task_span.begin = di.prompt_span.end;
    for (int id : {TOK_SOT, TOK_LANG_EN, TOK_TRANSCRIBE, TOK_NOTIMESTAMPS})
        di.tokens.push_back(id);
    di.task_span.end = static_cast<int>(di.tokens.size());
    di.transcript_span.begin = di.task_span.end;
    if (mode == BuildMode::Train) {
        for (int id : vocab.tokenize(*transcript)) di.tokens.push_back(id);
        di.tokens.push_back(TOK_EOT);
    }
    di.transcript_span.end = static_cast<int>(di.tokens.size());
    di.loss_mask.assign(di.tokens.size(), false);
    for (int i = di.transcript_span.begin; i < di.transcript_span.end; ++i) di.loss_mask[i] = true;
    return di;
}

DecoderInput build_history_input(const Vocab& vocab, const std::string& previous_text,
                                 const std::string& transcript) {
    if (transcript.empty()) throw std::invalid_argument("build_history_input: empty transcript");
    if (trim(previous_text).empty())
        return build_decoder_input(vocab, std::nullopt, transcript, BuildMode::Train);
    DecoderInput di;
    di.tokens.push_back(TOK_PREV);
    for (int id : vocab.tokenize(previous_text)) di.tokens.push_back(id);
    di.prompt_span = {0, static_cast<int>(di.tokens.size())};
    di.task_span.begin = di.prompt_span.end;
    for (int id : {TOK_SOT, TOK_LANG_EN, TOK_TRANSCRIBE, TOK_NOTIMESTAMPS})
        di.tokens.push_back(id);
    di.task_span.end = static_cast<int>(di.tokens.size());
    di.transcript_span.begin = di.task_span.end;
    for (int id : vocab.tokenize(transcript)) di.tokens.push_back(id);
    di.tokens.push_back(TOK_EOT);
    di.transcript_span.end = static_cast<int>(di.tokens.size());
    di.loss_mask.assign(di.tokens.size(), false);
    for (int i = di.transcript_span.begin; i < di.transcript_span.end; ++i) di.loss_mask[i] = true;
    return di;
}

std::string render_tokens(const Vocab& vocab, const std::vector<int>& ids) {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        const std::string& w = vocab.word(ids[i]);
        bool attach = (w == ":" || w == "," || w == "]");
        if (i && !attach) out += ' ';
        out += w;
    }
    return out;
}

}  // namespace clair
