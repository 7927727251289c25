#include "clair/corpus.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace clair {

namespace {

using nlohmann::json;

constexpr const char* kSplitNames[] = {
    "pretrain",       "finetune_general", "test_general",  "test_unseen_domains",
    "test_homophone", "test_segmented",   "adapt_target",  "eval_target",
};

const char* kB64Alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

// Pronounceable pseudo-words keep the corpus readable in traces.
std::string pseudo_word(Rng& rng, int syllables) {
    static const char* cons[] = {"b", "d", "f", "g", "k", "l", "m",
                                 "n", "p", "r", "s", "t", "v", "z"};
    static const char* vowels[] = {"a", "e", "i", "o", "u"};
    std::string w;
    for (int s = 0; s < syllables; ++s) {
        w += cons[rng.uniform_int(0, 13)];
        w += vowels[rng.uniform_int(0, 4)];
    }
    return w;
}

std::string fresh_word(Rng& rng, std::set<std::string>& used, int syllables) {
    for (int attempt = 0; attempt < 10000; ++attempt) {
        std::string w = pseudo_word(rng, syllables);
        if (used.insert(w).second) return w;
    }
    throw std::runtime_error("pseudo-word space exhausted");
}

// quantize to float32 so in-memory audio equals the serialized form exactly
double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<std::string> words_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

std::string join(const std::vector<std::string>& words, size_t b, size_t e) {
    std::string out;
    for (size_t i = b; i < e; ++i) {
        if (i > b) out += ' ';
        out += words[i];
    }
    return out;
}

uint64_t sample_stream(uint64_t seed, const std::string& split, int index) {
    return hash_combine(hash_combine(seed, hash_str(split)), static_cast<uint64_t>(index));
}

json sample_to_json(const Sample& s) {
    json j;
    j["id"] = s.id;
    j["domain"] = s.domain;
    j["tags"] = s.tags;
    j["transcript"] = s.transcript;
    if (s.previous_text) j["previous_text"] = *s.previous_text;
    j["segment_kind"] = s.segment_kind == SegmentKind::FullSentence ? "full_sentence" : "mid_sentence";
    std::vector<float> f(s.audio.frames.begin(), s.audio.frames.end());
    j["audio"] = base64_encode(reinterpret_cast<const unsigned char*>(f.data()),
                               f.size() * sizeof(float));
    j["n_frames"] = s.audio.n_frames;
    j["feat_dim"] = s.audio.feat_dim;
    return j;
}

Sample sample_from_json(const json& j) {
    Sample s;
    s.id = j.at("id").get<std::string>();
    s.domain = j.at("domain").get<std::string>();
    s.tags = j.at("tags").get<std::vector<std::string>>();
    s.transcript = j.at("transcript").get<std::string>();
    if (j.contains("previous_text")) s.previous_text = j["previous_text"].get<std::string>();
    s.segment_kind = j.at("segment_kind").get<std::string>() == "mid_sentence"
                         ? SegmentKind::MidSentence
                         : SegmentKind::FullSentence;
    s.audio.n_frames = j.at("n_frames").get<int>();
    s.audio.feat_dim = j.at("feat_dim").get<int>();
    auto bytes = base64_decode(j.at("audio").get<std::string>());
    if (bytes.size() != static_cast<size_t>(s.audio.n_frames) * s.audio.feat_dim * sizeof(float))
        throw std::runtime_error("corpus record " + s.id + ": audio payload size mismatch");
    std::vector<float> f(bytes.size() / sizeof(float));
    std::memcpy(f.data(), bytes.data(), bytes.size());
    s.audio.frames.assign(f.begin(), f.end());
    return s;
}

}  // namespace

std::string base64_encode(const unsigned char* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        uint32_t v = data[i] << 16;
        if (i + 1 < len) v |= data[i + 1] << 8;
        if (i + 2 < len) v |= data[i + 2];
        out += kB64Alphabet[(v >> 18) & 63];
        out += kB64Alphabet[(v >> 12) & 63];
        out += i + 1 < len ? kB64Alphabet[(v >> 6) & 63] : '=';
        out += i + 2 < len ? kB64Alphabet[v & 63] : '=';
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    static int rev[256];
    static const bool init = [] {
        std::fill(std::begin(rev), std::end(rev), -1);
        for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kB64Alphabet[i])] = i;
        return true;
    }();
    (void)init;
    std::vector<unsigned char> out;
    uint32_t buf = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=') break;
        int v = rev[static_cast<unsigned char>(c)];
        if (v < 0) throw std::invalid_argument("base64_decode: invalid character");
        buf = (buf << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((buf >> bits) & 0xff));
        }
    }
    return out;
}

void CorpusManifest::validate() const {
    if (sigma < 0.0) throw std::invalid_argument("manifest: sigma must be >= 0");
    if (p_noprompt < 0.0 || p_noprompt > 1.0)
        throw std::invalid_argument("manifest: p_noprompt must be in [0,1]");
    if (n_domains < 4 || n_domains % 2 != 0)
        throw std::invalid_argument("manifest: n_domains must be even and >= 4");
    if (n_homophone_groups < n_domains / 2)
        throw std::invalid_argument(
            "manifest: need at least one homophone group per domain pair (got " +
            std::to_string(n_homophone_groups) + ")");
    if (n_unseen_domains + 1 > n_domains - 2)
        throw std::invalid_argument("manifest: too many unseen combination domains");
    if (shared_lexicon_size < 10 || domain_lexicon_size < 4)
        throw std::invalid_argument("manifest: lexicons too small");
    if (frames_per_word < 1 || frame_rate < 1 || feat_dim < 1)
        throw std::invalid_argument("manifest: frames_per_word, frame_rate, feat_dim must be >= 1");
    if (continuation_silence_min < 1 || continuation_silence_max < continuation_silence_min)
        throw std::invalid_argument("manifest: bad continuation silence range");
    for (int n : {n_pretrain, n_finetune, n_test_general, n_test_unseen, n_test_homophone,
                  n_test_segmented, n_target})
        if (n < 1) throw std::invalid_argument("manifest: split sizes must be positive");
}

std::string CorpusManifest::to_json() const {
    json j;
    j["seed"] = seed;
    j["n_domains"] = n_domains;
    j["n_unseen_domains"] = n_unseen_domains;
    j["shared_lexicon_size"] = shared_lexicon_size;
    j["domain_lexicon_size"] = domain_lexicon_size;
    j["n_homophone_groups"] = n_homophone_groups;
    j["frames_per_word"] = frames_per_word;
    j["frame_rate"] = frame_rate;
    j["feat_dim"] = feat_dim;
    j["sigma"] = sigma;
    j["p_noprompt"] = p_noprompt;
    j["continuation_silence_min"] = continuation_silence_min;
    j["continuation_silence_max"] = continuation_silence_max;
    j["n_pretrain"] = n_pretrain;
    j["n_finetune"] = n_finetune;
    j["n_test_general"] = n_test_general;
    j["n_test_unseen"] = n_test_unseen;
    j["n_test_homophone"] = n_test_homophone;
    j["n_test_segmented"] = n_test_segmented;
    j["n_target"] = n_target;
    return j.dump(2) + "\n";
}

CorpusManifest CorpusManifest::from_json(const std::string& text) {
    json j = json::parse(text);
    CorpusManifest m;
    m.seed = j.value("seed", m.seed);
    m.n_domains = j.value("n_domains", m.n_domains);
    m.n_unseen_domains = j.value("n_unseen_domains", m.n_unseen_domains);
    m.shared_lexicon_size = j.value("shared_lexicon_size", m.shared_lexicon_size);
    m.domain_lexicon_size = j.value("domain_lexicon_size", m.domain_lexicon_size);
    m.n_homophone_groups = j.value("n_homophone_groups", m.n_homophone_groups);
    m.frames_per_word = j.value("frames_per_word", m.frames_per_word);
    m.frame_rate = j.value("frame_rate", m.frame_rate);
    m.feat_dim = j.value("feat_dim", m.feat_dim);
    m.sigma = j.value("sigma", m.sigma);
    m.p_noprompt = j.value("p_noprompt", m.p_noprompt);
    m.continuation_silence_min = j.value("continuation_silence_min", m.continuation_silence_min);
    m.continuation_silence_max = j.value("continuation_silence_max", m.continuation_silence_max);
    m.n_pretrain = j.value("n_pretrain", m.n_pretrain);
    m.n_finetune = j.value("n_finetune", m.n_finetune);
    m.n_test_general = j.value("n_test_general", m.n_test_general);
    m.n_test_unseen = j.value("n_test_unseen", m.n_test_unseen);
    m.n_test_homophone = j.value("n_test_homophone", m.n_test_homophone);
    m.n_test_segmented = j.value("n_test_segmented", m.n_test_segmented);
    m.n_target = j.value("n_target", m.n_target);
    return m;
}

void CorpusManifest::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write manifest: " + path);
    f << to_json();
}

CorpusManifest CorpusManifest::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read manifest: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

AudioRenderer::AudioRenderer(uint64_t seed, int feat_dim, int frames_per_word,
                             std::map<std::string, std::string> word_to_pron)
    : seed_(seed),
      feat_dim_(feat_dim),
      frames_per_word_(frames_per_word),
      word_to_pron_(std::move(word_to_pron)) {}

AudioRenderer::AudioRenderer(const Corpus& corpus)
    : seed_(corpus.manifest.seed),
      feat_dim_(corpus.manifest.feat_dim),
      frames_per_word_(corpus.manifest.frames_per_word) {
    auto absorb = [&](const DomainSpec& d) {
        for (const auto& [code, word] : d.homophone_memberships) word_to_pron_[word] = code;
    };
    for (const auto& d : corpus.train_domains) absorb(d);
    for (const auto& d : corpus.unseen_domains) absorb(d);
    absorb(corpus.target_domain);
}

const std::string& AudioRenderer::pron_code(const std::string& word,
                                            const std::string& /*domain*/) const {
    // homophone written forms are domain-unique words, so the map is global
    auto it = word_to_pron_.find(word);
    return it != word_to_pron_.end() ? it->second : word;
}

std::vector<double> AudioRenderer::code_embedding(const std::string& code) const {
    Rng rng(hash_combine(hash_combine(seed_, hash_str("pron")), hash_str(code)));
    std::vector<double> e(feat_dim_);
    for (double& v : e) v = f32(rng.gaussian());
    return e;
}

AudioFeatures AudioRenderer::render(const std::string& transcript, const std::string& domain,
                                    double sigma, Rng& rng) const {
    std::vector<std::string> words = words_of(transcript);
    if (words.empty()) throw std::invalid_argument("render: empty transcript");
    AudioFeatures out;
    out.feat_dim = feat_dim_;
    out.n_frames = static_cast<int>(words.size()) * frames_per_word_ +
                   static_cast<int>(words.size()) - 1;
    out.frames.assign(static_cast<size_t>(out.n_frames) * feat_dim_, 0.0);
    int frame = 0;
    for (size_t w = 0; w < words.size(); ++w) {
        if (w > 0) ++frame;  // one silence frame between words
        std::vector<double> code = code_embedding(pron_code(words[w], domain));
        for (int k = 0; k < frames_per_word_; ++k, ++frame) {
            double* dst = out.frames.data() + static_cast<size_t>(frame) * feat_dim_;
            for (int j = 0; j < feat_dim_; ++j)
                dst[j] = f32(code[j] + (sigma > 0.0 ? sigma * rng.gaussian() : 0.0));
        }
    }
    return out;
}

namespace {

struct Generator {
    const CorpusManifest& m;
    Corpus& c;
    std::unique_ptr<AudioRenderer> renderer;

    void build_inventory() {
        Rng rng(hash_combine(m.seed, hash_str("inventory")));
        std::set<std::string> used;
        // shared lexicon; the first few words double as sentence starters
        for (int i = 0; i < m.shared_lexicon_size; ++i)
            c.shared_lexicon.push_back(fresh_word(rng, used, 2));
        int n_starters = std::min(6, m.shared_lexicon_size / 4);
        c.sentence_starters.assign(c.shared_lexicon.begin(),
                                   c.shared_lexicon.begin() + n_starters);
        // shared style tags cycled across domains
        std::vector<std::string> style_tags;
        for (int i = 0; i < 4; ++i) style_tags.push_back(fresh_word(rng, used, 3));

        int n_pairs = m.n_domains / 2;
        std::vector<int> groups_per_pair(n_pairs, 0);
        for (int g = 0; g < m.n_homophone_groups; ++g) ++groups_per_pair[g % n_pairs];

        for (int i = 0; i < m.n_domains; ++i) {
            DomainSpec d;
            d.name = "dom_" + pseudo_word(rng, 2) + "_" + std::to_string(i);
            d.tags = {fresh_word(rng, used, 3),
                      fresh_word(rng, used, 2) + " " + fresh_word(rng, used, 2),
                      style_tags[i % 4]};
            for (int w = 0; w < m.domain_lexicon_size; ++w)
                d.lexicon.push_back(fresh_word(rng, used, 2));
            c.train_domains.push_back(std::move(d));
        }
        // homophone groups: domains 2p and 2p+1 share each group of pair p
        // with distinct written forms but one pronunciation code
        int gidx = 0;
        for (int p = 0; p < n_pairs; ++p) {
            for (int g = 0; g < groups_per_pair[p]; ++g, ++gidx) {
                std::string code = "hp" + std::to_string(gidx);
                c.train_domains[2 * p].homophone_memberships[code] = fresh_word(rng, used, 2);
                c.train_domains[2 * p + 1].homophone_memberships[code] = fresh_word(rng, used, 2);
            }
        }
        // combination domains: novel pairs of seen tags, mixed lexicons.
        // pair (i, i+2) always crosses two homophone pairs.
        auto make_combo = [&](int a, int b, const std::string& name) {
            DomainSpec d;
            const DomainSpec& da = c.train_domains[a];
            const DomainSpec& db = c.train_domains[b];
            d.name = name;
            d.tags = {da.tags[0], db.tags[0]};
            d.lexicon = da.lexicon;
            d.lexicon.insert(d.lexicon.end(), db.lexicon.begin(), db.lexicon.end());
            for (const auto& kv : da.homophone_memberships) d.homophone_memberships.insert(kv);
            for (const auto& kv : db.homophone_memberships) d.homophone_memberships.insert(kv);
            d.source_domains = {da.name, db.name};
            return d;
        };
        for (int u = 0; u < m.n_unseen_domains; ++u)
            c.unseen_domains.push_back(
                make_combo(u, u + 2, "unseen_" + std::to_string(u)));
        c.target_domain = make_combo(m.n_unseen_domains, m.n_unseen_domains + 2, "target");

        build_vocab();
        renderer = std::make_unique<AudioRenderer>(c);
    }

    void build_vocab() {
        c.vocab.add_word(".");
        for (const auto& w : c.shared_lexicon) c.vocab.add_word(w);
        auto add_domain = [&](const DomainSpec& d) {
            for (const auto& w : d.lexicon) c.vocab.add_word(w);
            for (const auto& [code, w] : d.homophone_memberships) c.vocab.add_word(w);
            for (const auto& t : d.tags)
                for (const auto& w : words_of(t)) c.vocab.add_word(w);
        };
        for (const auto& d : c.train_domains) add_domain(d);
        // combination domains reuse seen words and tags only
    }

    // One content word. Homophone forms carry their source-domain identity.
    std::string content_word(const DomainSpec& d, Rng& rng, bool allow_homophone) {
        if (rng.uniform() < 0.35) {
            int n_h = static_cast<int>(d.homophone_memberships.size());
            int n = static_cast<int>(d.lexicon.size()) + (allow_homophone ? n_h : 0);
            int k = rng.uniform_int(0, n - 1);
            if (k < static_cast<int>(d.lexicon.size())) return d.lexicon[k];
            auto it = d.homophone_memberships.begin();
            std::advance(it, k - static_cast<int>(d.lexicon.size()));
            return it->second;
        }
        return c.shared_lexicon[rng.uniform_int(0, static_cast<int>(c.shared_lexicon.size()) - 1)];
    }

    std::string homophone_word(const DomainSpec& d, Rng& rng) {
        int n_h = static_cast<int>(d.homophone_memberships.size());
        auto it = d.homophone_memberships.begin();
        std::advance(it, rng.uniform_int(0, n_h - 1));
        return it->second;
    }

    std::vector<std::string> sentence_words(const DomainSpec& d, Rng& rng, int n_content,
                                            int forced_homophones) {
        std::vector<std::string> words;
        words.push_back(c.sentence_starters[rng.uniform_int(
            0, static_cast<int>(c.sentence_starters.size()) - 1)]);
        // the toy language never repeats a word back-to-back; immediate
        // duplicates would be pure sampling artifacts, not content
        auto differs_from_neighbors = [&](size_t pos, const std::string& w) {
            if (pos > 0 && words[pos - 1] == w) return false;
            if (pos + 1 < words.size() && words[pos + 1] == w) return false;
            return true;
        };
        for (int i = 0; i < n_content; ++i) {
            std::string w = content_word(d, rng, true);
            while (w == words.back()) w = content_word(d, rng, true);
            words.push_back(w);
        }
        for (int h = 0; h < forced_homophones; ++h) {
            int pos = rng.uniform_int(1, static_cast<int>(words.size()) - 1);
            std::string w = homophone_word(d, rng);
            for (int tries = 0; tries < 16 && !differs_from_neighbors(pos, w); ++tries) {
                pos = rng.uniform_int(1, static_cast<int>(words.size()) - 1);
                w = homophone_word(d, rng);
            }
            if (differs_from_neighbors(pos, w)) words[pos] = w;
        }
        // terminator word: makes the end of the utterance predictable from
        // text alone and audible as its own frame group; WER normalization
        // strips it, so it never scores
        words.push_back(".");
        return words;
    }

    const DomainSpec& pick_train_domain(Rng& rng) {
        return c.train_domains[rng.uniform_int(0, m.n_domains - 1)];
    }

    static void prepend_silence(AudioFeatures& audio, int lead) {
        std::vector<double> frames(static_cast<size_t>(lead) * audio.feat_dim, 0.0);
        frames.insert(frames.end(), audio.frames.begin(), audio.frames.end());
        audio.frames = std::move(frames);
        audio.n_frames += lead;
    }

    Sample full_sentence_sample(const DomainSpec& d, const std::string& split, int index,
                                int forced_homophones, int min_content = 3) {
        Rng rng(sample_stream(m.seed, split, index));
        int n_content = rng.uniform_int(min_content, 8);
        std::vector<std::string> words = sentence_words(d, rng, n_content, forced_homophones);
        Sample s;
        s.id = split + "-" + std::to_string(index);
        s.domain = d.name;
        s.tags = d.tags;
        s.transcript = join(words, 0, words.size());
        s.audio = renderer->render(s.transcript, d.name, m.sigma, rng);
        // Every natural utterance starts with a short silence, so silence at
        // the start carries no information about what occupies the decoder's
        // context slot; only segmentation removes it.
        int lead = rng.uniform_int(m.continuation_silence_min, m.continuation_silence_max);
        prepend_silence(s.audio, lead);
        return s;
    }

    // History-conditioned continuation: a long utterance split at a word
    // boundary; the continuation audio starts with a short silence, the pause
    // the segmenter would cut at.
    Sample continuation_sample(const DomainSpec& d, const std::string& split, int index) {
        Rng rng(sample_stream(m.seed, split, index));
        // History length and continuation length are drawn independently, so
        // the amount of text in the decoder's context slot carries no
        // information about how long the transcript should be.
        int history_len = rng.uniform_int(2, 10);
        int rest_len = rng.uniform_int(3, 8);
        std::vector<std::string> words = sentence_words(d, rng, history_len + rest_len, 0);
        int cut = history_len;
        Sample s;
        s.id = split + "-" + std::to_string(index);
        s.domain = d.name;
        s.tags = d.tags;
        s.previous_text = join(words, 0, cut);
        s.transcript = join(words, cut, words.size());
        s.segment_kind = SegmentKind::MidSentence;
        s.audio = renderer->render(s.transcript, d.name, m.sigma, rng);
        int lead = rng.uniform_int(m.continuation_silence_min, m.continuation_silence_max);
        prepend_silence(s.audio, lead);
        return s;
    }

    void generate_splits() {
        for (int i = 0; i < m.n_pretrain; ++i) {
            Rng pick(sample_stream(m.seed, "pretrain-pick", i));
            const DomainSpec& d = pick_train_domain(pick);
            bool history = pick.uniform() < 0.5;
            c.pretrain.push_back(history ? continuation_sample(d, "pretrain", i)
                                         : full_sentence_sample(d, "pretrain", i, 0));
            c.pretrain.back().tags.clear();  // pretraining never sees domain tags
        }
        for (int i = 0; i < m.n_finetune; ++i) {
            Rng pick(sample_stream(m.seed, "finetune-pick", i));
            c.finetune_general.push_back(
                full_sentence_sample(pick_train_domain(pick), "finetune_general", i,
                                     /*forced_homophones=*/1 + (i % 2)));
        }
        for (int i = 0; i < m.n_test_general; ++i) {
            Rng pick(sample_stream(m.seed, "test_general-pick", i));
            c.test_general.push_back(
                full_sentence_sample(pick_train_domain(pick), "test_general", i, 0));
        }
        for (int i = 0; i < m.n_test_unseen; ++i) {
            Rng pick(sample_stream(m.seed, "test_unseen-pick", i));
            const DomainSpec& d = c.unseen_domains[pick.uniform_int(
                0, static_cast<int>(c.unseen_domains.size()) - 1)];
            c.test_unseen_domains.push_back(
                full_sentence_sample(d, "test_unseen_domains", i, 2));
        }
        for (int i = 0; i < m.n_test_homophone; ++i) {
            Rng pick(sample_stream(m.seed, "test_homophone-pick", i));
            c.test_homophone.push_back(
                full_sentence_sample(pick_train_domain(pick), "test_homophone", i, 2));
        }
        for (int i = 0; i < m.n_test_segmented; ++i) {
            Rng pick(sample_stream(m.seed, "test_segmented-pick", i));
            Sample full = full_sentence_sample(pick_train_domain(pick), "test_segmented", i, 1,
                                               /*min_content=*/5);
            Rng segrng(sample_stream(m.seed, "test_segmented-cut", i));
            c.test_segmented.push_back(make_segmented(full, m.frames_per_word, segrng));
        }
        // 85:15 adaptation / evaluation split of the target domain
        int n_adapt = static_cast<int>(m.n_target * 0.85 + 0.5);
        for (int i = 0; i < m.n_target; ++i) {
            Sample s = full_sentence_sample(c.target_domain, "target", i, 2);
            if (i < n_adapt)
                c.adapt_target.push_back(std::move(s));
            else
                c.eval_target.push_back(std::move(s));
        }
    }
};

}  // namespace

Corpus generate_corpus(const CorpusManifest& manifest) {
    manifest.validate();
    Corpus c;
    c.manifest = manifest;
    Generator g{manifest, c, nullptr};
    g.build_inventory();
    g.generate_splits();
    return c;
}

std::optional<std::vector<std::string>> sample_training_prompt(const Sample& sample,
                                                               double p_noprompt, Rng& rng) {
    if (sample.tags.empty()) throw std::invalid_argument("sample_training_prompt: sample has no tags");
    if (rng.uniform() < p_noprompt) return std::nullopt;
    int size = rng.uniform_int(1, static_cast<int>(sample.tags.size()));
    std::vector<std::string> tags = sample.tags;
    rng.shuffle(tags);
    tags.resize(size);
    return tags;
}

Sample make_segmented(const Sample& sample, int frames_per_word, Rng& rng) {
    std::vector<std::string> words = words_of(sample.transcript);
    if (words.size() < 4)
        throw std::invalid_argument("make_segmented: transcript must have at least 4 words");
    if (sample.segment_kind != SegmentKind::FullSentence)
        throw std::invalid_argument("make_segmented: input must be a full-sentence sample");
    int drop = rng.uniform_int(1, static_cast<int>(words.size()) / 2);
    Sample out = sample;
    out.previous_text = join(words, 0, drop);
    out.transcript = join(words, drop, words.size());
    out.segment_kind = SegmentKind::MidSentence;
    // remove the leading silence plus the first `drop` word blocks and their
    // trailing silence frames, so the segment begins abruptly at a word onset
    int body_frames = static_cast<int>(words.size()) * (frames_per_word + 1) - 1;
    int lead = sample.audio.n_frames - body_frames;
    if (lead < 0) throw std::invalid_argument("make_segmented: audio shorter than transcript");
    int cut_frames = lead + drop * (frames_per_word + 1);
    out.audio.n_frames = sample.audio.n_frames - cut_frames;
    out.audio.frames.assign(
        sample.audio.frames.begin() + static_cast<size_t>(cut_frames) * sample.audio.feat_dim,
        sample.audio.frames.end());
    return out;
}

void save_split(const std::vector<Sample>& split, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write split file: " + path);
    for (const auto& s : split) f << sample_to_json(s).dump() << '\n';
}

std::vector<Sample> load_split(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read split file: " + path);
    std::vector<Sample> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        out.push_back(sample_from_json(json::parse(line)));
    }
    return out;
}

const std::vector<std::string>& corpus_split_names() {
    static const std::vector<std::string> names(std::begin(kSplitNames), std::end(kSplitNames));
    return names;
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    corpus.manifest.save(dir + "/manifest.json");
    corpus.vocab.save(dir + "/vocab.txt");
    const std::vector<Sample>* splits[] = {
        &corpus.pretrain,       &corpus.finetune_general, &corpus.test_general,
        &corpus.test_unseen_domains, &corpus.test_homophone, &corpus.test_segmented,
        &corpus.adapt_target,   &corpus.eval_target,
    };
    for (size_t i = 0; i < corpus_split_names().size(); ++i)
        save_split(*splits[i], dir + "/" + corpus_split_names()[i] + ".jsonl");
}

CorpusOnDisk load_corpus(const std::string& dir) {
    CorpusOnDisk d;
    d.manifest = CorpusManifest::load(dir + "/manifest.json");
    d.vocab = Vocab::load(dir + "/vocab.txt");
    for (const auto& name : corpus_split_names())
        d.splits[name] = load_split(dir + "/" + name + ".jsonl");
    return d;
}

}  // namespace clair
