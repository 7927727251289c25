#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clair/model.hpp"
#include "clair/rng.hpp"
#include "clair/tokens.hpp"

namespace clair {

enum class SegmentKind { FullSentence, MidSentence };

struct Sample {
    std::string id;
    std::string domain;
    std::vector<std::string> tags;
    std::string transcript;
    std::optional<std::string> previous_text;
    SegmentKind segment_kind = SegmentKind::FullSentence;
    AudioFeatures audio;
};

struct DomainSpec {
    std::string name;
    std::vector<std::string> tags;              // primary, secondary, shared style tag
    std::vector<std::string> lexicon;           // regular content words
    // pronunciation code -> this domain's written form
    std::map<std::string, std::string> homophone_memberships;
    // for combination domains: which seen domains the lexicon mixes
    std::vector<std::string> source_domains;
};

struct CorpusManifest {
    uint64_t seed = 1;
    int n_domains = 8;
    int n_unseen_domains = 2;
    int shared_lexicon_size = 40;
    int domain_lexicon_size = 20;
    int n_homophone_groups = 12;
    int frames_per_word = 3;   // F
    int frame_rate = 10;       // frames per simulated second
    int feat_dim = 16;
    double sigma = 0.05;
    double p_noprompt = 0.2;
    // leading silence attached to mid-sentence (history-conditioned) audio
    int continuation_silence_min = 4;
    int continuation_silence_max = 6;
    // split sizes
    int n_pretrain = 3000;
    int n_finetune = 2000;
    int n_test_general = 150;
    int n_test_unseen = 150;
    int n_test_homophone = 150;
    int n_test_segmented = 150;
    int n_target = 400;  // adapt+eval, split 85:15

    void validate() const;
    std::string to_json() const;
    static CorpusManifest from_json(const std::string& text);
    void save(const std::string& path) const;
    static CorpusManifest load(const std::string& path);
};

struct Corpus {
    CorpusManifest manifest;
    std::vector<DomainSpec> train_domains;
    std::vector<DomainSpec> unseen_domains;  // novel tag combinations of seen tags
    DomainSpec target_domain;                // adaptation target (also a novel combination)
    std::vector<std::string> shared_lexicon;
    std::vector<std::string> sentence_starters;  // subset of shared lexicon

    std::vector<Sample> pretrain;
    std::vector<Sample> finetune_general;
    std::vector<Sample> test_general;
    std::vector<Sample> test_unseen_domains;
    std::vector<Sample> test_homophone;
    std::vector<Sample> test_segmented;
    std::vector<Sample> adapt_target;
    std::vector<Sample> eval_target;

    Vocab vocab;  // closed vocabulary over every word the corpus can emit
};

// The acoustic channel. Each word renders to F frames equal to its
// pronunciation-code embedding plus N(0, sigma^2) noise, with one silence
// (all-zero) frame between words. Homophones share a pronunciation code, so
// at sigma=0 their audio is identical across domains.
class AudioRenderer {
public:
    AudioRenderer(const Corpus& corpus);
    AudioRenderer(uint64_t seed, int feat_dim, int frames_per_word,
                  std::map<std::string, std::string> word_to_pron);

    AudioFeatures render(const std::string& transcript, const std::string& domain, double sigma,
                         Rng& rng) const;
    const std::string& pron_code(const std::string& word, const std::string& domain) const;
    std::vector<double> code_embedding(const std::string& code) const;

private:
    uint64_t seed_;
    int feat_dim_;
    int frames_per_word_;
    // "domain\x1fword" -> pronunciation code; plain words map to themselves
    std::map<std::string, std::string> word_to_pron_;
};

Corpus generate_corpus(const CorpusManifest& manifest);

// Tag subset sampling for training prompts: with probability p_noprompt no
// prompt at all, otherwise a uniformly sized shuffled subset of the tags.
std::optional<std::vector<std::string>> sample_training_prompt(const Sample& sample,
                                                               double p_noprompt, Rng& rng);

// Drop a random prefix of 1..len/2 words from transcript and audio; the
// result begins mid-word-stream with no leading silence frame.
Sample make_segmented(const Sample& sample, int frames_per_word, Rng& rng);

// Corpus files: one JSON record per line, audio as base64 of LE float32.
void save_split(const std::vector<Sample>& split, const std::string& path);
std::vector<Sample> load_split(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& dir);

// What cli/train/eval need back from disk.
struct CorpusOnDisk {
    CorpusManifest manifest;
    Vocab vocab;
    std::map<std::string, std::vector<Sample>> splits;
};
CorpusOnDisk load_corpus(const std::string& dir);

const std::vector<std::string>& corpus_split_names();

std::string base64_encode(const unsigned char* data, size_t len);
std::vector<unsigned char> base64_decode(const std::string& text);

}  // namespace clair
