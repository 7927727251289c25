#pragma once

#include <optional>
#include <string>
#include <vector>

namespace clair {

struct WerBreakdown {
    int substitutions = 0;
    int deletions = 0;
    int insertions = 0;
    int n_ref_words = 0;
    double wer = 0.0;  // percent

    int edits() const { return substitutions + deletions + insertions; }
};

// lowercase, strip punctuation characters, collapse whitespace
std::string normalize(const std::string& text);

// Word-level Levenshtein with unit costs; among cost-equal alignments the
// traceback prefers match > substitution > deletion > insertion.
// Empty reference: N is treated as max(1, N).
WerBreakdown wer(const std::string& reference, const std::string& hypothesis);

// 100 * (base - new) / base; nullopt when base == 0.
std::optional<double> werr(double wer_base, double wer_new);

// Pooled counts over the corpus (sum S,D,I / total N), not mean of rates.
WerBreakdown corpus_wer(const std::vector<std::string>& references,
                        const std::vector<std::string>& hypotheses);

}  // namespace clair
