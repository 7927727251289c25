#include "clair/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <sstream>
#include <stdexcept>

namespace clair {

namespace {

std::vector<std::string> words_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

}  // namespace

std::string normalize(const std::string& text) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
        } else if (std::ispunct(c)) {
            // stripped
        } else {
            if (pending_space) out += ' ';
            pending_space = false;
            out += static_cast<char>(std::tolower(c));
        }
    }
    return out;
}

WerBreakdown wer(const std::string& reference, const std::string& hypothesis) {
    std::vector<std::string> ref = words_of(reference);
    std::vector<std::string> hyp = words_of(hypothesis);
    size_t n = ref.size(), m = hyp.size();
    // d[i][j] = edit distance between ref[0..i) and hyp[0..j)
    std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
    // op[i][j]: 0=match, 1=sub, 2=del (drop ref word), 3=ins (extra hyp word)
    std::vector<std::vector<uint8_t>> op(n + 1, std::vector<uint8_t>(m + 1, 0));
    for (size_t i = 1; i <= n; ++i) {
        d[i][0] = static_cast<int>(i);
        op[i][0] = 2;
    }
    for (size_t j = 1; j <= m; ++j) {
        d[0][j] = static_cast<int>(j);
        op[0][j] = 3;
    }
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            bool eq = ref[i - 1] == hyp[j - 1];
            int diag = d[i - 1][j - 1] + (eq ? 0 : 1);
            int del = d[i - 1][j] + 1;
            int ins = d[i][j - 1] + 1;
            // preference at equal cost: match > sub > del > ins
            int best = diag;
            uint8_t o = eq ? 0 : 1;
            if (del < best) {
                best = del;
                o = 2;
            }
            if (ins < best) {
                best = ins;
                o = 3;
            }
            d[i][j] = best;
            op[i][j] = o;
        }
    }
    WerBreakdown out;
    out.n_ref_words = static_cast<int>(n);
    size_t i = n, j = m;
    while (i > 0 || j > 0) {
        switch (op[i][j]) {
            case 0:
                --i;
                --j;
                break;
            case 1:
                ++out.substitutions;
                --i;
                --j;
                break;
            case 2:
                ++out.deletions;
                --i;
                break;
            default:
                ++out.insertions;
                --j;
                break;
        }
    }
    int denom = std::max<size_t>(1, n);
    out.wer = 100.0 * out.edits() / denom;
    return out;
}

std::optional<double> werr(double wer_base, double wer_new) {
    if (wer_base == 0.0) return std::nullopt;
    return 100.0 * (wer_base - wer_new) / wer_base;
}

WerBreakdown corpus_wer(const std::vector<std::string>& references,
                        const std::vector<std::string>& hypotheses) {
    if (references.size() != hypotheses.size())
        throw std::invalid_argument("corpus_wer: reference/hypothesis count mismatch");
    WerBreakdown pooled;
    for (size_t k = 0; k < references.size(); ++k) {
        WerBreakdown one = wer(references[k], hypotheses[k]);
        pooled.substitutions += one.substitutions;
        pooled.deletions += one.deletions;
        pooled.insertions += one.insertions;
        pooled.n_ref_words += one.n_ref_words;
    }
    pooled.wer = 100.0 * pooled.edits() / std::max(1, pooled.n_ref_words);
    return pooled;
}

}  // namespace clair
