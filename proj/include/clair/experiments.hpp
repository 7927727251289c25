#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clair/corpus.hpp"
#include "clair/decode.hpp"
#include "clair/metrics.hpp"
#include "clair/model.hpp"

namespace clair {

// One cell of a Table-1/2/3-shaped grid.
struct GridCell {
    std::string model;
    bool prompt_on = false;
    int pad_frames = 0;
    std::string dataset;
    WerBreakdown wer;
    int n_samples = 0;
    std::optional<double> werr_vs_reference;
};

using ModelsByName = std::map<std::string, const TranscriberModel*>;
using SplitsByName = std::map<std::string, std::vector<Sample>>;

// Pooled corpus WER of one (model, dataset, prompt, pad) condition.
// prompt_on takes each sample's own tags; decoding uses three beams.
WerBreakdown eval_pooled_wer(const TranscriberModel& model, const std::vector<Sample>& samples,
                             const Vocab& vocab, bool prompt_on, int beam_size = 3,
                             int pad_frames = 0);

// table1: {baseline, clairaudience, text_only} x {prompt off, on}
//         x {test_general, test_unseen_domains, test_homophone};
//         WERR vs baseline prompt-off per dataset.
std::vector<GridCell> eval_table1(const ModelsByName& models, const SplitsByName& splits,
                                  const Vocab& vocab);

// table2: {baseline, text_only} x {pad 0, pad 5} on test_segmented, prompts on;
//         WERR vs baseline pad-0.
std::vector<GridCell> eval_table2(const ModelsByName& models, const SplitsByName& splits,
                                  const Vocab& vocab);

// table3: {baseline, da_audio_text, da_text_only, clairaudience+prompt,
//         text_only+prompt} on eval_target; WERR vs the un-adapted baseline.
std::vector<GridCell> eval_table3(const ModelsByName& models, const SplitsByName& splits,
                                  const Vocab& vocab);

void write_report_csv(const std::vector<GridCell>& cells, const std::string& path);

// Checkpoints each grid requires, by model name.
const std::vector<std::string>& grid_required_models(const std::string& grid);

}  // namespace clair
