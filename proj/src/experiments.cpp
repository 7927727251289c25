#include "clair/experiments.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>

namespace clair {

namespace {

const std::vector<Sample>& split_or_throw(const SplitsByName& splits, const std::string& name) {
    auto it = splits.find(name);
    if (it == splits.end()) throw std::invalid_argument("eval grid: missing split '" + name + "'");
    return it->second;
}

const TranscriberModel& model_or_throw(const ModelsByName& models, const std::string& name,
                                       const std::string& grid) {
    auto it = models.find(name);
    if (it == models.end() || it->second == nullptr)
        throw std::invalid_argument(grid + ": missing checkpoint for model '" + name + "'");
    return *it->second;
}

GridCell make_cell(const TranscriberModel& model, const std::string& model_name,
                   const std::vector<Sample>& samples, const Vocab& vocab, bool prompt_on,
                   int pad_frames, const std::string& dataset) {
    GridCell cell;
    cell.model = model_name;
    cell.prompt_on = prompt_on;
    cell.pad_frames = pad_frames;
    cell.dataset = dataset;
    cell.wer = eval_pooled_wer(model, samples, vocab, prompt_on, 3, pad_frames);
    cell.n_samples = static_cast<int>(samples.size());
    return cell;
}

void fill_werr(std::vector<GridCell>& cells,
               const std::function<bool(const GridCell&)>& is_reference) {
    for (auto& cell : cells) {
        for (const auto& ref : cells) {
            if (ref.dataset == cell.dataset && is_reference(ref)) {
                cell.werr_vs_reference = werr(ref.wer.wer, cell.wer.wer);
                break;
            }
        }
    }
}

}  // namespace

WerBreakdown eval_pooled_wer(const TranscriberModel& model, const std::vector<Sample>& samples,
                             const Vocab& vocab, bool prompt_on, int beam_size, int pad_frames) {
    if (model.mode != AudioMode::CrossAttend)
        throw std::invalid_argument("eval_pooled_wer: model must be in CrossAttend mode");
    std::vector<std::string> refs, hyps;
    refs.reserve(samples.size());
    for (const auto& s : samples) {
        DecodeConfig dc;
        dc.beam_size = beam_size;
        dc.pad_frames = pad_frames;
        if (prompt_on && !s.tags.empty()) dc.prompt_tags = s.tags;
        refs.push_back(normalize(s.transcript));
        hyps.push_back(normalize(transcribe(model, s.audio, vocab, dc)));
    }
    return corpus_wer(refs, hyps);
}

std::vector<GridCell> eval_table1(const ModelsByName& models, const SplitsByName& splits,
                                  const Vocab& vocab) {
    std::vector<GridCell> cells;
    for (const char* name : {"baseline", "clairaudience", "text_only"}) {
        const TranscriberModel& m = model_or_throw(models, name, "table1");
        for (bool prompt_on : {false, true}) {
            for (const char* ds : {"test_general", "test_unseen_domains", "test_homophone"}) {
                cells.push_back(
                    make_cell(m, name, split_or_throw(splits, ds), vocab, prompt_on, 0, ds));
            }
        }
    }
    fill_werr(cells, [](const GridCell& c) { return c.model == "baseline" && !c.prompt_on; });
    return cells;
}

std::vector<GridCell> eval_table2(const ModelsByName& models, const SplitsByName& splits,
                                  const Vocab& vocab) {
    std::vector<GridCell> cells;
    const std::vector<Sample>& seg = split_or_throw(splits, "test_segmented");
    for (const char* name : {"baseline", "text_only"}) {
        const TranscriberModel& m = model_or_throw(models, name, "table2");
        for (int pad : {0, 5})
            cells.push_back(make_cell(m, name, seg, vocab, true, pad, "test_segmented"));
    }
    fill_werr(cells, [](const GridCell& c) { return c.model == "baseline" && c.pad_frames == 0; });
    return cells;
}

std::vector<GridCell> eval_table3(const ModelsByName& models, const SplitsByName& splits,
                                  const Vocab& vocab) {
    const std::vector<Sample>& ev = split_or_throw(splits, "eval_target");
    // row order follows the domain-adaptation comparison layout
    struct Row {
        const char* model;
        bool prompt_on;
    };
    const Row rows[] = {{"baseline", false},
                        {"da_audio_text", false},
                        {"da_text_only", false},
                        {"clairaudience", true},
                        {"text_only", true}};
    std::vector<GridCell> cells;
    for (const Row& r : rows) {
        const TranscriberModel& m = model_or_throw(models, r.model, "table3");
        cells.push_back(make_cell(m, r.model, ev, vocab, r.prompt_on, 0, "eval_target"));
    }
    fill_werr(cells, [](const GridCell& c) { return c.model == "baseline"; });
    return cells;
}

void write_report_csv(const std::vector<GridCell>& cells, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write report: " + path);
    f << "model_name,prompt_on,pad_frames,dataset,wer,n_samples,werr_vs_reference\n";
    char buf[64];
    for (const auto& c : cells) {
        std::snprintf(buf, sizeof buf, "%.4f", c.wer.wer);
        f << c.model << ',' << (c.prompt_on ? "true" : "false") << ',' << c.pad_frames << ','
          << c.dataset << ',' << buf << ',' << c.n_samples << ',';
        if (c.werr_vs_reference) {
            std::snprintf(buf, sizeof buf, "%.4f", *c.werr_vs_reference);
            f << buf;
        } else {
            f << "n/a";
        }
        f << '\n';
    }
}

const std::vector<std::string>& grid_required_models(const std::string& grid) {
    static const std::vector<std::string> t1 = {"baseline", "clairaudience", "text_only"};
    static const std::vector<std::string> t2 = {"baseline", "text_only"};
    static const std::vector<std::string> t3 = {"baseline", "da_audio_text", "da_text_only",
                                                "clairaudience", "text_only"};
    if (grid == "table1") return t1;
    if (grid == "table2") return t2;
    if (grid == "table3") return t3;
    throw std::invalid_argument("unknown grid '" + grid + "' (expected table1|table2|table3)");
}

}  // namespace clair
