#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "clair/checkpoint.hpp"
#include "clair/corpus.hpp"
#include "clair/decode.hpp"
#include "clair/experiments.hpp"
#include "clair/metrics.hpp"
#include "clair/tokens.hpp"

namespace py = pybind11;
using namespace clair;

namespace {

// Checkpoint + vocab bundled for decoding from python.
class Transcriber {
public:
    Transcriber(const std::string& ckpt_path, const std::string& vocab_path)
        : ckpt_(load_checkpoint(ckpt_path)), vocab_(Vocab::load(vocab_path)) {
        set_audio_mode(ckpt_.model, AudioMode::CrossAttend);
    }

    std::string transcribe_frames(const std::vector<double>& frames, int feat_dim,
                                  const std::optional<std::vector<std::string>>& tags, int beams,
                                  int pad_frames) const {
        if (feat_dim <= 0 || frames.size() % feat_dim != 0)
            throw std::invalid_argument("frames length must be a multiple of feat_dim");
        AudioFeatures audio;
        audio.feat_dim = feat_dim;
        audio.n_frames = static_cast<int>(frames.size()) / feat_dim;
        audio.frames = frames;
        DecodeConfig dc;
        dc.beam_size = beams;
        dc.pad_frames = pad_frames;
        if (tags) dc.prompt_tags = tags;
        return transcribe(ckpt_.model, audio, vocab_, dc);
    }

    std::string regime() const { return ckpt_.meta.regime; }

private:
    Checkpoint ckpt_;
    Vocab vocab_;
};

}  // namespace

PYBIND11_MODULE(_clairlab, m) {
    m.doc() = "prompt-conditioned toy transcriber core";

    m.def("format_prompt", &format_prompt, py::arg("tags"));
    m.def("parse_prompt", &parse_prompt, py::arg("prompt"));
    m.def("normalize", &normalize, py::arg("text"));
    m.def("werr", &werr, py::arg("wer_base"), py::arg("wer_new"));
    m.def(
        "wer",
        [](const std::string& ref, const std::string& hyp) {
            WerBreakdown b = wer(ref, hyp);
            py::dict d;
            d["substitutions"] = b.substitutions;
            d["deletions"] = b.deletions;
            d["insertions"] = b.insertions;
            d["n_ref_words"] = b.n_ref_words;
            d["wer"] = b.wer;
            return d;
        },
        py::arg("reference"), py::arg("hypothesis"));
    m.def(
        "generate_corpus",
        [](const std::string& out_dir, const std::optional<std::string>& manifest_path) {
            CorpusManifest manifest =
                manifest_path ? CorpusManifest::load(*manifest_path) : CorpusManifest{};
            Corpus corpus = generate_corpus(manifest);
            save_corpus(corpus, out_dir);
            py::dict sizes;
            sizes["pretrain"] = corpus.pretrain.size();
            sizes["finetune_general"] = corpus.finetune_general.size();
            sizes["test_general"] = corpus.test_general.size();
            sizes["test_unseen_domains"] = corpus.test_unseen_domains.size();
            sizes["test_homophone"] = corpus.test_homophone.size();
            sizes["test_segmented"] = corpus.test_segmented.size();
            sizes["adapt_target"] = corpus.adapt_target.size();
            sizes["eval_target"] = corpus.eval_target.size();
            return sizes;
        },
        py::arg("out_dir"), py::arg("manifest_path") = std::nullopt);

    py::class_<Transcriber>(m, "Transcriber")
        .def(py::init<const std::string&, const std::string&>(), py::arg("checkpoint"),
             py::arg("vocab"))
        .def("transcribe", &Transcriber::transcribe_frames, py::arg("frames"),
             py::arg("feat_dim"), py::arg("tags") = std::nullopt, py::arg("beams") = 3,
             py::arg("pad_frames") = 0)
        .def_property_readonly("regime", &Transcriber::regime);
}
