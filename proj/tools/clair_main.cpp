#include <CLI11.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "clair/checkpoint.hpp"
#include "clair/corpus.hpp"
#include "clair/decode.hpp"
#include "clair/experiments.hpp"
#include "clair/trainer.hpp"

namespace fs = std::filesystem;
using namespace clair;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        size_t b = item.find_first_not_of(' ');
        size_t e = item.find_last_not_of(' ');
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

int cmd_gen_data(const std::string& manifest_path, const std::string& out_dir) {
    CorpusManifest manifest =
        manifest_path.empty() ? CorpusManifest{} : CorpusManifest::load(manifest_path);
    Corpus corpus = generate_corpus(manifest);
    save_corpus(corpus, out_dir);
    const std::vector<Sample>* splits[] = {
        &corpus.pretrain,       &corpus.finetune_general, &corpus.test_general,
        &corpus.test_unseen_domains, &corpus.test_homophone, &corpus.test_segmented,
        &corpus.adapt_target,   &corpus.eval_target,
    };
    for (size_t i = 0; i < corpus_split_names().size(); ++i)
        std::cout << corpus_split_names()[i] << ": " << splits[i]->size() << " samples\n";
    std::cout << "vocab: " << corpus.vocab.size() << " tokens\n";
    return 0;
}

int cmd_train(const std::string& regime_str, const std::string& data_dir,
              const std::string& init_path, const std::string& out_path, uint64_t seed,
              std::optional<int> steps, std::optional<double> lr, std::optional<int> batch,
              int eval_every, const std::string& log_path) {
    Regime regime = regime_from_name(regime_str);
    if (regime != Regime::Pretrain && init_path.empty())
        throw CLI::ValidationError("--init", "regime '" + regime_str +
                                                 "' fine-tunes a pretrain checkpoint; pass --init");
    if (regime == Regime::Pretrain && !init_path.empty())
        throw CLI::ValidationError("--init", "pretrain starts from a fresh model; drop --init");

    CorpusOnDisk corpus = load_corpus(data_dir);
    TranscriberModel model;
    std::string parent_hash;
    if (regime == Regime::Pretrain) {
        ModelConfig cfg;
        cfg.vocab_size = corpus.vocab.size();
        cfg.audio_feat_dim = corpus.manifest.feat_dim;
        cfg.rng_seed = seed;
        model = make_model(cfg);
    } else {
        Checkpoint ckpt = load_checkpoint(init_path);
        model = std::move(ckpt.model);
        parent_hash = file_hash_hex(init_path);
    }

    static const std::map<Regime, std::string> kDataSplit = {
        {Regime::Pretrain, "pretrain"},
        {Regime::PromptAudioText, "finetune_general"},
        {Regime::PromptTextOnly, "finetune_general"},
        {Regime::DaAudioText, "adapt_target"},
        {Regime::DaTextOnly, "adapt_target"},
    };
    const std::vector<Sample>& data = corpus.splits.at(kDataSplit.at(regime));

    TrainConfig cfg = TrainConfig::defaults_for(regime, seed);
    if (steps) cfg.max_steps = *steps;
    if (lr) cfg.learning_rate = *lr;
    if (batch) cfg.batch_size = *batch;
    cfg.eval_every = eval_every;
    cfg.validate();

    TrainLog log;
    const std::vector<Sample>* eval_set =
        eval_every > 0 ? &corpus.splits.at("test_general") : nullptr;
    train(model, data, corpus.vocab, corpus.manifest.p_noprompt, cfg, &log, eval_set);

    CheckpointMeta meta;
    meta.regime = regime_str;
    meta.seed = seed;
    meta.steps = cfg.max_steps;
    meta.parent_hash = parent_hash;
    save_checkpoint(model, meta, out_path);
    log.save(log_path.empty() ? out_path + ".log.jsonl" : log_path);
    std::cout << "wrote " << out_path << " (" << model.total_param_count() << " parameters, "
              << cfg.max_steps << " steps)\n";
    return 0;
}

int cmd_transcribe(const std::string& ckpt_path, const std::string& audio_path,
                   const std::string& vocab_path, const std::string& tags_csv, int beams,
                   int pad_frames, bool longform, bool trace) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    set_audio_mode(ckpt.model, AudioMode::CrossAttend);
    Vocab vocab = Vocab::load(vocab_path);

    std::ifstream f(audio_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read audio record: " + audio_path);
    std::string line;
    std::getline(f, line);
    nlohmann::json j = nlohmann::json::parse(line);
    AudioFeatures audio;
    audio.n_frames = j.at("n_frames").get<int>();
    audio.feat_dim = j.at("feat_dim").get<int>();
    auto bytes = base64_decode(j.at("audio").get<std::string>());
    std::vector<float> fl(bytes.size() / sizeof(float));
    memcpy(fl.data(), bytes.data(), bytes.size());
    audio.frames.assign(fl.begin(), fl.end());

    DecodeConfig dc;
    dc.beam_size = beams;
    dc.pad_frames = pad_frames;
    if (!tags_csv.empty()) dc.prompt_tags = split_csv(tags_csv);

    std::vector<DecodeTraceRecord> records;
    std::string text;
    if (longform) {
        text = transcribe_longform(ckpt.model, audio, vocab, dc, trace ? &records : nullptr);
    } else {
        if (audio.n_frames + pad_frames > ckpt.model.cfg.max_audio_frames)
            throw std::runtime_error("audio exceeds max_audio_frames; pass --longform");
        if (trace) {
            text = transcribe_longform(ckpt.model, audio, vocab, dc, &records);
        } else {
            text = transcribe(ckpt.model, audio, vocab, dc);
        }
    }
    if (trace) {
        for (const auto& r : records) {
            nlohmann::json tj;
            tj["window"] = r.window;
            tj["prev_slot_kind"] = r.prev_slot_kind;
            tj["prev_slot_text"] = r.prev_slot_text;
            tj["output"] = r.output;
            tj["pad_frames"] = pad_frames;
            std::cerr << tj.dump() << "\n";
        }
    }
    std::cout << text << "\n";
    return 0;
}

int cmd_eval_grid(const std::string& grid, const std::map<std::string, std::string>& ckpt_paths,
                  const std::string& data_dir, const std::string& out_path) {
    const std::vector<std::string>& required = grid_required_models(grid);
    std::vector<std::string> missing;
    for (const auto& name : required)
        if (!ckpt_paths.count(name) || ckpt_paths.at(name).empty()) missing.push_back(name);
    if (!missing.empty()) {
        std::string msg = "missing checkpoints for " + grid + ":";
        for (const auto& m : missing) msg += " --" + m;
        throw CLI::ValidationError("--ckpts", msg);
    }
    CorpusOnDisk corpus = load_corpus(data_dir);
    std::map<std::string, Checkpoint> ckpts;
    ModelsByName models;
    for (const auto& name : required) {
        ckpts[name] = load_checkpoint(ckpt_paths.at(name));
        // text-only checkpoints must be evaluated with cross-attention back on
        set_audio_mode(ckpts[name].model, AudioMode::CrossAttend);
        models[name] = &ckpts[name].model;
    }
    SplitsByName splits;
    for (auto& [name, samples] : corpus.splits) splits[name] = samples;
    std::vector<GridCell> cells;
    if (grid == "table1") cells = eval_table1(models, splits, corpus.vocab);
    if (grid == "table2") cells = eval_table2(models, splits, corpus.vocab);
    if (grid == "table3") cells = eval_table3(models, splits, corpus.vocab);
    write_report_csv(cells, out_path);
    std::cout << "wrote " << out_path << " (" << cells.size() << " cells)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"prompt-conditioned toy transcriber laboratory"};
    app.require_subcommand(1);

    // gen-data
    std::string manifest_path, out_dir;
    auto* gen = app.add_subcommand("gen-data", "generate the synthetic multi-domain corpus");
    gen->add_option("--manifest", manifest_path, "manifest JSON (defaults when omitted)");
    gen->add_option("--out", out_dir, "output directory")->required();

    // train
    std::string regime, data_dir, init_path, ckpt_out, log_path;
    uint64_t seed = 1;
    int eval_every = 0;
    std::optional<int> steps, batch;
    std::optional<double> lr;
    auto* tr = app.add_subcommand("train", "run one training regime");
    tr->add_option("--regime", regime, "pretrain|prompt_audio_text|prompt_text_only|da_audio_text|da_text_only")
        ->required();
    tr->add_option("--data", data_dir, "corpus directory")->required();
    tr->add_option("--init", init_path, "initial checkpoint (fine-tune regimes)");
    tr->add_option("--out", ckpt_out, "output checkpoint path")->required();
    tr->add_option("--seed", seed, "training seed");
    tr->add_option("--steps", steps, "override step budget");
    tr->add_option("--lr", lr, "override learning rate");
    tr->add_option("--batch", batch, "override batch size");
    tr->add_option("--eval-every", eval_every, "periodic eval interval (0 = off)");
    tr->add_option("--log", log_path, "train log path (default: <out>.log.jsonl)");

    // transcribe
    std::string ckpt_path, audio_path, vocab_path, tags_csv;
    int beams = 3, pad_frames = 0;
    bool longform = false, trace = false;
    auto* ts = app.add_subcommand("transcribe", "decode one audio record");
    ts->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    ts->add_option("--audio", audio_path, "JSONL audio record")->required();
    ts->add_option("--vocab", vocab_path, "vocab file")->required();
    ts->add_option("--tags", tags_csv, "comma-separated domain tags");
    ts->add_option("--beams", beams, "beam size");
    ts->add_option("--pad-frames", pad_frames, "silence frames prepended");
    ts->add_flag("--longform", longform, "window long audio with history text");
    ts->add_flag("--trace", trace, "emit decode trace records on stderr");

    // eval-grid
    std::string grid, grid_data, report_out;
    std::map<std::string, std::string> ckpt_paths;
    auto* eg = app.add_subcommand("eval-grid", "run a canned experiment grid");
    eg->add_option("--grid", grid, "table1|table2|table3")->required();
    eg->add_option("--data", grid_data, "corpus directory")->required();
    eg->add_option("--out", report_out, "report CSV path")->required();
    eg->add_option("--baseline", ckpt_paths["baseline"], "pretrain checkpoint");
    eg->add_option("--clairaudience", ckpt_paths["clairaudience"], "prompt_audio_text checkpoint");
    eg->add_option("--text-only", ckpt_paths["text_only"], "prompt_text_only checkpoint");
    eg->add_option("--da-audio-text", ckpt_paths["da_audio_text"], "da_audio_text checkpoint");
    eg->add_option("--da-text-only", ckpt_paths["da_text_only"], "da_text_only checkpoint");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_data(manifest_path, out_dir);
        if (tr->parsed())
            return cmd_train(regime, data_dir, init_path, ckpt_out, seed, steps, lr, batch,
                             eval_every, log_path);
        if (ts->parsed())
            return cmd_transcribe(ckpt_path, audio_path, vocab_path, tags_csv, beams, pad_frames,
                                  longform, trace);
        if (eg->parsed()) return cmd_eval_grid(grid, ckpt_paths, grid_data, report_out);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
