#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "clair/checkpoint.hpp"

using namespace clair;

namespace {

TranscriberModel demo_model() {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_enc_layers = 1;
    cfg.n_dec_layers = 1;
    cfg.d_ff = 16;
    cfg.vocab_size = 30;
    cfg.audio_feat_dim = 4;
    cfg.rng_seed = 21;
    return make_model(cfg);
}

std::filesystem::path tmp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("checkpoint round trip preserves config, metadata and weights") {
    TranscriberModel m = demo_model();
    CheckpointMeta meta;
    meta.regime = "pretrain";
    meta.seed = 42;
    meta.steps = 123;
    meta.parent_hash = "deadbeefdeadbeef";
    auto p1 = tmp_file("clair_ckpt_a.clair");
    auto p2 = tmp_file("clair_ckpt_b.clair");
    save_checkpoint(m, meta, p1.string());

    Checkpoint c = load_checkpoint(p1.string());
    CHECK(c.meta.regime == "pretrain");
    CHECK(c.meta.seed == 42);
    CHECK(c.meta.steps == 123);
    CHECK(c.meta.parent_hash == "deadbeefdeadbeef");
    CHECK(c.model.cfg.d_model == m.cfg.d_model);
    CHECK(c.model.cfg.vocab_size == m.cfg.vocab_size);
    CHECK(c.model.param_order == m.param_order);
    CHECK(c.model.mode == AudioMode::CrossAttend);

    // storage is float32, so a second save/load cycle is bit-exact
    save_checkpoint(c.model, c.meta, p2.string());
    Checkpoint d = load_checkpoint(p2.string());
    CHECK(d.model.param_checksum() == c.model.param_checksum());
    for (const auto& name : m.param_order) {
        const auto& orig = *m.p(name)->data;
        const auto& back = *c.model.p(name)->data;
        REQUIRE(orig.size() == back.size());
        for (size_t i = 0; i < orig.size(); ++i)
            CHECK(back[i] == doctest::Approx(orig[i]).epsilon(1e-6));
    }
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("corrupt magic is rejected with a clear error") {
    TranscriberModel m = demo_model();
    auto path = tmp_file("clair_ckpt_magic.clair");
    save_checkpoint(m, {}, path.string());
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("BOGUS1", 6);
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(path.string()),
                         doctest::Contains("magic"), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("truncated files report the failure offset") {
    TranscriberModel m = demo_model();
    auto path = tmp_file("clair_ckpt_trunc.clair");
    save_checkpoint(m, {}, path.string());
    auto full = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full / 2);
    try {
        load_checkpoint(path.string());
        FAIL("expected a truncation error");
    } catch (const std::runtime_error& e) {
        std::string msg = e.what();
        CHECK(msg.find("byte") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("file hash is stable and content sensitive") {
    auto p1 = tmp_file("clair_hash_1.bin");
    auto p2 = tmp_file("clair_hash_2.bin");
    std::ofstream(p1, std::ios::binary) << "identical bytes";
    std::ofstream(p2, std::ios::binary) << "identical bytes";
    CHECK(file_hash_hex(p1.string()) == file_hash_hex(p2.string()));
    std::ofstream(p2, std::ios::binary) << "different bytes!";
    CHECK(file_hash_hex(p1.string()) != file_hash_hex(p2.string()));
    CHECK(file_hash_hex(p1.string()).size() == 16);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}
