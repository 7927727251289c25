#pragma once

#include <cstdint>
#include <string>

#include "clair/model.hpp"

namespace clair {

// Binary checkpoint: magic "CLAIR1", format version, JSON header with the
// model config and run metadata, then a named tensor table (LE float32).
struct CheckpointMeta {
    std::string regime;
    uint64_t seed = 0;
    int steps = 0;
    std::string parent_hash;  // hex FNV-1a of the parent checkpoint file, "" for roots
};

struct Checkpoint {
    TranscriberModel model;
    CheckpointMeta meta;
};

void save_checkpoint(const TranscriberModel& model, const CheckpointMeta& meta,
                     const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// hex FNV-1a 64 of a file's bytes, for hash-chained provenance
std::string file_hash_hex(const std::string& path);

}  // namespace clair
