#pragma once

#include "logdp/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace logdp {

struct MaskRule {
    std::string name;
    std::string pattern; // full-token match
};

std::vector<MaskRule> default_mask_rules();

struct ParserConfig {
    int depth = 4;              // total tree depth: root, length, depth-2 token layers
    double similarity = 0.4;    // leaf-group match threshold, in (0,1)
    int max_children = 100;     // per internal node; overflow routes to the wildcard child
    std::vector<MaskRule> masks = default_mask_rules();
    std::string header_regex;   // whole-line match; empty = entire line is content
    int content_group = 0;      // capture group holding the message content
    int timestamp_group = 0;    // capture group holding epoch seconds; 0 = none
    std::string session_regex = "blk_-?[0-9]+"; // searched in content; empty = no sessions
    std::string inline_normal_regex;            // raw line matches => normal; empty = unlabeled
    std::string label_file;     // sidecar CSV: session_key,label

    /// Hash over everything that affects template identity. Stored in the
    /// template store and re-checked before frozen parsing.
    std::uint64_t fingerprint() const;
};

enum class WindowMode { Session, FixedCount, FixedTime, Sliding };

struct WindowSpec {
    WindowMode mode = WindowMode::Session;
    long long size = 0; // messages (fixed_count, sliding) or seconds (fixed_time)
    long long step = 0; // sliding only; 0 < step <= size

    void validate() const;
};

const char* window_mode_name(WindowMode m);
WindowMode window_mode_from_name(std::string_view name);

enum class SymmetryRule { And, Or };

struct MbConfig {
    double alpha = 0.05;
    int max_cond = 8;
    SymmetryRule symmetry = SymmetryRule::And;
    double ridge = 1e-6; // fallback regularization for singular conditioning matrices
};

struct MlpConfig {
    int hidden = 16;
    int epochs = 200;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    int min_rows_per_input = 10; // below: fall back to the mean model
};

struct RunConfig {
    ParserConfig parser;
    WindowSpec window;
    double split_ratio = 2.0 / 3.0;
    MbConfig mb;
    MlpConfig mlp;
    double margin = 1.0;
    std::uint64_t seed = 1;
    int threads = 1; // execution detail; results do not depend on it

    std::string input_path;  // log file (parse) or dataset dir
    std::string output_dir = ".";

    /// Hash over every field that affects pipeline results (threads and paths
    /// excluded). Embedded in each artifact; stages refuse mismatched inputs.
    std::uint64_t fingerprint() const;

    static RunConfig from_json_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

} // namespace logdp
