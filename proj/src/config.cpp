#include "logdp/config.hpp"

#include <json.hpp>

#include <fstream>

namespace logdp {

using nlohmann::json;

std::vector<MaskRule> default_mask_rules() {
    return {
        {"block_id", "blk_-?[0-9]+"},
        {"ipv4", "/?([0-9]{1,3}\\.){3}[0-9]{1,3}(:[0-9]+)?"},
        {"hex", "0[xX][0-9a-fA-F]+|[0-9a-fA-F]{8,}"},
        {"number", "[-+]?[0-9]+(\\.[0-9]+)?"},
    };
}

void WindowSpec::validate() const {
    switch (mode) {
    case WindowMode::Session:
        break;
    case WindowMode::FixedCount:
    case WindowMode::FixedTime:
        if (size <= 0) throw Error("window size must be positive");
        break;
    case WindowMode::Sliding:
        if (size <= 0) throw Error("window size must be positive");
        if (step <= 0 || step > size) throw Error("sliding window requires 0 < step <= size");
        break;
    }
}

const char* window_mode_name(WindowMode m) {
    switch (m) {
    case WindowMode::Session: return "session";
    case WindowMode::FixedCount: return "fixed_count";
    case WindowMode::FixedTime: return "fixed_time";
    case WindowMode::Sliding: return "sliding";
    }
    return "?";
}

WindowMode window_mode_from_name(std::string_view name) {
    if (name == "session") return WindowMode::Session;
    if (name == "fixed_count") return WindowMode::FixedCount;
    if (name == "fixed_time") return WindowMode::FixedTime;
    if (name == "sliding") return WindowMode::Sliding;
    throw Error("unknown window mode: '" + std::string(name) + "'");
}

namespace {

json parser_to_json(const ParserConfig& p) {
    json masks = json::array();
    for (const auto& m : p.masks) masks.push_back({{"name", m.name}, {"pattern", m.pattern}});
    return {
        {"depth", p.depth},
        {"similarity", p.similarity},
        {"max_children", p.max_children},
        {"masks", masks},
        {"header_regex", p.header_regex},
        {"content_group", p.content_group},
        {"timestamp_group", p.timestamp_group},
        {"session_regex", p.session_regex},
        {"inline_normal_regex", p.inline_normal_regex},
        {"label_file", p.label_file},
    };
}

void parser_from_json(const json& j, ParserConfig& p) {
    p.depth = j.value("depth", p.depth);
    p.similarity = j.value("similarity", p.similarity);
    p.max_children = j.value("max_children", p.max_children);
    if (j.contains("masks")) {
        p.masks.clear();
        for (const auto& m : j.at("masks"))
            p.masks.push_back({m.at("name").get<std::string>(), m.at("pattern").get<std::string>()});
    }
    p.header_regex = j.value("header_regex", p.header_regex);
    p.content_group = j.value("content_group", p.content_group);
    p.timestamp_group = j.value("timestamp_group", p.timestamp_group);
    p.session_regex = j.value("session_regex", p.session_regex);
    p.inline_normal_regex = j.value("inline_normal_regex", p.inline_normal_regex);
    p.label_file = j.value("label_file", p.label_file);
}

json run_to_json(const RunConfig& c) {
    return {
        {"parser", parser_to_json(c.parser)},
        {"window",
         {{"mode", window_mode_name(c.window.mode)},
          {"size", c.window.size},
          {"step", c.window.step}}},
        {"split_ratio", c.split_ratio},
        {"mb",
         {{"alpha", c.mb.alpha},
          {"max_cond", c.mb.max_cond},
          {"symmetry", c.mb.symmetry == SymmetryRule::And ? "AND" : "OR"},
          {"ridge", c.mb.ridge}}},
        {"mlp",
         {{"hidden", c.mlp.hidden},
          {"epochs", c.mlp.epochs},
          {"learning_rate", c.mlp.learning_rate},
          {"momentum", c.mlp.momentum},
          {"min_rows_per_input", c.mlp.min_rows_per_input}}},
        {"margin", c.margin},
        {"seed", c.seed},
        {"threads", c.threads},
    };
}

} // namespace

std::uint64_t ParserConfig::fingerprint() const {
    // nlohmann::json objects keep keys sorted, so dump() is canonical.
    return Fnv1a{}.update(parser_to_json(*this).dump()).digest();
}

std::uint64_t RunConfig::fingerprint() const {
    json j = run_to_json(*this);
    j.erase("threads");
    return Fnv1a{}.update(j.dump()).digest();
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    return from_json_text(read_file(path));
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    if (j.contains("parser")) parser_from_json(j.at("parser"), c.parser);
    if (j.contains("window")) {
        const auto& w = j.at("window");
        c.window.mode = window_mode_from_name(w.value("mode", "session"));
        c.window.size = w.value("size", c.window.size);
        c.window.step = w.value("step", c.window.step);
    }
    c.split_ratio = j.value("split_ratio", c.split_ratio);
    if (j.contains("mb")) {
        const auto& m = j.at("mb");
        c.mb.alpha = m.value("alpha", c.mb.alpha);
        c.mb.max_cond = m.value("max_cond", c.mb.max_cond);
        std::string rule = m.value("symmetry", "AND");
        if (rule == "AND") c.mb.symmetry = SymmetryRule::And;
        else if (rule == "OR") c.mb.symmetry = SymmetryRule::Or;
        else throw Error("mb.symmetry must be AND or OR");
        c.mb.ridge = m.value("ridge", c.mb.ridge);
    }
    if (j.contains("mlp")) {
        const auto& m = j.at("mlp");
        c.mlp.hidden = m.value("hidden", c.mlp.hidden);
        c.mlp.epochs = m.value("epochs", c.mlp.epochs);
        c.mlp.learning_rate = m.value("learning_rate", c.mlp.learning_rate);
        c.mlp.momentum = m.value("momentum", c.mlp.momentum);
        c.mlp.min_rows_per_input = m.value("min_rows_per_input", c.mlp.min_rows_per_input);
    }
    c.margin = j.value("margin", c.margin);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.input_path = j.value("input", c.input_path);
    c.output_dir = j.value("output_dir", c.output_dir);

    if (c.parser.depth < 2) throw Error("parser.depth must be >= 2");
    if (c.parser.similarity <= 0.0 || c.parser.similarity >= 1.0)
        throw Error("parser.similarity must be in (0,1)");
    if (c.split_ratio <= 0.0 || c.split_ratio >= 1.0)
        throw Error("split_ratio must be in (0,1)");
    if (c.mb.alpha <= 0.0 || c.mb.alpha >= 1.0) throw Error("mb.alpha must be in (0,1)");
    if (c.margin < 1.0) throw Error("margin must be >= 1");
    c.window.validate();
    return c;
}

std::string RunConfig::to_json_text() const {
    json j = run_to_json(*this);
    j["input"] = input_path;
    j["output_dir"] = output_dir;
    return j.dump(2) + "\n";
}

} // namespace logdp
