#include "logdp/log_ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

namespace logdp {

std::string IngestDiagnostics::summary() const {
    std::ostringstream os;
    os << "lines " << total_lines << ", skipped_empty " << skipped_empty << ", malformed "
       << malformed << ", unseen " << unseen << ", missing_session " << missing_session;
    return os.str();
}

// ---------------------------------------------------------------------------
// Token masking
// ---------------------------------------------------------------------------

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_hex_digit(char c) {
    return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

// Hand-written matchers for the default rules; regex_match on every token of
// every line is the hot spot of the whole parse stage.
bool match_block_id(const std::string& t) {
    std::size_t i = 4;
    if (t.rfind("blk_", 0) != 0) return false;
    if (i < t.size() && t[i] == '-') ++i;
    if (i >= t.size()) return false;
    for (; i < t.size(); ++i)
        if (!is_digit(t[i])) return false;
    return true;
}

bool match_ipv4(const std::string& t) {
    std::size_t i = 0;
    if (i < t.size() && t[i] == '/') ++i;
    for (int group = 0; group < 4; ++group) {
        std::size_t start = i;
        while (i < t.size() && is_digit(t[i])) ++i;
        std::size_t len = i - start;
        if (len < 1 || len > 3) return false;
        if (group < 3) {
            if (i >= t.size() || t[i] != '.') return false;
            ++i;
        }
    }
    if (i < t.size() && t[i] == ':') {
        ++i;
        if (i >= t.size()) return false;
        while (i < t.size() && is_digit(t[i])) ++i;
    }
    return i == t.size();
}

bool match_hex(const std::string& t) {
    if (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) {
        for (std::size_t i = 2; i < t.size(); ++i)
            if (!is_hex_digit(t[i])) return false;
        return true;
    }
    if (t.size() < 8) return false;
    for (char c : t)
        if (!is_hex_digit(c)) return false;
    return true;
}

bool match_number(const std::string& t) {
    std::size_t i = 0;
    if (i < t.size() && (t[i] == '+' || t[i] == '-')) ++i;
    std::size_t start = i;
    while (i < t.size() && is_digit(t[i])) ++i;
    if (i == start) return false;
    if (i < t.size() && t[i] == '.') {
        ++i;
        start = i;
        while (i < t.size() && is_digit(t[i])) ++i;
        if (i == start) return false;
    }
    return i == t.size();
}

using FastMatcher = bool (*)(const std::string&);

FastMatcher fast_matcher_for(const MaskRule& rule) {
    static const auto defaults = default_mask_rules();
    for (const auto& d : defaults) {
        if (rule.pattern != d.pattern) continue;
        if (d.name == "block_id") return &match_block_id;
        if (d.name == "ipv4") return &match_ipv4;
        if (d.name == "hex") return &match_hex;
        if (d.name == "number") return &match_number;
    }
    return nullptr;
}

bool has_digit(const std::string& t) {
    return std::any_of(t.begin(), t.end(), [](char c) { return is_digit(c); });
}

} // namespace

TokenMasker::TokenMasker(const std::vector<MaskRule>& rules) {
    for (const auto& r : rules) {
        if (fast_matcher_for(r)) {
            compiled_.emplace_back(); // placeholder, fast path below
        } else {
            try {
                compiled_.emplace_back(r.pattern, std::regex::ECMAScript | std::regex::optimize);
            } catch (const std::regex_error& e) {
                throw Error("bad mask pattern '" + r.pattern + "': " + e.what());
            }
        }
        fast_.push_back(fast_matcher_for(r));
    }
}

bool TokenMasker::matches_any(const std::string& token) const {
    if (token == kWildcard) return false; // already masked
    for (std::size_t i = 0; i < fast_.size(); ++i) {
        if (fast_[i]) {
            if (fast_[i](token)) return true;
        } else if (std::regex_match(token, compiled_[i])) {
            return true;
        }
    }
    return false;
}

std::vector<std::string> TokenMasker::apply(std::vector<std::string> tokens) const {
    for (auto& t : tokens)
        if (matches_any(t)) t = kWildcard;
    return tokens;
}

std::vector<std::string> mask_tokens(const std::vector<std::string>& tokens,
                                     const std::vector<MaskRule>& rules) {
    return TokenMasker(rules).apply(tokens);
}

// ---------------------------------------------------------------------------
// Template store
// ---------------------------------------------------------------------------

const LogTemplate& TemplateStore::at(int id) const {
    if (id < 0 || id >= size()) throw Error("template id out of range: " + std::to_string(id));
    return templates_[static_cast<std::size_t>(id)];
}

std::uint64_t TemplateStore::total_occurrences() const {
    std::uint64_t total = 0;
    for (const auto& t : templates_) total += t.occurrence_count;
    return total;
}

void TemplateStore::save(const std::string& path, const ParserConfig& config) const {
    std::ostringstream os;
    os << "logdp-templates v1\n";
    os << "fingerprint " << text::to_hex(parser_fingerprint_) << "\n";
    os << "depth " << config.depth << " similarity " << text::format_double(config.similarity)
       << " max_children " << config.max_children << "\n";
    for (const auto& t : templates_) {
        os << "template " << t.template_id << " " << t.occurrence_count << " "
           << text::join(t.tokens) << "\n";
    }
    write_file(path, os.str());
}

TemplateStore TemplateStore::load(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "logdp-templates v1")
        throw Error("not a template store: " + path);
    if (!std::getline(in, line) || line.rfind("fingerprint ", 0) != 0)
        throw Error("template store missing fingerprint: " + path);
    std::uint64_t fp = text::from_hex(std::string_view(line).substr(12));
    std::getline(in, line); // config echo, informational
    std::vector<LogTemplate> templates;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = text::split_ws(line);
        if (fields.size() < 4 || fields[0] != "template")
            throw Error("bad template record: " + line);
        LogTemplate t;
        t.template_id = static_cast<int>(text::parse_int(fields[1]));
        t.occurrence_count = static_cast<std::uint64_t>(text::parse_int(fields[2]));
        t.tokens.assign(fields.begin() + 3, fields.end());
        if (t.template_id != static_cast<int>(templates.size()))
            throw Error("template ids not contiguous in " + path);
        templates.push_back(std::move(t));
    }
    return TemplateStore(std::move(templates), fp);
}

// ---------------------------------------------------------------------------
// Prefix-tree miner
// ---------------------------------------------------------------------------

struct TemplateMiner::Node {
    std::map<std::string, std::unique_ptr<Node>> children;
    std::vector<int> group; // templates anchored at this node
};

TemplateMiner::TemplateMiner(const ParserConfig& config)
    : config_(config), root_(std::make_unique<Node>()) {
    if (config.depth < 2) throw Error("parser.depth must be >= 2");
    if (config.similarity <= 0.0 || config.similarity >= 1.0)
        throw Error("parser.similarity must be in (0,1)");
    store_.parser_fingerprint_ = config.fingerprint();
}

TemplateMiner::~TemplateMiner() = default;

TemplateMiner::Node* TemplateMiner::descend(const std::vector<std::string>& tokens) {
    const std::string len_key = std::to_string(tokens.size());
    auto& length_child = root_->children[len_key];
    if (!length_child) length_child = std::make_unique<Node>();
    Node* node = length_child.get();

    const int token_layers = config_.depth - 2;
    const int steps = std::min<int>(token_layers, static_cast<int>(tokens.size()));
    for (int i = 0; i < steps; ++i) {
        const std::string& tok = tokens[static_cast<std::size_t>(i)];
        const bool numeric = has_digit(tok);
        const std::string& key = numeric ? std::string(kWildcard) : tok;

        auto it = node->children.find(key);
        if (it != node->children.end()) {
            node = it->second.get();
            continue;
        }
        if (numeric) {
            node = (node->children[kWildcard] = std::make_unique<Node>()).get();
            continue;
        }
        auto wild = node->children.find(kWildcard);
        const int width = static_cast<int>(node->children.size());
        if (wild != node->children.end()) {
            if (width < config_.max_children) {
                node = (node->children[key] = std::make_unique<Node>()).get();
            } else {
                node = wild->second.get();
            }
        } else {
            // Last slot before the cap is reserved for the wildcard branch.
            if (width + 1 < config_.max_children) {
                node = (node->children[key] = std::make_unique<Node>()).get();
            } else {
                node = (node->children[kWildcard] = std::make_unique<Node>()).get();
            }
        }
    }
    return node;
}

namespace {

// Similarity counts exact literal matches; wildcard positions contribute
// parameters instead. Ranking prefers higher similarity, then more parameters.
std::pair<double, int> seq_similarity(const std::vector<std::string>& tmpl,
                                      const std::vector<std::string>& tokens) {
    int same = 0;
    int params = 0;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        if (tmpl[i] == kWildcard) {
            ++params;
        } else if (tmpl[i] == tokens[i]) {
            ++same;
        }
    }
    return {static_cast<double>(same) / static_cast<double>(tmpl.size()), params};
}

} // namespace

int TemplateMiner::match_in_group(const std::vector<int>& group,
                                  const std::vector<std::string>& tokens) const {
    int best = -1;
    double best_sim = -1.0;
    int best_params = -1;
    for (int id : group) {
        auto [sim, params] = seq_similarity(store_.templates_[static_cast<std::size_t>(id)].tokens, tokens);
        if (sim > best_sim || (sim == best_sim && params > best_params)) {
            best = id;
            best_sim = sim;
            best_params = params;
        }
    }
    return best_sim >= config_.similarity ? best : -1;
}

int TemplateMiner::ingest(const std::vector<std::string>& masked_tokens) {
    if (masked_tokens.empty()) throw Error("cannot ingest an empty token sequence");
    Node* leaf = descend(masked_tokens);
    int id = match_in_group(leaf->group, masked_tokens);
    if (id >= 0) {
        auto& tmpl = store_.templates_[static_cast<std::size_t>(id)];
        for (std::size_t i = 0; i < tmpl.tokens.size(); ++i) {
            if (tmpl.tokens[i] != kWildcard && tmpl.tokens[i] != masked_tokens[i])
                tmpl.tokens[i] = kWildcard;
        }
        ++tmpl.occurrence_count;
        return id;
    }
    id = store_.size();
    store_.templates_.push_back(LogTemplate{id, masked_tokens, 1});
    leaf->group.push_back(id);
    return id;
}

// ---------------------------------------------------------------------------
// Line intake shared by fit and frozen parsing
// ---------------------------------------------------------------------------

namespace {

struct Intake {
    std::vector<std::string> masked;
    std::optional<std::int64_t> timestamp;
    std::optional<std::string> session;
    Label label = Label::Unknown;
    bool malformed = false;
};

class LineReader {
public:
    LineReader(const ParserConfig& cfg) : cfg_(cfg), masker_(cfg.masks) {
        if (!cfg.header_regex.empty())
            header_.emplace(cfg.header_regex, std::regex::ECMAScript | std::regex::optimize);
        if (!cfg.session_regex.empty())
            session_.emplace(cfg.session_regex, std::regex::ECMAScript | std::regex::optimize);
        if (!cfg.inline_normal_regex.empty())
            normal_.emplace(cfg.inline_normal_regex, std::regex::ECMAScript | std::regex::optimize);
    }

    // nullopt = blank line, skip and count.
    std::optional<Intake> take(std::string_view raw, IngestDiagnostics& diag) const {
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        if (text::trim(raw).empty()) {
            ++diag.skipped_empty;
            return std::nullopt;
        }
        Intake out;
        std::string raw_str(raw);
        if (normal_) out.label = std::regex_search(raw_str, *normal_) ? Label::Normal : Label::Anomalous;

        std::string content;
        if (header_) {
            std::smatch m;
            if (std::regex_match(raw_str, m, *header_)) {
                content = m[static_cast<std::size_t>(cfg_.content_group)].str();
                if (cfg_.timestamp_group > 0) {
                    try {
                        out.timestamp = text::parse_int(
                            m[static_cast<std::size_t>(cfg_.timestamp_group)].str());
                    } catch (const Error&) {
                        // header matched but the timestamp field is not numeric
                    }
                }
            } else {
                out.malformed = true;
                ++diag.malformed;
            }
        } else {
            content = raw_str;
        }

        if (session_) {
            std::smatch m;
            const std::string& haystack = out.malformed ? raw_str : content;
            if (std::regex_search(haystack, m, *session_)) out.session = m[0].str();
        }

        if (out.malformed) {
            out.masked = {kCatchAllToken};
            return out;
        }
        auto tokens = text::split_ws(content);
        if (tokens.empty()) {
            ++diag.skipped_empty;
            return std::nullopt;
        }
        out.masked = masker_.apply(std::move(tokens));
        return out;
    }

private:
    const ParserConfig& cfg_;
    TokenMasker masker_;
    std::optional<std::regex> header_;
    std::optional<std::regex> session_;
    std::optional<std::regex> normal_;
};

} // namespace

IngestResult fit_templates(std::istream& in, const ParserConfig& config) {
    LineReader reader(config);
    TemplateMiner miner(config);
    IngestResult result;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        ++result.diagnostics.total_lines;
        auto intake = reader.take(line, result.diagnostics);
        if (!intake) continue;
        ParsedMessage msg;
        msg.line_no = line_no;
        msg.template_id = miner.ingest(intake->masked);
        msg.timestamp = intake->timestamp;
        msg.session_key = intake->session;
        msg.label = intake->label;
        result.messages.push_back(std::move(msg));
    }
    result.store = miner.take_store();
    return result;
}

IngestResult fit_templates_file(const std::string& path, const ParserConfig& config) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open log file: " + path);
    return fit_templates(in, config);
}

// ---------------------------------------------------------------------------
// Frozen-mode parsing
// ---------------------------------------------------------------------------

namespace {

// A frozen store is matched by scanning templates of equal token count.
// Template literal fractions never drop below the similarity threshold (a
// merge keeps exactly the agreeing positions), so any line assigned during
// fitting still matches its template here.
class FrozenMatcher {
public:
    explicit FrozenMatcher(const TemplateStore& store) : store_(store) {
        for (const auto& t : store.templates())
            by_length_[t.tokens.size()].push_back(t.template_id);
    }

    int match(const std::vector<std::string>& tokens, double threshold) const {
        auto it = by_length_.find(tokens.size());
        if (it == by_length_.end()) return store_.sentinel_id();
        int best = -1;
        double best_sim = -1.0;
        int best_params = -1;
        for (int id : it->second) {
            auto [sim, params] =
                seq_similarity(store_.at(id).tokens, tokens);
            if (sim > best_sim || (sim == best_sim && params > best_params)) {
                best = id;
                best_sim = sim;
                best_params = params;
            }
        }
        return best_sim >= threshold ? best : store_.sentinel_id();
    }

private:
    const TemplateStore& store_;
    std::map<std::size_t, std::vector<int>> by_length_;
};

void check_fingerprint(const TemplateStore& store, const ParserConfig& config) {
    if (store.parser_fingerprint() != config.fingerprint())
        throw Error("template store fingerprint " + text::to_hex(store.parser_fingerprint()) +
                    " does not match parser config " + text::to_hex(config.fingerprint()) +
                    "; refusing to mix templates across configs");
}

} // namespace

ParsedMessage parse_line(const RawLogLine& line, const TemplateStore& store,
                         const ParserConfig& config) {
    check_fingerprint(store, config);
    auto tokens = text::split_ws(line.content);
    if (tokens.empty()) throw Error("empty content at line " + std::to_string(line.line_no));
    ParsedMessage msg;
    msg.line_no = line.line_no;
    msg.timestamp = line.timestamp;
    msg.label = line.label;
    if (!config.session_regex.empty()) {
        std::regex session(config.session_regex);
        std::smatch m;
        if (std::regex_search(line.content, m, session)) msg.session_key = m[0].str();
    }
    auto masked = TokenMasker(config.masks).apply(std::move(tokens));
    msg.template_id = FrozenMatcher(store).match(masked, config.similarity);
    return msg;
}

IngestResult parse_stream(std::istream& in, const TemplateStore& store,
                          const ParserConfig& config) {
    check_fingerprint(store, config);
    LineReader reader(config);
    FrozenMatcher matcher(store);
    IngestResult result;
    result.store = store;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        ++result.diagnostics.total_lines;
        auto intake = reader.take(line, result.diagnostics);
        if (!intake) continue;
        ParsedMessage msg;
        msg.line_no = line_no;
        msg.template_id = matcher.match(intake->masked, config.similarity);
        if (msg.template_id == store.sentinel_id()) ++result.diagnostics.unseen;
        msg.timestamp = intake->timestamp;
        msg.session_key = intake->session;
        msg.label = intake->label;
        result.messages.push_back(std::move(msg));
    }
    return result;
}

IngestResult parse_file(const std::string& path, const TemplateStore& store,
                        const ParserConfig& config) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open log file: " + path);
    return parse_stream(in, store, config);
}

// ---------------------------------------------------------------------------
// Message and label files
// ---------------------------------------------------------------------------

void save_messages(const std::string& path, const std::vector<ParsedMessage>& messages,
                   std::uint64_t pipeline_fingerprint) {
    std::ostringstream os;
    os << "logdp-messages v1\n";
    os << "fingerprint " << text::to_hex(pipeline_fingerprint) << "\n";
    for (const auto& m : messages) {
        os << m.line_no << '\t' << m.template_id << '\t';
        if (m.timestamp) os << *m.timestamp;
        else os << '-';
        os << '\t';
        if (m.session_key) os << *m.session_key;
        else os << '-';
        os << '\t' << label_code(m.label) << '\n';
    }
    write_file(path, os.str());
}

std::pair<std::vector<ParsedMessage>, std::uint64_t> load_messages(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "logdp-messages v1")
        throw Error("not a parsed-messages file: " + path);
    if (!std::getline(in, line) || line.rfind("fingerprint ", 0) != 0)
        throw Error("parsed-messages file missing fingerprint: " + path);
    std::uint64_t fp = text::from_hex(std::string_view(line).substr(12));
    std::vector<ParsedMessage> messages;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::array<std::string_view, 5> f{};
        std::string_view rest(line);
        for (int i = 0; i < 5; ++i) {
            auto pos = rest.find('\t');
            if (pos == std::string_view::npos && i < 4)
                throw Error("bad message record: " + line);
            f[static_cast<std::size_t>(i)] = rest.substr(0, pos);
            rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
        }
        ParsedMessage m;
        m.line_no = static_cast<std::uint64_t>(text::parse_int(f[0]));
        m.template_id = static_cast<int>(text::parse_int(f[1]));
        if (f[2] != "-") m.timestamp = text::parse_int(f[2]);
        if (f[3] != "-") m.session_key = std::string(f[3]);
        m.label = label_from_code(f[4].empty() ? '?' : f[4][0]);
        messages.push_back(std::move(m));
    }
    return {std::move(messages), fp};
}

std::map<std::string, Label> load_session_labels(const std::string& path) {
    std::istringstream in(read_file(path));
    std::map<std::string, Label> labels;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw Error("bad label record at line " + std::to_string(line_no) + ": " + line);
        std::string key(text::trim(std::string_view(line).substr(0, comma)));
        std::string val(text::trim(std::string_view(line).substr(comma + 1)));
        std::transform(val.begin(), val.end(), val.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (val == "normal" || val == "0") {
            labels[key] = Label::Normal;
        } else if (val == "anomaly" || val == "anomalous" || val == "1") {
            labels[key] = Label::Anomalous;
        } else if (line_no == 1) {
            continue; // header row
        } else {
            throw Error("unknown label '" + val + "' at line " + std::to_string(line_no));
        }
    }
    return labels;
}

} // namespace logdp
