#pragma once

#include "logdp/common.hpp"
#include "logdp/config.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace logdp {

inline constexpr const char* kWildcard = "<*>";
inline constexpr const char* kCatchAllToken = "<unparsed>";

struct RawLogLine {
    std::uint64_t line_no = 0; // 1-based
    std::optional<std::int64_t> timestamp;
    std::string content;
    Label label = Label::Unknown;
};

struct LogTemplate {
    int template_id = 0;
    std::vector<std::string> tokens; // literals and kWildcard markers
    std::uint64_t occurrence_count = 0;
};

struct ParsedMessage {
    std::uint64_t line_no = 0;
    int template_id = 0;
    std::optional<std::int64_t> timestamp;
    std::optional<std::string> session_key;
    Label label = Label::Unknown;
};

struct IngestDiagnostics {
    std::uint64_t total_lines = 0;
    std::uint64_t skipped_empty = 0;   // blank or empty-content lines, not parsed
    std::uint64_t malformed = 0;       // header regex mismatch, routed to catch-all
    std::uint64_t unseen = 0;          // frozen mode only: mapped to sentinel
    std::uint64_t missing_session = 0; // filled in by the sequencer

    std::string summary() const;
};

/// Replaces tokens that fully match a masking rule with the wildcard marker.
/// Total: never fails, output length equals input length, idempotent.
class TokenMasker {
public:
    explicit TokenMasker(const std::vector<MaskRule>& rules);
    std::vector<std::string> apply(std::vector<std::string> tokens) const;
    bool matches_any(const std::string& token) const;

private:
    std::vector<std::regex> compiled_;
    std::vector<bool (*)(const std::string&)> fast_;
};

std::vector<std::string> mask_tokens(const std::vector<std::string>& tokens,
                                     const std::vector<MaskRule>& rules);

class TemplateStore {
public:
    TemplateStore() = default;
    TemplateStore(std::vector<LogTemplate> templates, std::uint64_t parser_fingerprint)
        : templates_(std::move(templates)), parser_fingerprint_(parser_fingerprint) {}

    int size() const { return static_cast<int>(templates_.size()); }
    bool empty() const { return templates_.empty(); }
    const LogTemplate& at(int id) const;
    const std::vector<LogTemplate>& templates() const { return templates_; }
    std::uint64_t parser_fingerprint() const { return parser_fingerprint_; }

    /// Id reserved for messages that match no stored template in frozen mode.
    /// Meaningful only once the store is frozen: one past the last template.
    int sentinel_id() const { return size(); }

    std::uint64_t total_occurrences() const;

    void save(const std::string& path, const ParserConfig& config) const;
    static TemplateStore load(const std::string& path);

private:
    friend class TemplateMiner;
    std::vector<LogTemplate> templates_;
    std::uint64_t parser_fingerprint_ = 0;
};

/// Fixed-depth prefix-tree template miner. The tree partitions first by token
/// count, then by the first (depth - 2) tokens; leaves hold template groups
/// matched by token-position similarity. Digit-bearing tokens descend through
/// the wildcard branch, and a full internal node routes new tokens there too.
/// Single-writer: ingest order determines template ids.
class TemplateMiner {
public:
    explicit TemplateMiner(const ParserConfig& config);
    ~TemplateMiner();

    TemplateMiner(const TemplateMiner&) = delete;
    TemplateMiner& operator=(const TemplateMiner&) = delete;

    /// Assigns the line to a template, creating or widening one as needed.
    int ingest(const std::vector<std::string>& masked_tokens);

    const TemplateStore& store() const { return store_; }
    TemplateStore take_store() { return std::move(store_); }

private:
    struct Node;
    Node* descend(const std::vector<std::string>& tokens);
    int match_in_group(const std::vector<int>& group,
                       const std::vector<std::string>& tokens) const;

    ParserConfig config_;
    std::unique_ptr<Node> root_;
    TemplateStore store_;
};

struct IngestResult {
    TemplateStore store;
    std::vector<ParsedMessage> messages;
    IngestDiagnostics diagnostics;
};

/// Fits a template store over a stream of raw log lines (one message per
/// line). Deterministic given input order and config.
IngestResult fit_templates(std::istream& in, const ParserConfig& config);
IngestResult fit_templates_file(const std::string& path, const ParserConfig& config);

/// Parses one line against a frozen store. Unseen templates map to the
/// sentinel id. Throws if the store was fitted under a different parser
/// config (fingerprint mismatch).
ParsedMessage parse_line(const RawLogLine& line, const TemplateStore& store,
                         const ParserConfig& config);

/// Frozen-mode batch parse of a whole stream.
IngestResult parse_stream(std::istream& in, const TemplateStore& store,
                          const ParserConfig& config);
IngestResult parse_file(const std::string& path, const TemplateStore& store,
                        const ParserConfig& config);

void save_messages(const std::string& path, const std::vector<ParsedMessage>& messages,
                   std::uint64_t pipeline_fingerprint);
std::pair<std::vector<ParsedMessage>, std::uint64_t> load_messages(const std::string& path);

/// Sidecar label table: CSV lines "session_key,label" with an optional header
/// row. Accepts Normal/Anomaly spellings and 0/1.
std::map<std::string, Label> load_session_labels(const std::string& path);

} // namespace logdp
