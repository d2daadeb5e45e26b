#include "logdp/sequencer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace logdp {

int EventCountMatrix::column_of(int event_id) const {
    auto it = std::lower_bound(event_ids.begin(), event_ids.end(), event_id);
    if (it == event_ids.end() || *it != event_id) return -1;
    return static_cast<int>(it - event_ids.begin());
}

void EventCountMatrix::save(const std::string& path, std::uint64_t pipeline_fingerprint) const {
    std::ostringstream os;
    os << "logdp-ecm v1\n";
    os << "fingerprint " << text::to_hex(pipeline_fingerprint) << "\n";
    os << "events";
    for (int id : event_ids) os << ' ' << id;
    os << "\n";
    for (long i = 0; i < rows(); ++i) {
        os << "seq\t" << sequence_ids[static_cast<std::size_t>(i)] << '\t'
           << label_code(labels[static_cast<std::size_t>(i)]);
        for (long j = 0; j < cols(); ++j) {
            int c = counts(i, j);
            if (c != 0) os << '\t' << event_ids[static_cast<std::size_t>(j)] << ':' << c;
        }
        os << '\n';
    }
    write_file(path, os.str());
}

std::pair<EventCountMatrix, std::uint64_t> EventCountMatrix::load(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "logdp-ecm v1")
        throw Error("not an event count matrix file: " + path);
    if (!std::getline(in, line) || line.rfind("fingerprint ", 0) != 0)
        throw Error("event count matrix missing fingerprint: " + path);
    std::uint64_t fp = text::from_hex(std::string_view(line).substr(12));
    if (!std::getline(in, line) || line.rfind("events", 0) != 0)
        throw Error("event count matrix missing events header: " + path);

    EventCountMatrix ecm;
    {
        auto fields = text::split_ws(std::string_view(line).substr(6));
        for (const auto& f : fields) ecm.event_ids.push_back(static_cast<int>(text::parse_int(f)));
    }
    std::map<int, int> col_of;
    for (std::size_t j = 0; j < ecm.event_ids.size(); ++j)
        col_of[ecm.event_ids[j]] = static_cast<int>(j);

    std::vector<Eigen::VectorXi> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string_view> f;
        std::string_view rest(line);
        while (!rest.empty()) {
            auto pos = rest.find('\t');
            f.push_back(rest.substr(0, pos));
            rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
        }
        if (f.size() < 3 || f[0] != "seq") throw Error("bad sequence record: " + line);
        ecm.sequence_ids.emplace_back(f[1]);
        ecm.labels.push_back(label_from_code(f[2].empty() ? '?' : f[2][0]));
        Eigen::VectorXi row = Eigen::VectorXi::Zero(static_cast<long>(ecm.event_ids.size()));
        for (std::size_t k = 3; k < f.size(); ++k) {
            auto colon = f[k].find(':');
            if (colon == std::string_view::npos) throw Error("bad count entry: " + line);
            int id = static_cast<int>(text::parse_int(f[k].substr(0, colon)));
            int count = static_cast<int>(text::parse_int(f[k].substr(colon + 1)));
            auto it = col_of.find(id);
            if (it == col_of.end()) throw Error("unknown event id in record: " + line);
            row[it->second] = count;
        }
        rows.push_back(std::move(row));
    }
    ecm.counts.resize(static_cast<long>(rows.size()), static_cast<long>(ecm.event_ids.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) ecm.counts.row(static_cast<long>(i)) = rows[i];
    return {std::move(ecm), fp};
}

namespace {

Label combine(Label seq, Label msg) {
    if (seq == Label::Anomalous || msg == Label::Anomalous) return Label::Anomalous;
    if (seq == Label::Normal || msg == Label::Normal) return Label::Normal;
    return Label::Unknown;
}

LogSequence make_window(const std::vector<ParsedMessage>& messages, std::size_t begin,
                        std::size_t end, std::size_t ordinal) {
    LogSequence seq;
    seq.sequence_id = "w" + std::to_string(ordinal);
    for (std::size_t k = begin; k < end; ++k) {
        seq.line_nos.push_back(messages[k].line_no);
        seq.template_ids.push_back(messages[k].template_id);
        seq.label = combine(seq.label, messages[k].label);
    }
    return seq;
}

} // namespace

PartitionResult partition(const std::vector<ParsedMessage>& messages, const WindowSpec& spec,
                          const std::map<std::string, Label>* session_labels) {
    spec.validate();
    PartitionResult result;
    const std::size_t n = messages.size();

    switch (spec.mode) {
    case WindowMode::Session: {
        std::map<std::string, std::size_t> index; // key -> position in result
        std::vector<std::string> order;
        for (const auto& m : messages) {
            if (!m.session_key) {
                ++result.missing_session;
                continue;
            }
            auto [it, fresh] = index.try_emplace(*m.session_key, result.sequences.size());
            if (fresh) {
                LogSequence seq;
                seq.sequence_id = *m.session_key;
                result.sequences.push_back(std::move(seq));
                order.push_back(*m.session_key);
            }
            auto& seq = result.sequences[it->second];
            seq.line_nos.push_back(m.line_no);
            seq.template_ids.push_back(m.template_id);
            seq.label = combine(seq.label, m.label);
        }
        if (session_labels) {
            for (auto& seq : result.sequences) {
                auto it = session_labels->find(seq.sequence_id);
                if (it != session_labels->end()) seq.label = it->second;
            }
        }
        break;
    }
    case WindowMode::FixedCount: {
        const auto size = static_cast<std::size_t>(spec.size);
        for (std::size_t begin = 0, ordinal = 0; begin < n; begin += size, ++ordinal)
            result.sequences.push_back(
                make_window(messages, begin, std::min(begin + size, n), ordinal));
        break;
    }
    case WindowMode::FixedTime: {
        for (const auto& m : messages)
            if (!m.timestamp)
                throw Error("fixed_time windows require timestamps; first missing at line " +
                            std::to_string(m.line_no));
        if (n == 0) break;
        const std::int64_t origin = *messages.front().timestamp;
        std::map<std::int64_t, LogSequence> windows; // empty windows are not emitted
        for (const auto& m : messages) {
            std::int64_t idx = (*m.timestamp - origin) / spec.size;
            auto [it, fresh] = windows.try_emplace(idx);
            if (fresh) it->second.sequence_id = "t" + std::to_string(idx);
            it->second.line_nos.push_back(m.line_no);
            it->second.template_ids.push_back(m.template_id);
            it->second.label = combine(it->second.label, m.label);
        }
        for (auto& [idx, seq] : windows) result.sequences.push_back(std::move(seq));
        break;
    }
    case WindowMode::Sliding: {
        const auto size = static_cast<std::size_t>(spec.size);
        const auto step = static_cast<std::size_t>(spec.step);
        if (n == 0) break;
        std::size_t ordinal = 0;
        std::size_t covered = 0; // messages [0, covered) appear in some window
        for (std::size_t begin = 0; begin + size <= n; begin += step, ++ordinal) {
            result.sequences.push_back(make_window(messages, begin, begin + size, ordinal));
            covered = begin + size;
        }
        if (covered < n) {
            // Trailing partial window so no message is dropped.
            std::size_t begin = ordinal == 0 ? 0 : ordinal * step;
            result.sequences.push_back(make_window(messages, begin, n, ordinal));
        }
        break;
    }
    }
    return result;
}

EventCountMatrix build_ecm(const std::vector<LogSequence>& sequences, const TemplateStore& store) {
    EventCountMatrix ecm;
    const int m = store.size() + 1; // sentinel column is always last
    ecm.event_ids.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) ecm.event_ids[static_cast<std::size_t>(j)] = j;

    ecm.counts = Eigen::MatrixXi::Zero(static_cast<long>(sequences.size()), m);
    ecm.sequence_ids.reserve(sequences.size());
    ecm.labels.reserve(sequences.size());
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        const auto& seq = sequences[i];
        ecm.sequence_ids.push_back(seq.sequence_id);
        ecm.labels.push_back(seq.label);
        for (int tid : seq.template_ids) {
            if (tid < 0 || tid > store.size())
                throw Error("template id " + std::to_string(tid) + " not in store (size " +
                            std::to_string(store.size()) + ")");
            ecm.counts(static_cast<long>(i), tid) += 1;
        }
    }
    return ecm;
}

namespace {

EventCountMatrix take_rows(const EventCountMatrix& X, long begin, long end) {
    EventCountMatrix out;
    out.event_ids = X.event_ids;
    out.counts = X.counts.middleRows(begin, end - begin);
    out.sequence_ids.assign(X.sequence_ids.begin() + begin, X.sequence_ids.begin() + end);
    out.labels.assign(X.labels.begin() + begin, X.labels.begin() + end);
    return out;
}

} // namespace

std::pair<EventCountMatrix, EventCountMatrix> split_train_val(const EventCountMatrix& X,
                                                              double ratio) {
    if (ratio <= 0.0 || ratio >= 1.0) throw Error("split ratio must be in (0,1)");
    for (long i = 0; i < X.rows(); ++i) {
        if (X.labels[static_cast<std::size_t>(i)] == Label::Anomalous)
            throw Error("anomalous-labeled sequence '" + X.sequence_ids[static_cast<std::size_t>(i)] +
                        "' in training data; training data must be clean");
    }
    if (X.rows() == 0) throw Error("training set empty");
    const long n_train =
        static_cast<long>(std::ceil(static_cast<double>(X.rows()) * ratio));
    if (n_train >= X.rows()) throw Error("validation set empty");
    return {take_rows(X, 0, n_train), take_rows(X, n_train, X.rows())};
}

std::pair<EventCountMatrix, std::size_t> drop_anomalous_rows(const EventCountMatrix& X) {
    std::vector<long> keep;
    for (long i = 0; i < X.rows(); ++i)
        if (X.labels[static_cast<std::size_t>(i)] != Label::Anomalous) keep.push_back(i);
    EventCountMatrix out;
    out.event_ids = X.event_ids;
    out.counts.resize(static_cast<long>(keep.size()), X.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.counts.row(static_cast<long>(i)) = X.counts.row(keep[i]);
        out.sequence_ids.push_back(X.sequence_ids[static_cast<std::size_t>(keep[i])]);
        out.labels.push_back(X.labels[static_cast<std::size_t>(keep[i])]);
    }
    return {std::move(out), static_cast<std::size_t>(X.rows()) - keep.size()};
}

} // namespace logdp
