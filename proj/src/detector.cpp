#include "logdp/detector.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

namespace logdp {

namespace {

void check_schema(const EventCountMatrix& X, const ModelBundle& bundle) {
    if (X.event_ids == bundle.event_ids) return;
    std::ostringstream os;
    os << "event schema mismatch between data and bundle;";
    os << " data-only:";
    for (int id : X.event_ids)
        if (bundle.column_of(id) < 0) os << ' ' << id;
    os << " bundle-only:";
    for (int id : bundle.event_ids)
        if (X.column_of(id) < 0) os << ' ' << id;
    throw Error(os.str());
}

} // namespace

Verdict score_sequence(const Eigen::VectorXd& row, const ModelBundle& bundle) {
    if (row.size() != static_cast<long>(bundle.event_ids.size()))
        throw Error("row width " + std::to_string(row.size()) + " does not match bundle schema " +
                    std::to_string(bundle.event_ids.size()));
    Verdict v;
    v.deviations.resize(bundle.event_ids.size());
    for (std::size_t j = 0; j < bundle.event_ids.size(); ++j) {
        double expected = predict_expected(bundle.models[j], row, bundle.event_ids);
        double deviation = std::abs(row[static_cast<long>(j)] - expected);
        v.deviations[j] = deviation;
        if (deviation > bundle.thresholds.values[j])
            v.violated_events.push_back(bundle.event_ids[j]);
    }
    if (bundle.sentinel_id >= 0) {
        int col = bundle.column_of(bundle.sentinel_id);
        if (col >= 0 && row[col] > 0) v.unseen_event_hit = true;
    }
    v.is_anomaly = !v.violated_events.empty() || v.unseen_event_hit;
    return v;
}

std::vector<Verdict> detect_batch(const EventCountMatrix& X_test, const ModelBundle& bundle,
                                  int threads) {
    check_schema(X_test, bundle);
    const long n = X_test.rows();
    std::vector<Verdict> verdicts(static_cast<std::size_t>(n));
    Eigen::MatrixXd observed = X_test.as_double();

    auto score_row = [&](long i) {
        try {
            Verdict v = score_sequence(observed.row(i), bundle);
            v.sequence_id = X_test.sequence_ids[static_cast<std::size_t>(i)];
            verdicts[static_cast<std::size_t>(i)] = std::move(v);
        } catch (const Error& e) {
            throw Error("row " + std::to_string(i) + " ('" +
                        X_test.sequence_ids[static_cast<std::size_t>(i)] + "'): " + e.what());
        }
    };

    if (threads <= 1 || n <= 1) {
        for (long i = 0; i < n; ++i) score_row(i);
    } else {
        const int workers = static_cast<int>(std::min<long>(threads, n));
        std::vector<std::future<void>> futures;
        for (int w = 0; w < workers; ++w) {
            futures.push_back(std::async(std::launch::async, [&, w] {
                for (long i = w; i < n; i += workers) score_row(i);
            }));
        }
        for (auto& f : futures) f.get();
    }
    return verdicts;
}

std::size_t count_anomalies(const std::vector<Verdict>& verdicts) {
    return static_cast<std::size_t>(
        std::count_if(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.is_anomaly; }));
}

void save_verdicts(const std::string& path, const std::vector<Verdict>& verdicts,
                   const ModelBundle& bundle) {
    std::ostringstream os;
    os << "logdp-verdicts v1\n";
    os << "fingerprint " << text::to_hex(bundle.fingerprint) << "\n";
    for (const auto& v : verdicts) {
        os << v.sequence_id << '\t' << (v.is_anomaly ? 1 : 0) << '\t'
           << (v.unseen_event_hit ? 1 : 0) << '\t';
        for (std::size_t k = 0; k < v.violated_events.size(); ++k) {
            int id = v.violated_events[k];
            int col = bundle.column_of(id);
            if (k) os << ',';
            os << id << '(' << text::format_double(v.deviations[static_cast<std::size_t>(col)])
               << '|' << text::format_double(bundle.thresholds.values[static_cast<std::size_t>(col)])
               << ')';
        }
        os << '\n';
    }
    write_file(path, os.str());
}

std::vector<Verdict> load_verdicts(const std::string& path, std::uint64_t* fingerprint_out) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "logdp-verdicts v1")
        throw Error("not a verdicts file: " + path);
    if (!std::getline(in, line) || line.rfind("fingerprint ", 0) != 0)
        throw Error("verdicts file missing fingerprint: " + path);
    if (fingerprint_out) *fingerprint_out = text::from_hex(std::string_view(line).substr(12));
    std::vector<Verdict> verdicts;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string_view> f;
        std::string_view rest(line);
        while (f.size() < 4) {
            auto pos = rest.find('\t');
            f.push_back(rest.substr(0, pos));
            if (pos == std::string_view::npos) break;
            rest = rest.substr(pos + 1);
        }
        if (f.size() < 3) throw Error("bad verdict record: " + line);
        Verdict v;
        v.sequence_id = std::string(f[0]);
        v.is_anomaly = f[1] == "1";
        v.unseen_event_hit = f[2] == "1";
        if (f.size() > 3 && !f[3].empty()) {
            std::string_view viol = f[3];
            while (!viol.empty()) {
                auto paren = viol.find('(');
                if (paren == std::string_view::npos) throw Error("bad violation list: " + line);
                v.violated_events.push_back(static_cast<int>(text::parse_int(viol.substr(0, paren))));
                auto close = viol.find(')');
                viol = close + 1 < viol.size() && viol[close + 1] == ','
                           ? viol.substr(close + 2)
                           : viol.substr(std::min(close + 1, viol.size()));
            }
        }
        verdicts.push_back(std::move(v));
    }
    return verdicts;
}

} // namespace logdp
