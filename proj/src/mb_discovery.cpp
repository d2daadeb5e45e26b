#include "logdp/mb_discovery.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>

namespace logdp {

bool MarkovBlanketMap::is_symmetric() const {
    for (int i = 0; i < size(); ++i) {
        for (int j : related[static_cast<std::size_t>(i)]) {
            const auto& back = related[static_cast<std::size_t>(j)];
            if (!std::binary_search(back.begin(), back.end(), i)) return false;
        }
    }
    return true;
}

CorrelationModel CorrelationModel::fit(const Eigen::MatrixXd& X) {
    CorrelationModel model;
    model.n_ = static_cast<int>(X.rows());
    const long m = X.cols();
    model.constant_.assign(static_cast<std::size_t>(m), false);

    Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
    Eigen::VectorXd norms(m);
    for (long j = 0; j < m; ++j) {
        norms[j] = centered.col(j).norm();
        if (norms[j] <= 0.0) {
            model.constant_[static_cast<std::size_t>(j)] = true;
            norms[j] = 1.0; // keeps the division defined; correlations become 0
        }
    }
    for (long j = 0; j < m; ++j) centered.col(j) /= norms[j];
    model.corr_ = centered.transpose() * centered;
    for (long j = 0; j < m; ++j) {
        if (model.constant_[static_cast<std::size_t>(j)]) {
            model.corr_.row(j).setZero();
            model.corr_.col(j).setZero();
        }
        model.corr_(j, j) = 1.0;
    }
    return model;
}

namespace {

// Two-sided tail of the standard normal.
double normal_two_sided_p(double statistic) {
    return std::erfc(statistic / std::sqrt(2.0));
}

} // namespace

CITestResult CorrelationModel::test(int i, int j, std::span<const int> cond, double alpha,
                                    double ridge) const {
    if (i == j) throw Error("ci_test requires two distinct columns");
    for (int c : cond)
        if (c == i || c == j) throw Error("conditioning set must exclude the tested columns");

    CITestResult result;
    result.effective_n = n_;
    const int k = static_cast<int>(cond.size());

    if (is_constant(i) || is_constant(j)) {
        result.degenerate = true;
        result.p_value = 1.0;
        result.independent = true;
        return result;
    }
    if (n_ <= k + 3) {
        // Fisher z needs n > |cond| + 3; without it, claim nothing.
        result.degenerate = true;
        result.p_value = 1.0;
        result.independent = true;
        return result;
    }

    double r;
    if (k == 0) {
        r = corr_(i, j);
    } else {
        const int d = k + 2;
        Eigen::MatrixXd sub(d, d);
        std::vector<int> idx;
        idx.reserve(static_cast<std::size_t>(d));
        idx.push_back(i);
        idx.push_back(j);
        idx.insert(idx.end(), cond.begin(), cond.end());
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) sub(a, b) = corr_(idx[static_cast<std::size_t>(a)],
                                                          idx[static_cast<std::size_t>(b)]);
        Eigen::LLT<Eigen::MatrixXd> llt(sub);
        if (llt.info() != Eigen::Success) {
            sub.diagonal().array() += ridge;
            llt.compute(sub);
            result.degenerate = true;
            if (llt.info() != Eigen::Success) {
                result.p_value = 1.0;
                result.independent = true;
                return result;
            }
        }
        Eigen::MatrixXd precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
        double denom = precision(0, 0) * precision(1, 1);
        if (denom <= 0.0 || !std::isfinite(denom)) {
            result.degenerate = true;
            result.p_value = 1.0;
            result.independent = true;
            return result;
        }
        r = -precision(0, 1) / std::sqrt(denom);
    }

    const double cap = 1.0 - 1e-12;
    r = std::clamp(r, -cap, cap);
    const double z = 0.5 * std::log((1.0 + r) / (1.0 - r));
    result.statistic = std::sqrt(static_cast<double>(n_ - k - 3)) * std::abs(z);
    result.p_value = normal_two_sided_p(result.statistic);
    result.independent = result.p_value > alpha;
    return result;
}

CITestResult ci_test(const Eigen::MatrixXd& X, int i, int j, std::span<const int> cond,
                     double alpha) {
    return CorrelationModel::fit(X).test(i, j, cond, alpha);
}

namespace {

// Conditioning set for a test against `focused`: members of mb ranked by
// marginal association, truncated to max_cond, excluding `skip`.
std::vector<int> conditioning_set(const std::vector<int>& mb, const std::vector<double>& assoc,
                                  int max_cond, int skip = -1) {
    std::vector<int> cond;
    cond.reserve(mb.size());
    for (int c : mb)
        if (c != skip) cond.push_back(c);
    if (static_cast<int>(cond.size()) > max_cond) {
        std::stable_sort(cond.begin(), cond.end(), [&](int a, int b) {
            double da = assoc[static_cast<std::size_t>(a)];
            double db = assoc[static_cast<std::size_t>(b)];
            if (da != db) return da > db;
            return a < b;
        });
        cond.resize(static_cast<std::size_t>(max_cond));
        std::sort(cond.begin(), cond.end());
    }
    return cond;
}

} // namespace

std::vector<int> discover_mb(const CorrelationModel& model, int focused, const MbConfig& config) {
    const int m = model.cols();
    if (m < 2) throw Error("markov blanket discovery needs at least 2 columns");
    if (config.alpha <= 0.0 || config.alpha >= 1.0) throw Error("alpha must be in (0,1)");
    if (model.is_constant(focused)) return {};
    if (model.sample_size() <= 3) return {}; // no valid test exists

    // Marginal association with the focused column, for truncation ranking.
    std::vector<double> assoc(static_cast<std::size_t>(m), 0.0);
    for (int c = 0; c < m; ++c) {
        if (c == focused) continue;
        assoc[static_cast<std::size_t>(c)] =
            model.test(focused, c, {}, config.alpha, config.ridge).statistic;
    }

    std::vector<int> mb;
    std::vector<bool> in_mb(static_cast<std::size_t>(m), false);

    // Growing phase.
    for (;;) {
        auto cond = conditioning_set(mb, assoc, config.max_cond);
        int best = -1;
        double best_stat = -1.0;
        bool best_dependent = false;
        for (int c = 0; c < m; ++c) {
            if (c == focused || in_mb[static_cast<std::size_t>(c)]) continue;
            if (model.is_constant(c)) continue;
            auto res = model.test(focused, c, cond, config.alpha, config.ridge);
            if (res.statistic > best_stat) {
                best = c;
                best_stat = res.statistic;
                best_dependent = !res.independent;
            }
        }
        if (best < 0 || !best_dependent) break;
        mb.push_back(best);
        in_mb[static_cast<std::size_t>(best)] = true;
        std::sort(mb.begin(), mb.end());
    }

    // Shrinking phase: drop members independent given the rest, to fixpoint.
    for (bool removed = true; removed;) {
        removed = false;
        for (std::size_t k = 0; k < mb.size(); ++k) {
            int member = mb[k];
            auto cond = conditioning_set(mb, assoc, config.max_cond, member);
            auto res = model.test(focused, member, cond, config.alpha, config.ridge);
            if (res.independent) {
                mb.erase(mb.begin() + static_cast<std::ptrdiff_t>(k));
                in_mb[static_cast<std::size_t>(member)] = false;
                removed = true;
                break;
            }
        }
    }
    return mb;
}

namespace {

template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    const int workers = std::min(threads, count);
    std::vector<std::future<void>> futures;
    futures.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        futures.push_back(std::async(std::launch::async, [&, w] {
            for (int i = w; i < count; i += workers) fn(i);
        }));
    }
    for (auto& f : futures) f.get();
}

} // namespace

MarkovBlanketMap discover_all(const Eigen::MatrixXd& X, const MbConfig& config, int threads) {
    auto model = CorrelationModel::fit(X);
    MarkovBlanketMap raw;
    raw.alpha = config.alpha;
    raw.related.resize(static_cast<std::size_t>(model.cols()));
    parallel_for(model.cols(), threads, [&](int focused) {
        raw.related[static_cast<std::size_t>(focused)] = discover_mb(model, focused, config);
    });
    return symmetry_correct(raw, config.symmetry);
}

MarkovBlanketMap symmetry_correct(const MarkovBlanketMap& raw, SymmetryRule rule) {
    MarkovBlanketMap out = raw;
    out.symmetry = rule == SymmetryRule::And ? "AND" : "OR";
    const int m = raw.size();
    for (int i = 0; i < m; ++i) {
        std::vector<int> corrected;
        for (int j : raw.related[static_cast<std::size_t>(i)]) {
            const auto& back = raw.related[static_cast<std::size_t>(j)];
            bool reciprocal = std::binary_search(back.begin(), back.end(), i);
            if (rule == SymmetryRule::And ? reciprocal : true) corrected.push_back(j);
        }
        out.related[static_cast<std::size_t>(i)] = std::move(corrected);
    }
    if (rule == SymmetryRule::Or) {
        for (int i = 0; i < m; ++i) {
            for (int j : raw.related[static_cast<std::size_t>(i)]) {
                auto& back = out.related[static_cast<std::size_t>(j)];
                if (!std::binary_search(back.begin(), back.end(), i)) {
                    back.insert(std::lower_bound(back.begin(), back.end(), i), i);
                }
            }
        }
    }
    return out;
}

EventClassification classify_events(const MarkovBlanketMap& mbs) {
    if (!mbs.is_symmetric()) throw Error("classification requires a symmetry-corrected map");
    EventClassification out;
    for (int i = 0; i < mbs.size(); ++i) {
        if (mbs.related[static_cast<std::size_t>(i)].empty())
            out.independent_events.push_back(i);
        else
            out.dependent_events.push_back(i);
    }
    return out;
}

void save_mb_map(const std::string& path, const MarkovBlanketMap& mbs,
                 const std::vector<int>& event_ids) {
    if (static_cast<int>(event_ids.size()) != mbs.size())
        throw Error("event id list does not match blanket map size");
    std::ostringstream os;
    os << "logdp-mb v1\n";
    os << "algorithm " << mbs.algorithm << " alpha " << text::format_double(mbs.alpha)
       << " symmetry " << mbs.symmetry << "\n";
    for (int i = 0; i < mbs.size(); ++i) {
        os << "mb " << event_ids[static_cast<std::size_t>(i)] << ":";
        for (int j : mbs.related[static_cast<std::size_t>(i)])
            os << ' ' << event_ids[static_cast<std::size_t>(j)];
        os << "\n";
    }
    write_file(path, os.str());
}

} // namespace logdp
