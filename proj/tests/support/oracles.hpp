#pragma once

// Reference implementations used as test oracles. Each follows the textbook
// definition as literally as possible and shares no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace oracle {

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    long double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const long double mx = sx / n, my = sy / n;
    long double cov = 0, vx = 0, vy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    cov /= (n - 1);
    const long double sdx = std::sqrt(vx / (n - 1)), sdy = std::sqrt(vy / (n - 1));
    return static_cast<double>(cov / (sdx * sdy));
}

// rank = 1 + #smaller + (#equal others) / 2
inline std::vector<double> ranks(const std::vector<double>& x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::size_t less = 0, equal = 0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (j == i) continue;
            if (x[j] < x[i]) ++less;
            else if (x[j] == x[i]) ++equal;
        }
        r[i] = 1.0 + static_cast<double>(less) + static_cast<double>(equal) / 2.0;
    }
    return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

// Efron log partial likelihood straight from the definition: for every
// distinct event time, the d tied deaths share the risk set with
// fractional weights l/d removed.
inline double efron_loglik(const std::vector<double>& t, const std::vector<int>& e, const std::vector<double>& x,
                           double beta) {
    const std::size_t n = t.size();
    std::vector<double> event_times;
    for (std::size_t i = 0; i < n; ++i) {
        if (e[i]) event_times.push_back(t[i]);
    }
    std::sort(event_times.begin(), event_times.end());
    event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());
    long double ll = 0;
    for (double s : event_times) {
        long double risk = 0, tied = 0;
        std::size_t d = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (t[j] >= s) risk += std::exp(static_cast<long double>(beta * x[j]));
            if (t[j] == s && e[j]) {
                tied += std::exp(static_cast<long double>(beta * x[j]));
                ll += beta * x[j];
                ++d;
            }
        }
        for (std::size_t l = 0; l < d; ++l) ll -= std::log(risk - static_cast<long double>(l) / d * tied);
    }
    return static_cast<double>(ll);
}

// Maximizer on a 1e-4 lattice over [lo, hi]. The partial likelihood is
// concave, so a 1e-2 pass followed by a 1e-4 pass around its best point
// finds the same lattice point as the full 1e-4 scan.
inline double grid_search_beta(const std::vector<double>& t, const std::vector<int>& e, const std::vector<double>& x,
                               double lo = -5.0, double hi = 5.0) {
    auto best_on = [&](long first, long last, double step) {
        double best_b = 0, best_ll = -std::numeric_limits<double>::infinity();
        for (long i = first; i <= last; ++i) {
            const double b = static_cast<double>(i) * step;
            if (b < lo - 1e-12 || b > hi + 1e-12) continue;
            const double ll = efron_loglik(t, e, x, b);
            if (ll > best_ll) {
                best_ll = ll;
                best_b = b;
            }
        }
        return best_b;
    };
    const double coarse = best_on(std::lround(lo / 1e-2), std::lround(hi / 1e-2), 1e-2);
    return best_on(std::lround((coarse - 0.02) / 1e-4), std::lround((coarse + 0.02) / 1e-4), 1e-4);
}

struct PairCounts {
    std::size_t comparable = 0, concordant = 0, discordant = 0, tied = 0;
    double c() const { return (concordant + 0.5 * tied) / static_cast<double>(comparable); }
};

// Every unordered pair once. i is the one known to fail first.
inline PairCounts concordance_pairs(const std::vector<double>& t, const std::vector<int>& e,
                                    const std::vector<double>& s) {
    PairCounts out;
    for (std::size_t a = 0; a < t.size(); ++a) {
        for (std::size_t b = a + 1; b < t.size(); ++b) {
            std::size_t i, j;
            if (t[a] < t[b] && e[a]) {
                i = a; j = b;
            } else if (t[b] < t[a] && e[b]) {
                i = b; j = a;
            } else if (t[a] == t[b] && e[a] != e[b]) {
                i = e[a] ? a : b;
                j = e[a] ? b : a;
            } else {
                continue;
            }
            ++out.comparable;
            if (s[i] > s[j]) ++out.concordant;
            else if (s[i] < s[j]) ++out.discordant;
            else ++out.tied;
        }
    }
    return out;
}

// UPGMA that recomputes every inter-cluster mean from the raw distances at
// each step. Clusters are kept ordered by their smallest member; among equal
// costs the first pair in that order wins.
inline std::vector<std::size_t> upgma(const std::vector<std::vector<double>>& d, std::size_t k) {
    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < d.size(); ++i) clusters.push_back({i});
    while (clusters.size() > k) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t ba = 0, bb = 0;
        for (std::size_t a = 0; a < clusters.size(); ++a) {
            for (std::size_t b = a + 1; b < clusters.size(); ++b) {
                double sum = 0;
                for (auto i : clusters[a]) {
                    for (auto j : clusters[b]) sum += d[i][j];
                }
                const double cost = sum / (static_cast<double>(clusters[a].size()) * static_cast<double>(clusters[b].size()));
                if (cost < best) {
                    best = cost;
                    ba = a;
                    bb = b;
                }
            }
        }
        clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
        clusters.erase(clusters.begin() + static_cast<long>(bb));
        std::sort(clusters.begin(), clusters.end(),
                  [](const auto& p, const auto& q) { return *std::min_element(p.begin(), p.end()) < *std::min_element(q.begin(), q.end()); });
    }
    std::vector<std::size_t> labels(d.size());
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        for (auto i : clusters[c]) labels[i] = c + 1;
    }
    return labels;
}

inline double ks_uniform_distance(std::vector<double> p) {
    std::sort(p.begin(), p.end());
    const double n = static_cast<double>(p.size());
    double d = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        d = std::max(d, std::abs((i + 1) / n - p[i]));
        d = std::max(d, std::abs(p[i] - i / n));
    }
    return d;
}

}  // namespace oracle
