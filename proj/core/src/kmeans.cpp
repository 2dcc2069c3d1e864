#include <algorithm>
#include <limits>
#include <map>
#include <random>

#include "qpk/evaluation.hpp"
#include "qpk/random.hpp"

namespace qpk {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

Matrix plus_plus_seeds(const Matrix& x, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = x.rows();
    Matrix c(k, x.cols());
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::size_t pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    for (std::size_t j = 0; j < k; ++j) {
        std::copy(x.row(pick).begin(), x.row(pick).end(), c.row(j).begin());
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(x.row(i), c.row(j)));
            total += d2[i];
        }
        if (j + 1 == k) break;
        if (total > 0.0) {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                if (u < d2[i]) {
                    pick = i;
                    break;
                }
                u -= d2[i];
            }
            while (d2[pick] <= 0.0) --pick;  // rounding at the tail
        } else {
            pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        }
    }
    return c;
}

KMeansResult lloyd(const Matrix& x, Matrix c, std::size_t max_iter) {
    const std::size_t n = x.rows(), k = c.rows(), d = x.cols();
    std::vector<int> assign(n, -1);
    for (std::size_t it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(x.row(i), c.row(0));
            for (std::size_t j = 1; j < k; ++j) {
                const double dj = sq_dist(x.row(i), c.row(j));
                if (dj < best_d) {
                    best_d = dj;
                    best = static_cast<int>(j);
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed) break;
        Matrix sum(k, d);
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto j = static_cast<std::size_t>(assign[i]);
            ++count[j];
            for (std::size_t f = 0; f < d; ++f) sum(j, f) += x(i, f);
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (count[j] == 0) continue;  // empty cluster keeps its centroid
            for (std::size_t f = 0; f < d; ++f) c(j, f) = sum(j, f) / static_cast<double>(count[j]);
        }
    }
    KMeansResult r{assign, std::move(c), 0.0};
    for (std::size_t i = 0; i < n; ++i) r.wcss += sq_dist(x.row(i), r.centroids.row(static_cast<std::size_t>(assign[i])));
    return r;
}

// Renumbers clusters in order of first appearance.
void canonicalise(KMeansResult& r) {
    std::map<int, int> remap;
    for (int a : r.assignment) remap.emplace(a, static_cast<int>(remap.size()));
    Matrix c(r.centroids.rows(), r.centroids.cols());
    int next = static_cast<int>(remap.size());
    for (std::size_t j = 0; j < r.centroids.rows(); ++j) {
        const auto it = remap.find(static_cast<int>(j));
        const int to = it != remap.end() ? it->second : next++;
        std::copy(r.centroids.row(j).begin(), r.centroids.row(j).end(), c.row(static_cast<std::size_t>(to)).begin());
    }
    for (int& a : r.assignment) a = remap.at(a);
    r.centroids = std::move(c);
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t restarts, std::size_t max_iter) {
    if (k == 0) throw Error("kmeans: k must be positive");
    if (k > points.rows()) throw Error("kmeans: k exceeds the number of points");
    if (restarts == 0) throw Error("kmeans: need at least one restart");
    KMeansResult best;
    best.wcss = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < restarts; ++r) {
        std::mt19937_64 rng(derive_seed(seed, r));
        auto res = lloyd(points, plus_plus_seeds(points, k, rng), max_iter);
        if (res.wcss < best.wcss) best = std::move(res);
    }
    canonicalise(best);
    return best;
}

StationClusters cluster_station_weights(const std::map<std::string, ModelBundle>& bundles, std::size_t k,
                                        std::uint64_t seed, std::size_t restarts) {
    if (k > bundles.size()) throw Error("cluster_station_weights: k exceeds the number of stations");
    StationClusters out;
    for (const auto& [station, b] : bundles) {
        if (!out.stations.empty() && b.meta_weights.size() != out.weights.cols()) {
            throw Error("cluster_station_weights: bundles have different model counts");
        }
        out.stations.push_back(station);
        out.weights.append_row(b.meta_weights);
    }
    const auto r = kmeans(out.weights, k, seed, restarts);
    out.cluster = r.assignment;
    out.wcss = r.wcss;
    return out;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw Error("adjusted_rand_index: length mismatch");
    const auto n = static_cast<double>(a.size());
    if (a.size() < 2) return 1.0;
    std::map<std::pair<int, int>, double> cell;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cell[{a[i], b[i]}] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    const auto c2 = [](double v) { return v * (v - 1.0) / 2.0; };
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [key, v] : cell) index += c2(v);
    for (const auto& [key, v] : ra) sa += c2(v);
    for (const auto& [key, v] : rb) sb += c2(v);
    const double expected = sa * sb / c2(n);
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return 1.0;  // both partitions trivial and identical in structure
    return (index - expected) / (max_index - expected);
}

}  // namespace qpk
