#include "tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qpk/waveform.hpp"

namespace qpk::detail {

namespace {

double impurity(SplitCriterion c, double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    if (c == SplitCriterion::Gini) return 2.0 * p * (1.0 - p);
    return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

struct Sorted {
    double value;
    double weight;
    int label;
};

class Grower {
public:
    Grower(const Matrix& x, std::span<const int> y, std::span<const double> w, const TreeOptions& opt,
           std::mt19937_64& rng, const PresortedColumns* presorted)
        : x_(x), y_(y), w_(w), opt_(opt), rng_(rng), presorted_(presorted) {
        all_features_.resize(x.cols());
        std::iota(all_features_.begin(), all_features_.end(), 0);
    }

    std::int32_t grow(std::vector<std::size_t> rows, int depth) {
        double total = 0.0, pos = 0.0;
        for (auto r : rows) {
            total += w_[r];
            if (y_[r] == 1) pos += w_[r];
        }
        const auto id = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back(TreeNode{-1, 0.0, -1, -1, total > 0.0 ? pos / total : 0.5});

        if (depth >= opt_.max_depth || rows.size() < 2 * std::max<std::size_t>(opt_.min_leaf, 1) || pos <= 0.0 ||
            pos >= total) {
            return id;
        }

        bool identity = presorted_ && depth == 0 && rows.size() == x_.rows();
        for (std::size_t i = 0; identity && i < rows.size(); ++i) identity = rows[i] == i;
        const auto split = best_split(rows, total, pos, identity);
        if (split.feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (auto r : rows) (x_(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        const auto l = grow(std::move(left), depth + 1);
        const auto rgt = grow(std::move(right), depth + 1);
        nodes_[static_cast<std::size_t>(id)].feature = split.feature;
        nodes_[static_cast<std::size_t>(id)].threshold = split.threshold;
        nodes_[static_cast<std::size_t>(id)].left = l;
        nodes_[static_cast<std::size_t>(id)].right = rgt;
        return id;
    }

    std::vector<TreeNode> take() { return std::move(nodes_); }

private:
    struct Split {
        std::int32_t feature = -1;
        double threshold = 0.0;
    };

    std::vector<std::size_t> candidate_features() {
        const std::size_t d = x_.cols();
        if (opt_.max_features == 0 || opt_.max_features >= d) return all_features_;
        std::vector<std::size_t> pool = all_features_;
        for (std::size_t i = 0; i < opt_.max_features; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, d - 1);
            std::swap(pool[i], pool[pick(rng_)]);
        }
        pool.resize(opt_.max_features);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    Split best_split(const std::vector<std::size_t>& rows, double total, double pos, bool use_presorted) {
        const double parent = total * impurity(opt_.criterion, pos / total);
        const std::size_t m = rows.size();
        const std::size_t min_leaf = std::max<std::size_t>(opt_.min_leaf, 1);
        Split best;
        double best_gain = 1e-12 * std::max(1.0, total);

        for (const auto f : candidate_features()) {
            buf_.resize(m);
            if (use_presorted) {
                const auto& col = (*presorted_)[f];
                for (std::size_t i = 0; i < m; ++i) buf_[i] = {col[i].value, w_[col[i].row], y_[col[i].row]};
            } else {
                for (std::size_t i = 0; i < m; ++i) buf_[i] = {x_(rows[i], f), w_[rows[i]], y_[rows[i]]};
                std::sort(buf_.begin(), buf_.end(), [](const Sorted& a, const Sorted& b) { return a.value < b.value; });
            }
            if (buf_.front().value == buf_.back().value) continue;

            double lw = 0.0, lp = 0.0;
            for (std::size_t i = 0; i + 1 < m; ++i) {
                lw += buf_[i].weight;
                if (buf_[i].label == 1) lp += buf_[i].weight;
                if (buf_[i].value == buf_[i + 1].value) continue;
                const std::size_t nl = i + 1;
                if (nl < min_leaf || m - nl < min_leaf) continue;
                const double rw = total - lw;
                const double rp = pos - lp;
                const double child = (lw > 0 ? lw * impurity(opt_.criterion, lp / lw) : 0.0) +
                                     (rw > 0 ? rw * impurity(opt_.criterion, rp / rw) : 0.0);
                const double gain = parent - child;
                if (gain > best_gain) {
                    best_gain = gain;
                    double thr = buf_[i].value + (buf_[i + 1].value - buf_[i].value) / 2.0;
                    if (!(thr < buf_[i + 1].value)) thr = buf_[i].value;
                    best = {static_cast<std::int32_t>(f), thr};
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    std::span<const int> y_;
    std::span<const double> w_;
    const TreeOptions& opt_;
    std::mt19937_64& rng_;
    const PresortedColumns* presorted_;
    std::vector<std::size_t> all_features_;
    std::vector<TreeNode> nodes_;
    std::vector<Sorted> buf_;
};

}  // namespace

PresortedColumns presort_columns(const Matrix& x) {
    PresortedColumns out(x.cols(), std::vector<SortedEntry>(x.rows()));
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = x.row(r);
        for (std::size_t f = 0; f < x.cols(); ++f) out[f][r] = {row[f], static_cast<std::uint32_t>(r)};
    }
    for (auto& col : out) {
        std::stable_sort(col.begin(), col.end(), [](const SortedEntry& a, const SortedEntry& b) { return a.value < b.value; });
    }
    return out;
}

std::vector<TreeNode> grow_tree(const Matrix& x, std::span<const int> y, std::span<const double> w,
                                std::vector<std::size_t> rows, const TreeOptions& opt, std::mt19937_64& rng,
                                const PresortedColumns* presorted) {
    if (rows.empty()) throw Error("grow_tree: no rows");
    if (presorted && presorted->size() != x.cols()) throw Error("grow_tree: presorted columns do not match data");
    Grower g(x, y, w, opt, rng, presorted);
    g.grow(std::move(rows), 0);
    return g.take();
}

const TreeNode& tree_leaf(const std::vector<TreeNode>& nodes, std::span<const double> x) {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                                                        : nodes[i].right);
    }
    return nodes[i];
}

}  // namespace qpk::detail
