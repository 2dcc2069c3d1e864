#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "qpk/basemodels.hpp"

namespace qpk::detail {

// Internal node when feature >= 0; rows with x[feature] <= threshold go left.
struct TreeNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;  // weighted fraction of positives reaching the node
};

// Each column's (value, row) pairs in ascending value order.
struct SortedEntry {
    double value;
    std::uint32_t row;
};
using PresortedColumns = std::vector<std::vector<SortedEntry>>;
PresortedColumns presort_columns(const Matrix& x);

// Grows a weighted CART tree over `rows` (duplicates allowed). `presorted`
// speeds up the root split when rows are exactly 0..n-1.
std::vector<TreeNode> grow_tree(const Matrix& x, std::span<const int> y, std::span<const double> w,
                                std::vector<std::size_t> rows, const TreeOptions& opt, std::mt19937_64& rng,
                                const PresortedColumns* presorted = nullptr);

const TreeNode& tree_leaf(const std::vector<TreeNode>& nodes, std::span<const double> x);

}  // namespace qpk::detail
