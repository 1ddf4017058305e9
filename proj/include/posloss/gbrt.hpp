// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <posloss/core.hpp>
#include <posloss/rng.hpp>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace posloss
{
using TrainingRow = std::pair<FeatureVector, double>;

struct TreeNode
{
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // go left iff x[feature] <= threshold
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    double value = 0.0;  // leaf output
};

struct RegressionTree
{
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(const FeatureVector& v) const noexcept
    {
        std::uint32_t i = 0;
        while (nodes[i].feature >= 0)
            i = v[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return nodes[i].value;
    }
};

struct GbrtModel
{
    std::vector<RegressionTree> trees;
    double learning_rate = 0.3;
    double base_prediction = 0.0;

    double predict(const FeatureVector& v) const noexcept
    {
        double sum = 0.0;
        for (const auto& t : trees)
            sum += t.predict(v);
        return base_prediction + learning_rate * sum;
    }
};

struct GbrtParams
{
    std::size_t n_trees = 100;
    std::size_t max_depth = 6;
    double learning_rate = 0.3;
    std::size_t min_samples_leaf = 1;
    double subsample = 1.0;  // row fraction per tree, drawn from the seed; 1.0 uses every row
    std::uint64_t seed = 0;
};

namespace detail
{
struct SplitCandidate
{
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

class TreeBuilder
{
public:
    TreeBuilder(std::span<const TrainingRow> rows, std::span<const double> residual, const GbrtParams& params)
      : rows_(rows), residual_(residual), params_(params)
    {}

    /// `sorted[f]` holds the node's row indices ordered by feature f (ties by index).
    RegressionTree build(std::array<std::vector<std::uint32_t>, 6> sorted)
    {
        RegressionTree tree;
        grow(tree, std::move(sorted), 0);
        return tree;
    }

private:
    std::uint32_t grow(RegressionTree& tree, std::array<std::vector<std::uint32_t>, 6> sorted, std::size_t depth)
    {
        const auto id = static_cast<std::uint32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        const auto& idx = sorted[0];
        const auto n = idx.size();

        double sum = 0.0;
        for (auto i : idx)
            sum += residual_[i];
        tree.nodes[id].value = n ? sum / static_cast<double>(n) : 0.0;

        if (depth >= params_.max_depth || n < 2 * params_.min_samples_leaf)
            return id;
        const auto best = best_split(sorted, sum);
        if (best.feature < 0)
            return id;

        const auto f = static_cast<std::size_t>(best.feature);
        std::array<std::vector<std::uint32_t>, 6> left;
        std::array<std::vector<std::uint32_t>, 6> right;
        for (std::size_t g = 0; g < 6; ++g)
        {
            for (auto i : sorted[g])
                (rows_[i].first[f] <= best.threshold ? left[g] : right[g]).push_back(i);
            sorted[g].clear();
            sorted[g].shrink_to_fit();
        }
        tree.nodes[id].feature = best.feature;
        tree.nodes[id].threshold = best.threshold;
        const auto l = grow(tree, std::move(left), depth + 1);
        const auto r = grow(tree, std::move(right), depth + 1);
        tree.nodes[id].left = l;
        tree.nodes[id].right = r;
        return id;
    }

    /// Exact search over midpoints of consecutive distinct values. Maximizing
    /// sum_l^2/n_l + sum_r^2/n_r is equivalent to minimizing the children's SSE.
    /// Only strictly better candidates replace the incumbent, so ties resolve to the
    /// lowest feature index, then the lowest threshold.
    SplitCandidate best_split(const std::array<std::vector<std::uint32_t>, 6>& sorted, double total) const
    {
        const auto n = sorted[0].size();
        const double parent = total * total / static_cast<double>(n);
        SplitCandidate best;
        const double min_gain = 1e-12 * std::max(1.0, std::abs(parent));
        for (std::size_t f = 0; f < 6; ++f)
        {
            const auto& idx = sorted[f];
            double left_sum = 0.0;
            for (std::size_t k = 0; k + 1 < n; ++k)
            {
                left_sum += residual_[idx[k]];
                const double a = rows_[idx[k]].first[f];
                const double b = rows_[idx[k + 1]].first[f];
                const auto nl = k + 1;
                const auto nr = n - nl;
                if (a == b || nl < params_.min_samples_leaf || nr < params_.min_samples_leaf)
                    continue;
                const double right_sum = total - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(nl) +
                                    right_sum * right_sum / static_cast<double>(nr) - parent;
                if (gain > min_gain && gain > best.gain)
                {
                    double mid = a + (b - a) / 2.0;
                    if (!(mid < b))
                        mid = a;  // adjacent doubles
                    best = {gain, static_cast<int>(f), mid};
                }
            }
        }
        return best;
    }

    std::span<const TrainingRow> rows_;
    std::span<const double> residual_;
    const GbrtParams& params_;
};

}  // namespace detail

/// Per-stage training-set MSE, reported alongside the model.
struct GbrtTrainingLog
{
    std::vector<double> stage_mse;  // [0] = base prediction only, [k] after k trees
};

/// Stagewise squared-error boosting: base = mean target, each tree fits the current
/// residuals with greedy exact splits and mean-valued leaves.
inline GbrtModel train_gbrt(std::span<const TrainingRow> train, const GbrtParams& params = {},
    GbrtTrainingLog* log = nullptr)
{
    if (train.empty())
        throw ValidationError("train_gbrt: empty training set");
    if (!(params.learning_rate > 0.0 && params.learning_rate <= 1.0))
        throw ValidationError("train_gbrt: learning_rate must be in (0, 1]");
    if (!(params.subsample > 0.0 && params.subsample <= 1.0))
        throw ValidationError("train_gbrt: subsample must be in (0, 1]");
    if (params.min_samples_leaf == 0)
        throw ValidationError("train_gbrt: min_samples_leaf must be >= 1");

    const auto n = train.size();
    GbrtModel model;
    model.learning_rate = params.learning_rate;
    double mean = 0.0;
    for (const auto& r : train)
        mean += r.second;
    model.base_prediction = mean / static_cast<double>(n);

    std::vector<double> prediction(n, model.base_prediction);
    std::vector<double> residual(n);
    auto training_mse = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += (train[i].second - prediction[i]) * (train[i].second - prediction[i]);
        return s / static_cast<double>(n);
    };
    if (log)
        log->stage_mse = {training_mse()};

    std::array<std::vector<std::uint32_t>, 6> presorted;
    for (std::size_t f = 0; f < 6; ++f)
    {
        auto& v = presorted[f];
        v.resize(n);
        std::iota(v.begin(), v.end(), std::uint32_t{0});
        std::stable_sort(v.begin(), v.end(),
            [&](std::uint32_t a, std::uint32_t b) { return train[a].first[f] < train[b].first[f]; });
    }

    RandomStream rng(params.seed, derive_stream(0, StreamPurpose::synthetic));
    for (std::size_t t = 0; t < params.n_trees; ++t)
    {
        for (std::size_t i = 0; i < n; ++i)
            residual[i] = train[i].second - prediction[i];

        auto sorted = presorted;
        if (params.subsample < 1.0)
        {
            std::vector<char> in(n);
            for (auto& b : in)
                b = rng.uniform() < params.subsample;
            for (auto& v : sorted)
                std::erase_if(v, [&](std::uint32_t i) { return !in[i]; });
            if (sorted[0].empty())
                continue;
        }

        detail::TreeBuilder builder(train, residual, params);
        auto tree = builder.build(std::move(sorted));
        for (std::size_t i = 0; i < n; ++i)
            prediction[i] += model.learning_rate * tree.predict(train[i].first);
        model.trees.push_back(std::move(tree));
        if (log)
            log->stage_mse.push_back(training_mse());
    }
    return model;
}

}  // namespace posloss
