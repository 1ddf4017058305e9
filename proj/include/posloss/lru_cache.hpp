// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <list>
#include <optional>
#include <unordered_map>
#include <utility>

namespace posloss
{
struct CacheStats
{
    std::size_t hits = 0;
    std::size_t misses = 0;
    std::size_t evaluations = 0;
    std::size_t size = 0;

    friend bool operator==(const CacheStats&, const CacheStats&) = default;
};

/// Memoizing least-recently-used map. Capacity 0 disables storage: every lookup misses.
template <typename Key, typename Value, typename Hash = std::hash<Key>>
class LruCache
{
public:
    explicit LruCache(std::size_t capacity) : capacity_(capacity) {}

    /// Returns the cached value or computes, stores and returns `compute()`.
    template <typename Compute>
    Value get_or_compute(const Key& key, Compute&& compute)
    {
        if (capacity_ > 0)
        {
            if (const auto it = index_.find(key); it != index_.end())
            {
                ++stats_.hits;
                order_.splice(order_.begin(), order_, it->second);
                return it->second->second;
            }
        }
        ++stats_.misses;
        ++stats_.evaluations;
        Value v = compute();
        if (capacity_ > 0)
        {
            order_.emplace_front(key, v);
            index_.emplace(key, order_.begin());
            evict_to(capacity_);
        }
        return v;
    }

    std::optional<Value> peek(const Key& key) const
    {
        const auto it = index_.find(key);
        if (it == index_.end())
            return std::nullopt;
        return it->second->second;
    }

    void set_capacity(std::size_t capacity)
    {
        capacity_ = capacity;
        evict_to(capacity_);
    }

    /// Drops every entry and zeroes the counters.
    void clear()
    {
        order_.clear();
        index_.clear();
        stats_ = {};
    }

    CacheStats stats() const noexcept
    {
        auto s = stats_;
        s.size = index_.size();
        return s;
    }

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return index_.size(); }

private:
    void evict_to(std::size_t n)
    {
        while (index_.size() > n)
        {
            index_.erase(order_.back().first);
            order_.pop_back();
        }
    }

    using Entry = std::pair<Key, Value>;
    std::size_t capacity_;
    std::list<Entry> order_;  // front = most recently used
    std::unordered_map<Key, typename std::list<Entry>::iterator, Hash> index_;
    CacheStats stats_;
};

}  // namespace posloss
