// split.hpp - train/test splitting, client sharding, forget-set selection
#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedul/common.hpp"
#include "fedul/rng.hpp"

namespace fedul::data {

using ClientAssignment = std::map<int, std::vector<std::size_t>>;

/// Everything downstream needs to reproduce a run's data layout.
struct SplitPlan {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    ClientAssignment client_assignment;
    std::vector<std::size_t> forget_idx;
    std::uint64_t seed = 0;
};

struct TrainTestSplit {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    std::vector<std::string> warnings;
};

/// Label-stratified split, deterministic in `seed`. If some class is too
/// small to stratify (fewer than 2 rows) the split falls back to plain
/// shuffling and says so in `warnings`. Outputs are sorted.
inline TrainTestSplit split_train_test(std::size_t n_rows, std::span<const int> y,
                                       double test_fraction, std::uint64_t seed) {
    if (n_rows == 0 || y.size() != n_rows) throw std::runtime_error("split: bad label vector");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::runtime_error("split: test_fraction must be in (0,1)");

    TrainTestSplit out;
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n_rows; ++i) (y[i] == 1 ? pos : neg).push_back(i);

    Rng rng(derive_seed(seed, "train_test_split"));
    const bool stratify = pos.size() >= 2 && neg.size() >= 2;
    if (!stratify) {
        out.warnings.push_back("class too small to stratify; falling back to unstratified split");
        std::vector<std::size_t> all(n_rows);
        for (std::size_t i = 0; i < n_rows; ++i) all[i] = i;
        rng.shuffle(all);
        const std::size_t n_test = std::clamp<std::size_t>(
            round_half_up(test_fraction * static_cast<double>(n_rows)), 1, n_rows - 1);
        out.test_idx.assign(all.begin(), all.begin() + n_test);
        out.train_idx.assign(all.begin() + n_test, all.end());
    } else {
        for (auto* cls : {&pos, &neg}) {
            rng.shuffle(*cls);
            std::size_t n_test = round_half_up(test_fraction * static_cast<double>(cls->size()));
            n_test = std::min(n_test, cls->size() - 1);
            out.test_idx.insert(out.test_idx.end(), cls->begin(), cls->begin() + n_test);
            out.train_idx.insert(out.train_idx.end(), cls->begin() + n_test, cls->end());
        }
    }
    std::sort(out.train_idx.begin(), out.train_idx.end());
    std::sort(out.test_idx.begin(), out.test_idx.end());
    return out;
}

/// Shuffled IID partition into `n_clients` shards whose sizes differ by at
/// most one. Shards come back sorted; batch ordering downstream does its own
/// permutation, so shard order carries no information.
inline ClientAssignment partition_clients(std::span<const std::size_t> train_idx,
                                          std::size_t n_clients, std::uint64_t seed) {
    if (n_clients < 1) throw std::runtime_error("partition: need at least one client");
    if (train_idx.size() < n_clients)
        throw std::runtime_error("partition: more clients than training rows");

    std::vector<std::size_t> pool(train_idx.begin(), train_idx.end());
    Rng rng(derive_seed(seed, "partition_clients"));
    rng.shuffle(pool);

    ClientAssignment shards;
    const std::size_t base = pool.size() / n_clients;
    const std::size_t extra = pool.size() % n_clients;
    std::size_t at = 0;
    for (std::size_t c = 0; c < n_clients; ++c) {
        const std::size_t take = base + (c < extra ? 1 : 0);
        std::vector<std::size_t> shard(pool.begin() + at, pool.begin() + at + take);
        at += take;
        std::sort(shard.begin(), shard.end());
        shards[static_cast<int>(c)] = std::move(shard);
    }
    return shards;
}

/// Uniform sample without replacement of round(rate * |train|) rows,
/// half-up. Result is sorted.
inline std::vector<std::size_t> select_forget_rows(std::span<const std::size_t> train_idx,
                                                   double rate, std::uint64_t seed) {
    if (rate < 0.0 || rate > 1.0) throw std::runtime_error("forget rate must be in [0,1]");
    const std::size_t k = round_half_up(rate * static_cast<double>(train_idx.size()));
    std::vector<std::size_t> pool(train_idx.begin(), train_idx.end());
    Rng rng(derive_seed(seed, "select_forget_rows"));
    rng.shuffle(pool);
    std::vector<std::size_t> forget(pool.begin(), pool.begin() + std::min(k, pool.size()));
    std::sort(forget.begin(), forget.end());
    return forget;
}

} // namespace fedul::data
