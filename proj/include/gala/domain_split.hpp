#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gala/graph.hpp"
#include "gala/rng.hpp"

namespace gala {

// Orders graphs by ascending edge density and cuts them into k contiguous
// quantile groups: the first (k - n%k) groups get floor(n/k) graphs, the rest
// one more. Ties keep original dataset order.
inline std::vector<Dataset> split_by_density(const Dataset& d, int k) {
    const int n = static_cast<int>(d.graphs.size());
    if (k < 1 || k > n) throw ArgumentError("group count must be in [1, dataset size]");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> density(n);
    for (int i = 0; i < n; ++i) density[i] = graph_density(d.graphs[i]);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return density[a] < density[b]; });

    const int base = n / k, rem = n % k;
    std::vector<Dataset> groups;
    groups.reserve(k);
    int pos = 0;
    for (int g = 0; g < k; ++g) {
        const int size = base + (g >= k - rem ? 1 : 0);
        Dataset part;
        part.num_classes = d.num_classes;
        part.attribute_dim = d.attribute_dim;
        part.graphs.reserve(size);
        for (int i = 0; i < size; ++i) part.graphs.push_back(d.graphs[order[pos + i]]);
        groups.push_back(std::move(part));
        pos += size;
    }
    return groups;
}

struct TrainTestSplit {
    Dataset train;
    Dataset test;
};

// Class-stratified split: within each class, a seeded shuffle sends
// lround(ratio * count) graphs to train and the rest to test.
inline TrainTestSplit stratified_train_test(const Dataset& d, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ArgumentError("split ratio must be in (0, 1)");
    std::vector<std::vector<int>> by_class(std::max(d.num_classes, 1));
    for (size_t i = 0; i < d.graphs.size(); ++i) {
        if (!d.graphs[i].label) throw ContractError("stratified split requires labeled graphs");
        by_class[*d.graphs[i].label].push_back(static_cast<int>(i));
    }

    TrainTestSplit out;
    out.train.num_classes = out.test.num_classes = d.num_classes;
    out.train.attribute_dim = out.test.attribute_dim = d.attribute_dim;
    RngStream rng(seed);
    for (auto& members : by_class) {
        rng.shuffle(members);
        const int n_train = static_cast<int>(std::lround(ratio * members.size()));
        for (size_t i = 0; i < members.size(); ++i) {
            auto& bucket = (static_cast<int>(i) < n_train) ? out.train : out.test;
            bucket.graphs.push_back(d.graphs[members[i]]);
        }
    }
    return out;
}

}  // namespace gala
