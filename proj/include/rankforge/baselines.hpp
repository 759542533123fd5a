#pragma once

#include <span>
#include <vector>

#include "rankforge/core.hpp"

namespace rankforge {

struct NeighborQuery {
  int k = 5;
};

// Indices of the k nearest rows by Euclidean distance, ties broken by
// ascending index. Returns min(k, n) indices.
std::vector<int> nearest_neighbors(std::span<const double> query, const EntityFeatures& rows,
                                   int k);

// User memory-based scores (UB): per item, the mean of the nearest neighbors'
// observed scores for that item; items unobserved by every neighbor score 0.
std::vector<double> user_memory_scores(std::span<const double> new_user_desc,
                                       const PreferenceMatrix& train,
                                       const EntityFeatures& train_user_features,
                                       const NeighborQuery& q = {});

// Full memory-based score (FB): mean of the observed scores over the cross
// product of the user's and the item's neighborhoods; 0 when no cell of the
// cross product is observed.
double full_memory_score(std::span<const double> new_user_desc,
                         std::span<const double> new_item_desc, const PreferenceMatrix& train,
                         const EntityFeatures& train_user_features,
                         const EntityFeatures& train_item_features, const NeighborQuery& q = {});

}  // namespace rankforge
