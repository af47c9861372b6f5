#pragma once

#include <vector>

#include "tasdiff/error.hpp"

namespace tasdiff {

// Maximal run of equal labels; [start, end) frame span.
struct Segment {
    int label = 0;
    int start = 0;
    int end = 0;
};

std::vector<Segment> segments_from_labels(const std::vector<int>& labels);

// All metrics are percentages in [0, 100].
double frame_accuracy(const std::vector<int>& pred, const std::vector<int>& gt);

// 100 * (1 - Levenshtein(pred segment labels, gt segment labels) / max(#segs)).
double edit_score(const std::vector<int>& pred, const std::vector<int>& gt);

// Segmental F1 at IoU threshold tau; greedy one-to-one matching in prediction
// order, a ground-truth segment can be consumed once.
double f1_at_k(const std::vector<int>& pred, const std::vector<int>& gt, double tau);

struct MetricBundle {
    double f1_10 = 0, f1_25 = 0, f1_50 = 0, edit = 0, acc = 0;
    double avg() const { return (f1_10 + f1_25 + f1_50 + edit + acc) / 5.0; }
};

MetricBundle report(const std::vector<int>& pred, const std::vector<int>& gt);

}  // namespace tasdiff
