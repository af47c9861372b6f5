#include "tasdiff/metrics.hpp"

#include <algorithm>

namespace tasdiff {

std::vector<Segment> segments_from_labels(const std::vector<int>& labels) {
    std::vector<Segment> segs;
    if (labels.empty()) return segs;
    Segment cur{labels[0], 0, 1};
    for (int i = 1; i < static_cast<int>(labels.size()); ++i) {
        if (labels[static_cast<std::size_t>(i)] == cur.label) {
            cur.end = i + 1;
        } else {
            segs.push_back(cur);
            cur = Segment{labels[static_cast<std::size_t>(i)], i, i + 1};
        }
    }
    segs.push_back(cur);
    return segs;
}

double frame_accuracy(const std::vector<int>& pred, const std::vector<int>& gt) {
    if (pred.size() != gt.size() || gt.empty())
        throw ShapeError("frame_accuracy: length mismatch or empty input");
    int hits = 0;
    for (std::size_t i = 0; i < gt.size(); ++i)
        if (pred[i] == gt[i]) ++hits;
    return 100.0 * hits / static_cast<double>(gt.size());
}

double edit_score(const std::vector<int>& pred, const std::vector<int>& gt) {
    if (pred.empty() || gt.empty()) throw ShapeError("edit_score: empty sequence");
    std::vector<int> a, b;
    for (const auto& s : segments_from_labels(pred)) a.push_back(s.label);
    for (const auto& s : segments_from_labels(gt)) b.push_back(s.label);

    const std::size_t n = a.size(), m = b.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    const double dist = static_cast<double>(prev[m]);
    return 100.0 * (1.0 - dist / static_cast<double>(std::max(n, m)));
}

double f1_at_k(const std::vector<int>& pred, const std::vector<int>& gt, double tau) {
    if (pred.size() != gt.size() || gt.empty())
        throw ShapeError("f1_at_k: length mismatch or empty input");
    const auto psegs = segments_from_labels(pred);
    const auto gsegs = segments_from_labels(gt);

    std::vector<bool> used(gsegs.size(), false);
    int tp = 0, fp = 0;
    for (const auto& p : psegs) {
        double best_iou = -1.0;
        int best = -1;
        for (int gi = 0; gi < static_cast<int>(gsegs.size()); ++gi) {
            const auto& g = gsegs[static_cast<std::size_t>(gi)];
            if (g.label != p.label) continue;
            const int inter = std::max(0, std::min(p.end, g.end) - std::max(p.start, g.start));
            const int uni = std::max(p.end, g.end) - std::min(p.start, g.start);
            const double iou = static_cast<double>(inter) / uni;
            if (iou > best_iou) {
                best_iou = iou;
                best = gi;
            }
        }
        if (best >= 0 && best_iou >= tau && !used[static_cast<std::size_t>(best)]) {
            used[static_cast<std::size_t>(best)] = true;
            ++tp;
        } else {
            ++fp;
        }
    }
    const int fn = static_cast<int>(gsegs.size()) - tp;
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    if (precision + recall == 0.0) return 0.0;
    return 200.0 * precision * recall / (precision + recall);
}

MetricBundle report(const std::vector<int>& pred, const std::vector<int>& gt) {
    MetricBundle m;
    m.f1_10 = f1_at_k(pred, gt, 0.10);
    m.f1_25 = f1_at_k(pred, gt, 0.25);
    m.f1_50 = f1_at_k(pred, gt, 0.50);
    m.edit = edit_score(pred, gt);
    m.acc = frame_accuracy(pred, gt);
    return m;
}

}  // namespace tasdiff
