#include "tasdiff/masking.hpp"

#include <algorithm>

#include "tasdiff/metrics.hpp"

namespace tasdiff {

ConditionMask make_mask(const LabelSequence& y0, MaskKind kind, const MaskConfig& cfg,
                        std::mt19937_64& rng) {
    y0.validate();
    const int len = y0.length();
    ConditionMask m;
    m.kind = kind;
    switch (kind) {
        case MaskKind::Ones:
            m.values.assign(static_cast<std::size_t>(len), 1.0);
            break;
        case MaskKind::Zeros:
            m.values.assign(static_cast<std::size_t>(len), 0.0);
            break;
        case MaskKind::Boundary: {
            // zero out frames within the radius of every boundary gap
            m.values.assign(static_cast<std::size_t>(len), 1.0);
            const auto b = boundary_flags(y0);
            const int r = cfg.boundary_radius;
            for (int i = 0; i < static_cast<int>(b.size()); ++i) {
                if (!b[static_cast<std::size_t>(i)]) continue;
                const int lo = std::max(0, i - r + 1);
                const int hi = std::min(len - 1, i + r);
                for (int t = lo; t <= hi; ++t) m.values[static_cast<std::size_t>(t)] = 0.0;
            }
            break;
        }
        case MaskKind::Relation: {
            // zero out one uniformly chosen action segment
            m.values.assign(static_cast<std::size_t>(len), 1.0);
            const auto segs = segments_from_labels(y0.ids);
            std::uniform_int_distribution<std::size_t> pick(0, segs.size() - 1);
            const auto& seg = segs[pick(rng)];
            for (int t = seg.start; t < seg.end; ++t) m.values[static_cast<std::size_t>(t)] = 0.0;
            break;
        }
    }
    return m;
}

ConditionMask sample_mask(const LabelSequence& y0, const MaskConfig& cfg, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, 3);
    const auto kind = static_cast<MaskKind>(pick(rng));
    return make_mask(y0, kind, cfg, rng);
}

Tensor apply_mask(const Tensor& cond, const ConditionMask& mask) {
    if (static_cast<int>(mask.values.size()) != cond.rows())
        throw ShapeError("apply_mask: mask length mismatch");
    return scale_rows(cond, mask.values);
}

}  // namespace tasdiff
