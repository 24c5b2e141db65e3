#include "oikg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace oikg::metrics {

namespace {

void check(const EpisodeResult& r) {
    if (r.env == nullptr) throw std::invalid_argument("episode result has no environment");
    if (r.executed_path.empty() || r.gt_path.empty()) throw std::invalid_argument("episode result has an empty path");
}

double geodesic(const EpisodeResult& r, NodeId a, NodeId b) {
    return r.distances ? r.distances->at(a, b) : geodesic_distance(*r.env, a, b);
}

}  // namespace

double trajectory_length(const EpisodeResult& r) {
    check(r);
    return path_length(*r.env, r.executed_path);
}

double navigation_error(const EpisodeResult& r) {
    check(r);
    return geodesic(r, r.executed_path.back(), r.gt_path.back());
}

double success(const EpisodeResult& r, const MetricOptions& opts) {
    check(r);
    double d = opts.euclidean_success
                   ? geometry::distance(r.env->node(r.executed_path.back()).position, r.env->node(r.gt_path.back()).position)
                   : navigation_error(r);
    return d <= opts.threshold ? 1.0 : 0.0;
}

double spl(const EpisodeResult& r, const MetricOptions& opts) {
    const double sr = success(r, opts);
    const double l = geodesic(r, r.gt_path.front(), r.gt_path.back());
    if (l == 0.0) return sr;
    const double p = trajectory_length(r);
    return sr * l / std::max(l, p);
}

double dtw(std::span<const NodeId> p, std::span<const NodeId> q, const PointDistance& d) {
    if (p.empty() || q.empty()) throw std::invalid_argument("dtw: empty path");
    const std::size_t n = p.size(), m = q.size();
    const double inf = kUnreachable;
    std::vector<double> table((n + 1) * (m + 1), inf);
    auto at = [&](std::size_t i, std::size_t j) -> double& { return table[i * (m + 1) + j]; };
    at(0, 0) = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const double best = std::min({at(i - 1, j - 1), at(i - 1, j), at(i, j - 1)});
            at(i, j) = d(p[i - 1], q[j - 1]) + best;
        }
    }
    return at(n, m);
}

double ndtw(const EpisodeResult& r, double d_th) {
    check(r);
    const double cost = dtw(r.executed_path, r.gt_path, [&](NodeId a, NodeId b) { return geodesic(r, a, b); });
    return std::exp(-cost / (static_cast<double>(r.gt_path.size()) * d_th));
}

double sdtw(const EpisodeResult& r, const MetricOptions& opts) { return success(r, opts) * ndtw(r, opts.threshold); }

MetricRow evaluate(const EpisodeResult& r, const MetricOptions& opts) {
    MetricRow row;
    row.tl = trajectory_length(r);
    row.ne = navigation_error(r);
    row.sr = success(r, opts);
    row.spl = spl(r, opts);
    row.ndtw = ndtw(r, opts.threshold);
    row.sdtw = row.sr * row.ndtw;
    return row;
}

Summary aggregate(std::span<const MetricRow> rows) {
    Summary s;
    s.count = rows.size();
    if (rows.empty()) return s;
    for (const MetricRow& r : rows) {
        s.mean.tl += r.tl;
        s.mean.ne += r.ne;
        s.mean.sr += r.sr;
        s.mean.spl += r.spl;
        s.mean.ndtw += r.ndtw;
        s.mean.sdtw += r.sdtw;
    }
    const double n = static_cast<double>(rows.size());
    s.mean.tl /= n;
    s.mean.ne /= n;
    s.mean.sr /= n;
    s.mean.spl /= n;
    s.mean.ndtw /= n;
    s.mean.sdtw /= n;
    return s;
}

std::string fixed(double v, int decimals) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string percent(double v) { return fixed(v * 100.0, 2); }

}  // namespace oikg::metrics
