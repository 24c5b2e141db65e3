#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "oikg/navgraph.hpp"

namespace oikg::metrics {

inline constexpr double kSuccessThreshold = 3.0;  // meters, inclusive

struct EpisodeResult {
    std::vector<NodeId> executed_path;
    std::vector<NodeId> gt_path;
    const NavGraph* env = nullptr;
    const DistanceTable* distances = nullptr;  // optional cache for geodesics
};

struct MetricOptions {
    double threshold = kSuccessThreshold;
    bool euclidean_success = false;
};

struct MetricRow {
    double tl = 0.0;
    double ne = 0.0;
    double sr = 0.0;
    double spl = 0.0;
    double ndtw = 0.0;
    double sdtw = 0.0;
};

using PointDistance = std::function<double(NodeId, NodeId)>;

double trajectory_length(const EpisodeResult& r);
double navigation_error(const EpisodeResult& r);
double success(const EpisodeResult& r, const MetricOptions& opts = {});
double spl(const EpisodeResult& r, const MetricOptions& opts = {});

/// Dynamic time warping cost with steps {match, insert, delete}.
double dtw(std::span<const NodeId> p, std::span<const NodeId> q, const PointDistance& d);
double ndtw(const EpisodeResult& r, double d_th = kSuccessThreshold);
double sdtw(const EpisodeResult& r, const MetricOptions& opts = {});

MetricRow evaluate(const EpisodeResult& r, const MetricOptions& opts = {});

struct Summary {
    std::size_t count = 0;
    MetricRow mean;
};

Summary aggregate(std::span<const MetricRow> rows);

/// Fixed-point text with `decimals` digits ("%.*f").
std::string fixed(double v, int decimals);
/// v * 100 with 2 decimals, the reporting form for SR/SPL/nDTW/sDTW.
std::string percent(double v);

}  // namespace oikg::metrics
