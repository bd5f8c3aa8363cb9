#pragma once

#include "ocsim/engine.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ocsim {

/// Per-tick scalar metrics of one run (metrics.csv) or batch (means from summary.csv).
struct MetricSeries {
    std::vector<Tick> ticks;
    std::map<std::string, std::vector<double>> values;
};

MetricSeries series_from_frames(std::span<const MetricsFrame> frames);
MetricSeries read_metric_series(const std::filesystem::path& output_dir);

/// CSV with, per metric (recruits first), the treatment value, the baseline value and their
/// difference at every tick both series share.
std::string difference_report(const MetricSeries& treatment, const MetricSeries& baseline);

/// Aligned per-tick differences (a - b) of every scalar metric.
nlohmann::json compare_series(const MetricSeries& a, const MetricSeries& b);

} // namespace ocsim
