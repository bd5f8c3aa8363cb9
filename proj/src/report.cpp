#include "ocsim/report.hpp"

#include "ocsim/csv.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace ocsim {

namespace {

std::vector<std::string> report_order() {
    std::vector<std::string> order{"recruits"};
    for (const auto& m : summary_metrics())
        if (m != "recruits") order.push_back(m);
    return order;
}

double parse_number(const std::string& s, const std::filesystem::path& file) {
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw ConfigError(file.string(), fmt::format("not a number: '{}'", s));
    }
}

// Index pairs of ticks present in both series, in tick order.
std::vector<std::pair<std::size_t, std::size_t>> align(const MetricSeries& a, const MetricSeries& b) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t i = 0, j = 0;
    while (i < a.ticks.size() && j < b.ticks.size()) {
        if (a.ticks[i] < b.ticks[j]) {
            ++i;
        } else if (b.ticks[j] < a.ticks[i]) {
            ++j;
        } else {
            out.emplace_back(i++, j++);
        }
    }
    return out;
}

} // namespace

MetricSeries series_from_frames(std::span<const MetricsFrame> frames) {
    MetricSeries s;
    for (const auto& f : frames) {
        s.ticks.push_back(f.tick);
        for (const auto& m : summary_metrics()) s.values[m].push_back(metric_value(f, m));
    }
    return s;
}

MetricSeries read_metric_series(const std::filesystem::path& dir) {
    MetricSeries s;
    if (std::filesystem::exists(dir / "metrics.csv")) {
        const auto file = dir / "metrics.csv";
        const auto t = read_csv(file);
        const auto tick_col = t.column("tick");
        for (const auto& row : t.rows) s.ticks.push_back(static_cast<Tick>(parse_number(row[tick_col], file)));
        for (const auto& m : summary_metrics()) {
            const auto col = t.column(m);
            auto& v = s.values[m];
            for (const auto& row : t.rows) v.push_back(parse_number(row[col], file));
        }
        return s;
    }
    if (std::filesystem::exists(dir / "summary.csv")) {
        const auto file = dir / "summary.csv";
        const auto t = read_csv(file);
        const auto tick_col = t.column("tick");
        const auto metric_col = t.column("metric");
        const auto mean_col = t.column("mean");
        for (const auto& row : t.rows) {
            const auto tick = static_cast<Tick>(parse_number(row[tick_col], file));
            if (s.ticks.empty() || s.ticks.back() != tick) s.ticks.push_back(tick);
            s.values[row[metric_col]].push_back(parse_number(row[mean_col], file));
        }
        return s;
    }
    throw ConfigError(dir.string(), "no metrics.csv or summary.csv in output directory");
}

std::string difference_report(const MetricSeries& treatment, const MetricSeries& baseline) {
    const auto order = report_order();
    std::string out = "tick";
    for (const auto& m : order) out += fmt::format(",{0}_treatment,{0}_baseline,{0}_diff", m);
    out += "\n";
    for (const auto& [i, j] : align(treatment, baseline)) {
        out += std::to_string(treatment.ticks[i]);
        for (const auto& m : order) {
            const double a = treatment.values.at(m)[i];
            const double b = baseline.values.at(m)[j];
            out += fmt::format(",{},{},{}", a, b, a - b);
        }
        out += "\n";
    }
    return out;
}

nlohmann::json compare_series(const MetricSeries& a, const MetricSeries& b) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [i, j] : align(a, b)) {
        nlohmann::json row{{"tick", a.ticks[i]}};
        for (const auto& m : summary_metrics()) row[m] = a.values.at(m)[i] - b.values.at(m)[j];
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace ocsim
