#include "ocsim/csv.hpp"
#include "ocsim/report.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>

#include <sstream>

using namespace ocsim;

namespace {

std::vector<MetricsFrame> frames(std::initializer_list<std::size_t> recruits, std::size_t offset = 0) {
    std::vector<MetricsFrame> out;
    Tick t = static_cast<Tick>(offset);
    for (auto r : recruits) {
        MetricsFrame f;
        f.tick = t++;
        f.recruits = r;
        f.crimes = 2 * r;
        f.oc_member_count = 50 + r;
        f.alive = 1000;
        out.push_back(f);
    }
    return out;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
    return out;
}

} // namespace

TEST_CASE("difference report") {
    const auto treated = series_from_frames(frames({1, 0, 2}));
    const auto base = series_from_frames(frames({3, 1, 1, 5}));
    const auto csv = difference_report(treated, base);
    std::stringstream ss(csv);
    std::string header;
    std::getline(ss, header);
    const auto cols = split(header);
    REQUIRE(cols.size() == 1 + 3 * summary_metrics().size());
    CHECK(cols[0] == "tick");
    CHECK(cols[1] == "recruits_treatment");
    CHECK(cols[2] == "recruits_baseline");
    CHECK(cols[3] == "recruits_diff");

    std::vector<std::vector<std::string>> rows;
    for (std::string line; std::getline(ss, line);) rows.push_back(split(line));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0][0] == "0");
    CHECK(std::stod(rows[0][3]) == -2.0);
    CHECK(std::stod(rows[1][3]) == -1.0);
    CHECK(std::stod(rows[2][3]) == 1.0);
    for (std::size_t c = 1; c < cols.size(); ++c) {
        if (cols[c].ends_with("_diff"))
            for (const auto& r : rows) CHECK(std::stod(r[c]) == std::stod(r[c - 2]) - std::stod(r[c - 1]));
    }
}

TEST_CASE("only shared ticks are compared") {
    const auto a = series_from_frames(frames({1, 2, 3}, 0));
    const auto b = series_from_frames(frames({1, 2, 3}, 2));
    const auto diff = compare_series(a, b);
    REQUIRE(diff.size() == 1);
    CHECK(diff[0].at("tick") == 2);
    CHECK(diff[0].at("recruits") == 2.0);
}

TEST_CASE("comparing a series with itself is all zeros") {
    ocsim::Simulation sim{ocsim::testing::small_scenario(400, 12, 6)};
    sim.run();
    const auto s = series_from_frames(sim.frames());
    const auto diff = compare_series(s, s);
    CHECK(diff.size() == 12);
    for (const auto& row : diff)
        for (const auto& m : summary_metrics()) CHECK(row.at(m) == 0.0);
}

TEST_CASE("series read back from run and batch outputs") {
    const auto config = ocsim::testing::small_scenario(400, 12, 9);
    const auto root = std::filesystem::temp_directory_path() / "ocsim_test_report";
    std::filesystem::remove_all(root);

    const auto batch = run_batch(config, 2, 1);
    write_run_outputs(batch.runs[0], config, root / "run");
    write_batch_outputs(batch, config, root / "batch");
    CHECK(std::filesystem::exists(root / "batch" / "frames_r000.csv"));
    CHECK(std::filesystem::exists(root / "batch" / "frames_r001.csv"));

    const auto run = read_metric_series(root / "run");
    const auto direct = series_from_frames(batch.runs[0].frames);
    CHECK(run.ticks == direct.ticks);
    for (const auto& m : summary_metrics()) {
        REQUIRE(run.values.at(m).size() == 12);
        for (std::size_t i = 0; i < 12; ++i) CHECK(run.values.at(m)[i] == doctest::Approx(direct.values.at(m)[i]));
    }

    const auto means = read_metric_series(root / "batch");
    CHECK(means.ticks.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) {
        const double expected =
            (static_cast<double>(batch.runs[0].frames[i].recruits) + static_cast<double>(batch.runs[1].frames[i].recruits)) / 2.0;
        CHECK(means.values.at("recruits")[i] == doctest::Approx(expected));
    }
    CHECK_THROWS_AS(read_metric_series(root), ConfigError);
}
