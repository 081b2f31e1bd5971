#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ramanml/report.hpp"
#include "ramanml/rng.hpp"

using namespace ramanml;

TEST_CASE("modified_importance: analytic anchors") {
    CHECK(modified_importance(std::exp(-1.0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(modified_importance(0.0) == 0.0);
    // direct evaluation: |1/ln(0.040)| = 0.31066746727980593
    CHECK(modified_importance(0.040) == doctest::Approx(0.31066746727980593).epsilon(1e-12));
    // tiny raw importances collapse toward zero (the readability transform's point)
    CHECK(modified_importance(1e-300) < 2e-3);
    CHECK(modified_importance(1e-12) < 0.05);
}

TEST_CASE("modified_importance: domain checks and the I=1 clamp") {
    CHECK_THROWS_AS(modified_importance(-0.1), DomainError);
    CHECK_THROWS_AS(modified_importance(1.1), DomainError);
    CHECK(std::isfinite(modified_importance(1.0)));
    CHECK(modified_importance(1.0) > 1e9);  // clamped just below the singularity
}

TEST_CASE("modified_importance: strictly increasing on (0,1)") {
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        double a = rng.uniform(1e-12, 1.0 - 1e-12);
        double b = rng.uniform(1e-12, 1.0 - 1e-12);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        CHECK(modified_importance(a) < modified_importance(b));
    }
}

TEST_CASE("rolling_average: analytic cases") {
    const std::vector<double> constant{2.5, 2.5, 2.5, 2.5};
    CHECK(rolling_average(constant) == constant);

    const std::vector<double> spike{0, 0, 5, 0, 0};
    const auto out = rolling_average(spike, 2);
    REQUIRE(out.size() == 5);
    CHECK(out[0] == doctest::Approx(5.0 / 3.0));
    CHECK(out[1] == doctest::Approx(5.0 / 4.0));
    CHECK(out[2] == doctest::Approx(1.0));
    CHECK(out[3] == doctest::Approx(5.0 / 4.0));
    CHECK(out[4] == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("rolling_average: matches the naive windowed-mean oracle") {
    Rng rng(7);
    std::vector<double> v(137);
    for (auto& x : v) x = rng.uniform(-10.0, 10.0);
    for (const std::size_t half : {1ul, 2ul, 5ul}) {
        const auto got = rolling_average(v, half);
        for (std::size_t i = 0; i < v.size(); ++i) {
            double s = 0.0;
            std::size_t n = 0;
            for (std::size_t j = 0; j < v.size(); ++j)
                if ((j >= i ? j - i : i - j) <= half) {
                    s += v[j];
                    ++n;
                }
            CHECK(std::abs(got[i] - s / static_cast<double>(n)) < 1e-12);
        }
    }
}

TEST_CASE("rolling_average: isolated spike keeps its argmax") {
    // spike at the apex of a strict local hill: every window containing the
    // spike sums its neighbors, so the centered window stays largest
    std::vector<double> v(41);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = -0.01 * std::abs(static_cast<double>(i) - 25.0);
    v[25] += 9.0;
    const auto out = rolling_average(v, 2);
    CHECK(std::max_element(out.begin(), out.end()) - out.begin() == 25);
}

TEST_CASE("importance profile: smoothed values and sum invariant") {
    Rng rng(9);
    std::vector<double> w(300), raw(300, 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 400.0 + 2.0 * static_cast<double>(i);
    double total = 0.0;
    for (auto& r : raw) {
        r = rng.uniform(0.0, 1.0);
        total += r;
    }
    for (auto& r : raw) r /= total;

    const auto profile = ImportanceProfile::from_raw(w, raw);
    double sum = 0.0;
    for (double r : profile.raw) sum += r;
    CHECK(std::abs(sum - 1.0) < 1e-9);
    CHECK(profile.smoothed == rolling_average(profile.modified, 2));
    for (double m : profile.modified) CHECK(m >= 0.0);
}

namespace {

// profile with high importance concentrated around selected grid indices
ImportanceProfile concentrated_profile(const std::vector<double>& grid,
                                       const std::vector<std::size_t>& hot) {
    std::vector<double> raw(grid.size(), 1e-6);
    for (auto i : hot) raw[i] = 0.02;  // smoothed I_m lands well above the 0.13 default
    double total = 0.0;
    for (double r : raw) total += r;
    for (auto& r : raw) r /= total;
    return ImportanceProfile::from_raw(grid, raw);
}

}  // namespace

TEST_CASE("match_peaks: the four statuses partition reference and model peaks") {
    std::vector<double> grid(200);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 400.0 + 5.0 * static_cast<double>(i);

    // data peaks at 600, 800, 1000, 1200; model importance hot at 600 and 1200
    const std::vector<double> data_peaks{600.0, 800.0, 1000.0, 1200.0};
    const auto profile = concentrated_profile(grid, {40, 160});

    const std::vector<ReferencePeak> reference{
        {609.0, "matched, shift 9"},       // near 600, hot -> MatchedImportant
        {805.0, "present but unused"},     // near 800, cold -> PresentIgnored
        {1500.0, "absent in data"},        // no data peak within 20
    };
    const auto report = match_peaks(profile, data_peaks, reference);

    REQUIRE(report.rows.size() == 4);  // 3 reference rows + model-only 1200
    CHECK(report.rows[0].status == PeakStatus::MatchedImportant);
    CHECK(*report.rows[0].shift == doctest::Approx(9.0));
    CHECK(report.rows[1].status == PeakStatus::PresentIgnored);
    CHECK(report.rows[2].status == PeakStatus::AbsentInData);
    CHECK(report.rows[3].status == PeakStatus::ModelOnlyUnidentified);
    CHECK(*report.rows[3].model_wavenumber == doctest::Approx(1200.0));

    for (const auto& row : report.rows) {
        if (row.status != PeakStatus::AbsentInData) CHECK(row.model_wavenumber.has_value());
        if (row.status == PeakStatus::MatchedImportant || row.status == PeakStatus::PresentIgnored) {
            REQUIRE(row.shift.has_value());
            CHECK(*row.shift <= report.shift_tolerance);
        }
    }
}

TEST_CASE("match_peaks: empty reference table marks every important model peak") {
    std::vector<double> grid(100);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 400.0 + 5.0 * static_cast<double>(i);
    const std::vector<double> data_peaks{500.0, 700.0};
    const auto profile = concentrated_profile(grid, {20, 60});
    const auto report = match_peaks(profile, data_peaks, {});
    REQUIRE(report.rows.size() == 2);
    for (const auto& row : report.rows) CHECK(row.status == PeakStatus::ModelOnlyUnidentified);
}

TEST_CASE("match_peaks: single constructed fixture yields one MatchedImportant row") {
    std::vector<double> grid(100);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 400.0 + 5.0 * static_cast<double>(i);
    const auto profile = concentrated_profile(grid, {30});
    const auto report = match_peaks(profile, std::vector<double>{550.0}, {{556.0, "reference line"}});
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].status == PeakStatus::MatchedImportant);
    CHECK(report.rows[0].assignment == "reference line");
}

TEST_CASE("reference table reader handles headers and bad rows") {
    const auto dir = std::filesystem::temp_directory_path() / "ramanml_test_ref";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "ref.csv");
        f << "wavenumber_cm-1,assignment\n1650,Aromatic C-C Stretch\n614,C-C-C Ring in Plane Bend\n";
    }
    const auto rows = read_reference_table((dir / "ref.csv").string());
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].wavenumber == 1650.0);
    CHECK(rows[0].assignment == "Aromatic C-C Stretch");

    {
        std::ofstream f(dir / "bad.csv");
        f << "wavenumber,assignment\n1650,ok\nnot_a_number,broken\n";
    }
    CHECK_THROWS_AS(read_reference_table((dir / "bad.csv").string()), FileError);
}
