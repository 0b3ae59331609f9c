// Sliding-window classification runs, span derivation and result files.
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "svcfp/pipeline.hpp"

using namespace svcfp;

namespace {

struct TempDir {
    std::filesystem::path path;

    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("svcfp_pipeline_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }

    std::string file(const char* name) const { return (path / name).string(); }
};

void add_day(std::vector<FlowRecord>& out, const char* dev, double day_start,
             ServiceKey service, int count) {
    for (int i = 0; i < count; ++i) {
        FlowRecord r;
        r.device_id = dev;
        r.timestamp = static_cast<std::int64_t>(
            day_start + (i + 0.5) * kSecondsPerDay / count);
        r.service = service;
        r.conn_key = "k" + std::to_string(out.size());
        out.push_back(r);
    }
}

Fingerprint unit_fp(const char* dev, std::uint32_t idx) {
    Fingerprint fp;
    fp.device_id = dev;
    fp.vector.kind = ReprKind::G;
    fp.vector.g = Granularity::infinite();
    fp.vector.window = TimeWindow{0.0, 8.0 * kSecondsPerDay};
    fp.vector.entries[idx] = 1.0;
    return fp;
}

FingerprintPool two_device_pool() {
    FingerprintPool pool;
    pool.config.g = Granularity::infinite();
    pool.fingerprints.push_back(unit_fp("cam", 443));
    pool.fingerprints.push_back(unit_fp("plug", 8883));
    return pool;
}

} // namespace

TEST_CASE("the derived span floors the first day and ceils the last") {
    DeviceFlows devices;
    devices["d"].push_back(FlowRecord{
        "d", static_cast<std::int64_t>(1.5 * kSecondsPerDay),
        ServiceKey{Protocol::TCP, 443}, "k1"});
    devices["d"].push_back(FlowRecord{
        "d", static_cast<std::int64_t>(9.2 * kSecondsPerDay),
        ServiceKey{Protocol::TCP, 443}, "k2"});

    ClassifySpan span = derive_span(devices, 8, 1);
    CHECK(span.start == doctest::Approx(kSecondsPerDay));
    CHECK(span.window_days == 8);
    CHECK(span.slide_days == 1);
    // Days 1..10 leave room for two 8-day windows, one day apart.
    CHECK(span.window_count == 2);
}

TEST_CASE("explicit bounds override the data span") {
    DeviceFlows devices;
    devices["d"].push_back(FlowRecord{"d", 50, ServiceKey{Protocol::TCP, 443},
                                      "k"});
    ClassifySpan a = derive_span(devices, 8, 1, 0.0, 16.0 * kSecondsPerDay);
    CHECK(a.start == 0.0);
    CHECK(a.window_count == 9);

    ClassifySpan b = derive_span(devices, 8, 8, 0.0, 16.0 * kSecondsPerDay);
    CHECK(b.window_count == 2);

    ClassifySpan c = derive_span(devices, 8, 1, 0.0, 7.0 * kSecondsPerDay);
    CHECK(c.window_count == 0); // too short for even one window
}

TEST_CASE("no flows and no explicit bounds means no windows") {
    DeviceFlows empty;
    CHECK(derive_span(empty, 8, 1).window_count == 0);
    DeviceFlows silent;
    silent["d"] = {};
    CHECK(derive_span(silent, 8, 1).window_count == 0);
}

TEST_CASE("span parameters must be positive") {
    DeviceFlows empty;
    CHECK_THROWS_AS(derive_span(empty, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(derive_span(empty, 8, 0), std::invalid_argument);
}

TEST_CASE("a closed run labels every non-empty window") {
    DeviceFlows devices;
    for (int day = 0; day < 16; ++day) {
        add_day(devices["cam"], "cam", day * kSecondsPerDay,
                {Protocol::TCP, 443}, 20);
        if (day < 8) {
            add_day(devices["plug"], "plug", day * kSecondsPerDay,
                    {Protocol::TCP, 8883}, 10);
        }
    }

    ClassifySpan span;
    span.start = 0.0;
    span.window_days = 8;
    span.slide_days = 8;
    span.window_count = 2;

    ClassifyRun run = run_classification(devices, two_device_pool(),
                                         ClassifyMode::Closed, span);
    REQUIRE(run.rows.size() == 3); // plug's second window is empty
    CHECK(run.empty_windows == 1);
    for (const PredictionRow& r : run.rows) {
        CHECK(r.device_true == r.device_pred);
        CHECK(r.similarity == doctest::Approx(1.0).epsilon(1e-9));
        CHECK_FALSE(r.conflict);
    }
    CHECK(run.macro.precision == doctest::Approx(1.0));
    CHECK(run.macro.recall == doctest::Approx(1.0));
    CHECK(run.matrix.at("cam", "cam") == 2);
    CHECK(run.matrix.at("plug", "plug") == 1);
}

TEST_CASE("an open run groups devices outside the pool as unseen") {
    DeviceFlows devices;
    for (int day = 0; day < 16; ++day) {
        add_day(devices["cam"], "cam", day * kSecondsPerDay,
                {Protocol::TCP, 443}, 20);
        add_day(devices["stranger"], "stranger", day * kSecondsPerDay,
                {Protocol::TCP, 8883}, 10);
    }

    FingerprintPool pool;
    pool.config.g = Granularity::infinite();
    pool.fingerprints.push_back(unit_fp("cam", 443));

    ClassifySpan span;
    span.start = 0.0;
    span.window_days = 8;
    span.slide_days = 8;
    span.window_count = 2;

    ClassifyRun run = run_classification(devices, pool, ClassifyMode::Open, span);
    REQUIRE(run.rows.size() == 4);
    int unseen_rows = 0;
    for (const PredictionRow& r : run.rows) {
        if (r.device_true == kUnknownLabel) ++unseen_rows;
    }
    CHECK(unseen_rows == 2); // both stranger windows

    // Without calibration nothing rejects, so the stranger lands on cam.
    CHECK(run.matrix.at(kUnknownLabel, "cam") == 2);
    CHECK(run.matrix.at("cam", "cam") == 2);
    CHECK(run.macro.recall == doctest::Approx(0.5));        // cam 1, unseen 0
    CHECK(run.macro.precision == doctest::Approx(0.25));    // cam 1/2, unseen 0
}

TEST_CASE("prediction rows survive the CSV round trip") {
    std::vector<PredictionRow> rows;
    PredictionRow a;
    a.window_start = 1577836800.0;
    a.device_true = "cam";
    a.device_pred = "cam";
    a.similarity = 0.987654321;
    a.conflict = false;
    a.volume_score = 0.0;
    PredictionRow b;
    b.window_start = 1577923200.0;
    b.device_true = "UNKNOWN";
    b.device_pred = "plug";
    b.similarity = 1.0 / 3.0;
    b.conflict = true;
    b.volume_score = 0.123456789;
    rows = {a, b};

    TempDir tmp;
    std::string path = tmp.file("predictions.csv");
    write_predictions_csv(path, rows);
    auto back = read_predictions_csv(path);

    REQUIRE(back.size() == 2);
    CHECK(back[0].window_start == 1577836800.0);
    CHECK(back[0].device_true == "cam");
    CHECK(back[0].similarity == doctest::Approx(0.987654321).epsilon(1e-9));
    CHECK_FALSE(back[0].conflict);
    CHECK(back[1].device_true == "UNKNOWN");
    CHECK(back[1].device_pred == "plug");
    CHECK(back[1].conflict);
    CHECK(back[1].volume_score == doctest::Approx(0.123456789).epsilon(1e-9));
}

TEST_CASE("confusion matrices write plain and normalized CSV") {
    std::vector<std::string> truth{"a", "a", "a", "b"};
    std::vector<std::string> pred{"a", "a", "b", "b"};
    ConfusionMatrix cm = confusion(truth, pred);

    TempDir tmp;
    write_confusion_csv(tmp.file("confusion.csv"), cm);
    write_confusion_csv(tmp.file("confusion_norm.csv"), cm, true);

    std::ifstream in(tmp.file("confusion.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "true_label,a,b");
    std::getline(in, line);
    CHECK(line == "a,2,1");
    std::getline(in, line);
    CHECK(line == "b,0,1");

    std::ifstream norm(tmp.file("confusion_norm.csv"));
    std::getline(norm, line);
    CHECK(line == "true_label,a,b");
    std::getline(norm, line);
    CHECK(line == "a,0.666667,0.333333");
}
