#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "nowcast/error.hpp"
#include "nowcast/io.hpp"
#include "nowcast/pipeline.hpp"
#include "scenarios.hpp"

using namespace nowcast;
namespace fs = std::filesystem;

#ifndef NOWCAST_CLI_PATH
#define NOWCAST_CLI_PATH "nowcast"
#endif

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("nowcast_unit_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args) {
  std::string cmd = std::string("\"") + NOWCAST_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(io::read_file(p)); }

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("observations use exact counts once converged and priors before") {
    ScenarioConfig sc;
    sc.days = 20;
    auto area = scenarios::simulate_area(sc);
    auto priors = build_prior_table({area.triangle}, nullptr);
    const auto& rows = area.triangle.rows;
    auto obs = observations_from_triangle(area.triangle, priors, rows.front().test_date, rows.back().test_date);
    REQUIRE(obs.size() == rows.size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
      CHECK(obs[t].thinning.has_value() == !rows[t].converged);
      CHECK(*obs[t].count == rows[t].latest()->count);
      CHECK(obs[t].lag == rows[t].latest()->lag);
    }
    LagPriorTable empty;
    CHECK_THROWS_AS(observations_from_triangle(area.triangle, empty, rows.front().test_date, rows.back().test_date),
                    Unavailable);
  }

  TEST_CASE("converged data with complete reporting reproduce the reports") {
    ScenarioConfig sc;
    sc.days = 15;
    sc.theta_schedule.clear();
    sc.extra_report_days = 8;
    auto area = scenarios::simulate_area(sc);
    NowcastOptions o;
    o.include_report_day = false;
    auto r = run_nowcast(area.triangle, LagPriorTable{}, scenarios::quick_config(2.0, 1, 200), o);
    REQUIRE(r.dates.size() == area.sim.truth.size());
    for (std::size_t t = 0; t < r.dates.size(); ++t) {
      CHECK(r.counts[t].mean() == doctest::Approx(static_cast<double>(area.sim.truth[t].x)));
    }
  }

  TEST_CASE("run_nowcast covers the window and the report day") {
    ScenarioConfig sc;
    sc.days = 30;
    sc.extra_report_days = 10;
    auto area = scenarios::simulate_area(sc);  // the full triangle is the later, converged reference
    auto now = truncate_triangle(area.triangle, add_days(sc.start, 30));
    auto priors = build_prior_table({now}, nullptr);
    NowcastOptions o;
    o.window_days = 10;
    auto r = run_nowcast(now, priors, scenarios::quick_config(2.0, 1, 200), o);
    CHECK(r.dates.size() == 11);
    CHECK(r.dates.back() == now.as_of);
    CHECK_FALSE(r.observations.back().count.has_value());
    CHECK(r.smoothing.steps() == r.dates.size());
    auto meta = run_metadata_json(r);
    CHECK(meta["area_id"] == "sim");
    CHECK(count_posteriors_json(r).size() == r.dates.size());
    std::ostringstream os;
    write_smoothing_csv(os, {r});
    CHECK(os.str().rfind("area_id,test_date,stat,value\n", 0) == 0);
    CHECK(nowcast_svg(r).find("<svg") != std::string::npos);

    auto rows = baseline_rows(r, KalmanParams{std::nan(""), 100.0, 100.0}, WindowForm::kLiteral, &area.triangle);
    bool has_ma = false, has_ae = false;
    for (const auto& b : rows) {
      has_ma = has_ma || b.estimator == "ma7_uniform";
      has_ae = has_ae || b.estimator.rfind("ae_lag", 0) == 0;
    }
    CHECK(has_ma);
    CHECK(has_ae);
  }

  TEST_CASE("monitoring flags an injected fault") {
    ScenarioConfig sc;
    sc.days = 45;
    sc.lambda0 = 300;
    sc.sigma_true = 0.2;
    sc.seed = 5003;
    Date f1 = add_days(sc.start, 42), f2 = add_days(sc.start, 44);
    sc.faults.push_back({f1, f2, 0.5});
    auto area = scenarios::simulate_area(sc);
    Date first = add_days(sc.start, 28);
    auto priors = build_prior_table({truncate_triangle(area.triangle, first)}, nullptr);
    auto rows = monitor_triangle(area.triangle, priors, scenarios::quick_config(1.0, 3), MonitorConfig{}, first, f2);
    REQUIRE(rows.size() == 17);
    bool flagged = false;
    for (const auto& r : rows) {
      CHECK(r.target_date == add_days(r.report_date, -1));
      CHECK(r.baseline.has_value() == (r.report_date >= add_days(first, 14)));
      if (r.flagged) CHECK(r.report_date >= f1);
      flagged = flagged || r.flagged;
    }
    CHECK(flagged);
    std::ostringstream os;
    write_monitor_csv(os, "sim", rows);
    const std::string text = os.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 18);
  }
}

TEST_SUITE("io") {
  TEST_CASE("key-value config") {
    auto c = io::KeyValueConfig::parse(
        "# comment\nsigma = 2.5\nname = \"two words\"  # trailing\n[monitor]\nlag = 3\nflag = true\ngrid = [1, 2, 5]\n");
    CHECK(c.get_real("sigma", 0) == 2.5);
    CHECK(c.get_string("name", "") == "two words");
    CHECK(c.get_int("monitor.lag", 0) == 3);
    CHECK(c.get_bool("monitor.flag", false));
    CHECK(c.get_reals("monitor.grid", {}) == std::vector<double>{1, 2, 5});
    CHECK(c.get_real("missing", 7.0) == 7.0);
    CHECK_THROWS(io::KeyValueConfig::parse("no equals sign\n"));
    CHECK_THROWS(c.get_int("name", 0));
    auto d = io::KeyValueConfig::parse("[monitor]\nflag = true\nlag = 3\ngrid = [1, 2, 5]\n[]\nname = \"two words\"\nsigma = 2.5\n");
    CHECK(d.canonical() == c.canonical());
  }

  TEST_CASE("hashing and number formatting") {
    CHECK(io::hex64(io::fnv1a64("")) == "cbf29ce484222325");
    CHECK(io::hex64(io::fnv1a64("a")) == "af63dc4c8601ec8c");
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5}) CHECK(std::stod(io::format_real(v)) == v);
  }

  TEST_CASE("atomic writes replace whole files") {
    auto dir = scratch("atomic");
    io::write_file_atomic(dir / "f.txt", "first");
    io::write_file_atomic(dir / "f.txt", "second");
    CHECK(io::read_file(dir / "f.txt") == "second");
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
    CHECK(n == 1);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("end to end on two areas, independent of worker count") {
    auto dir = scratch("two_areas");
    const std::string d = "\"" + dir.string() + "\"";
    io::write_file_atomic(dir / "run.conf", "burn_in = 100\nm_smooth = 200\nn_particles = 200\n");
    for (const char* a : {"north", "south"}) {
      io::write_file_atomic(dir / (std::string(a) + ".conf"),
                            std::string("[simulate]\ndays = 25\narea_id = ") + a + "\nlambda0 = 60\n");
      REQUIRE(cli("simulate --out " + d + "/sim_" + a + " --seed 3 --config " + d + "/" + a + ".conf") == 0);
    }
    REQUIRE(cli("ingest " + d + "/sim_north/snapshots.csv " + d + "/sim_south/snapshots.csv --out " + d + "/tri") == 0);
    CHECK(fs::exists(dir / "tri/triangle_north.csv"));
    CHECK(fs::exists(dir / "tri/triangle_south.csv"));
    CHECK(io::read_file(dir / "tri/triangle_north.csv") == io::read_file(dir / "sim_north/triangle_north.csv"));
    REQUIRE(cli("priors " + d + "/tri --out " + d + "/priors") == 0);

    const std::string base = " --priors " + d + "/priors/priors.csv --config " + d + "/run.conf --seed 5";
    REQUIRE(cli("nowcast " + d + "/tri --out " + d + "/nc1 --jobs 1" + base) == 0);
    REQUIRE(cli("nowcast " + d + "/tri --out " + d + "/nc2 --jobs 2" + base) == 0);
    for (const char* f : {"smoothing.csv", "nowcast.json", "baselines.csv"}) {
      CHECK(io::read_file(dir / "nc1" / f) == io::read_file(dir / "nc2" / f));
    }
    auto nc = load_json(dir / "nc1/nowcast.json");
    CHECK(nc["areas"].size() == 2);
    CHECK(nc["manifest"] == "manifest.json");

    REQUIRE(cli("nowcast " + d + "/tri --out " + d + "/nc3 --areas south" + base) == 0);
    CHECK(load_json(dir / "nc3/nowcast.json")["areas"].size() == 1);

    REQUIRE(cli("scan-sigma " + d + "/tri --out " + d + "/scan --grid 4" + base) == 0);
    auto scan = load_json(dir / "scan/sigma_scan.json");
    CHECK(scan["areas"]["north"]["best_sigma"] == 4.0);
    CHECK(scan["areas"]["north"]["log_evidence"].size() == 1);

    REQUIRE(cli("alert " + d + "/tri --out " + d + "/alert --threshold 1e9" + base) == 0);
    auto alert = load_json(dir / "alert/alerts.json");
    for (const auto& row : alert["areas"]["south"]["rows"]) CHECK(row["p_above_threshold"] == 0.0);

    auto manifest = load_json(dir / "alert/manifest.json");
    CHECK(manifest["seed"] == 5);
    CHECK(std::stod(manifest["config"]["alert.threshold"].get<std::string>()) == 1e9);
    CHECK(manifest["outputs"][0]["path"] == "alerts.json");
  }

  TEST_CASE("missing priors skip an area with a warning") {
    auto dir = scratch("skip");
    const std::string d = "\"" + dir.string() + "\"";
    REQUIRE(cli("simulate --out " + d + "/sim --seed 1") == 0);
    io::write_file_atomic(dir / "priors.csv", "area_id,lag,alpha,beta,source,window_start,window_end\n");
    CHECK(cli("nowcast " + d + "/sim --priors " + d + "/priors.csv --particles 100 --out " + d + "/nc") == 0);
    auto m = load_json(dir / "nc/manifest.json");
    CHECK(m["warnings"].size() == 1);
    CHECK(load_json(dir / "nc/nowcast.json")["areas"].empty());
  }

  TEST_CASE("errors are machine readable") {
    auto dir = scratch("errors");
    const std::string d = "\"" + dir.string() + "\"";
    fs::create_directories(dir / "empty");
    CHECK(cli("ingest " + d + "/empty --out " + d + "/out") != 0);
    auto e = load_json(dir / "out/errors.json");
    CHECK(e["command"] == "ingest");
    CHECK(e["errors"][0]["kind"] == "insufficient_data");

    CHECK(cli("nowcast " + d + "/nothing --priors x.csv --out " + d + "/out2") != 0);
    CHECK(fs::exists(dir / "out2/errors.json"));
  }

  TEST_CASE("config path from the environment") {
    auto dir = scratch("env");
    io::write_file_atomic(dir / "c.conf", "[simulate]\ndays = 9\n");
    std::string env = "NOWCAST_CONFIG=\"" + (dir / "c.conf").string() + "\" ";
    std::string cmd = env + "\"" + NOWCAST_CLI_PATH + "\" simulate --out \"" + dir.string() + "/sim\" > /dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(load_json(dir / "sim/manifest.json")["config"]["simulate.days"] == "9");
  }
}
