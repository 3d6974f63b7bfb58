#include <sstream>

#include "doctest.h"
#include "nowcast/error.hpp"
#include "nowcast/ingest.hpp"
#include "nowcast/simulator.hpp"
#include "scenarios.hpp"

using namespace nowcast;

namespace {

ReportSnapshot snapshot(const char* report, std::vector<std::pair<const char*, Count>> rows, const char* area = "a") {
  ReportSnapshot s;
  s.report_date = parse_date(report);
  for (auto [d, c] : rows) s.entries[{area, parse_date(d)}] = c;
  return s;
}

TriangleRow row_of(std::vector<Count> counts) {
  TriangleRow r;
  r.test_date = parse_date("2020-10-01");
  for (std::size_t j = 0; j < counts.size(); ++j) r.reports.push_back({static_cast<int>(j) + 1, counts[j], false, false});
  return r;
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("rows before the revision window agree at both lags") {
    auto s13 = snapshot("2020-12-13", {{"2020-12-07", 50}, {"2020-12-08", 60}, {"2020-12-09", 55},
                                       {"2020-12-10", 40}, {"2020-12-11", 30}, {"2020-12-12", 10}});
    auto s14 = snapshot("2020-12-14", {{"2020-12-07", 50}, {"2020-12-08", 60}, {"2020-12-09", 55},
                                       {"2020-12-10", 48}, {"2020-12-11", 41}, {"2020-12-12", 25},
                                       {"2020-12-13", 12}});
    auto tri = build_triangle({s13, s14}, "a");
    REQUIRE(tri.rows.size() == 7);
    for (const auto& r : tri.rows) {
      if (r.test_date >= parse_date("2020-12-10") || r.reports.size() < 2) continue;
      CHECK(r.reports[0].count == r.reports[1].count);
    }
    CHECK(tri.rows[3].reports.back().count == 48);
    CHECK(tri.as_of == parse_date("2020-12-14"));
  }

  TEST_CASE("a single snapshot gives one report per test date at its own lag") {
    auto s = snapshot("2020-12-14", {{"2020-12-01", 5}, {"2020-12-05", 7}, {"2020-12-13", 1}});
    auto tri = build_triangle({s}, "a");
    for (const auto& r : tri.rows) {
      if (r.reports.empty()) continue;  // gap days inside the range
      REQUIRE(r.reports.size() == 1);
      CHECK(r.reports[0].lag == days_between(r.test_date, s.report_date));
    }
    CHECK(tri.rows.front().reports[0].count == 5);
  }

  TEST_CASE("triangles built from simulated snapshots reproduce the simulator's reports") {
    ScenarioConfig sc;
    sc.days = 25;
    sc.seed = 3;
    auto sim = simulate(sc);
    auto tri = mark_convergence(build_triangle(sim.snapshots, sc.area_id));
    REQUIRE(tri.rows.size() == sim.truth.size());
    for (std::size_t t = 0; t < tri.rows.size(); ++t) {
      for (const auto& rep : tri.rows[t].reports) {
        CHECK(rep.count == sim.report(t, rep.lag));
        CHECK_FALSE(rep.over_report);
      }
    }
  }

  TEST_CASE("constant tail converges to its value") {
    ReportTriangle tri;
    tri.rows.push_back(row_of({10, 14, 15, 15, 15, 15, 15}));
    tri.rows.push_back(row_of({3, 4}));
    tri = mark_convergence(tri);
    CHECK(tri.rows[0].converged);
    CHECK(tri.rows[0].final_count == 15);
    CHECK_FALSE(tri.rows[1].converged);
  }

  TEST_CASE("three equal reports converge early only from lag 4") {
    ReportTriangle tri;
    tri.rows.push_back(row_of({9, 9, 9}));
    tri.rows.push_back(row_of({5, 8, 9, 9, 9, 9}));
    tri = mark_convergence(tri);
    CHECK_FALSE(tri.rows[0].converged);
    CHECK(tri.rows[1].converged);
    CHECK(tri.rows[1].final_count == 9);
  }

  TEST_CASE("convergence on simulated rows follows the default rule and the truth") {
    ScenarioConfig sc;
    sc.days = 30;
    sc.seed = 8;
    sc.theta_schedule = {{4, 6}, {7, 3}, {16, 4}, {40, 4}};  // tau = 4
    auto sim = simulate(sc);
    auto tri = mark_convergence(build_triangle(sim.snapshots, sc.area_id));
    for (std::size_t t = 0; t < tri.rows.size(); ++t) {
      const auto& r = tri.rows[t];
      int latest = r.reports.back().lag;
      if (latest >= 7) CHECK(r.converged);
      if (latest < 4) CHECK_FALSE(r.converged);
      if (r.converged) {
        CHECK(*r.final_count == sim.truth[t].x);
        CHECK(r.final_count == r.reports.back().count);
      }
    }
  }

  TEST_CASE("reporting rates") {
    ReportTriangle tri;
    tri.rows.push_back(row_of({50, 80, 100, 100, 100, 100, 100}));
    tri = mark_convergence(tri);
    CHECK(reporting_rate(tri, 0, 1) == doctest::Approx(0.5));
    CHECK(reporting_rate(tri, 0, 7) == 1.0);

    ScenarioConfig sc;
    sc.days = 20;
    sc.seed = 5;
    sc.extra_report_days = 8;
    sc.lambda0 = 400;
    auto sim = simulate(sc);
    auto full = mark_convergence(build_triangle(sim.snapshots, sc.area_id));
    for (std::size_t t = 0; t < full.rows.size(); ++t) {
      for (int j = 1; j <= sc.tau(); ++j) {
        double want = static_cast<double>(sim.report(t, j)) / static_cast<double>(sim.truth[t].x);
        CHECK(reporting_rate(full, t, j) == doctest::Approx(want).epsilon(1e-15));
      }
    }
  }

  TEST_CASE("drops below an earlier report are flagged") {
    auto s1 = snapshot("2020-12-02", {{"2020-12-01", 20}});
    auto s2 = snapshot("2020-12-03", {{"2020-12-01", 18}});
    auto tri = build_triangle({s1, s2}, "a");
    CHECK(tri.rows[0].reports[1].over_report);
    CHECK(tri.rows[0].over_reported);
  }

  TEST_CASE("days without a snapshot carry the previous report forward") {
    auto s1 = snapshot("2020-12-02", {{"2020-12-01", 20}});
    auto s3 = snapshot("2020-12-04", {{"2020-12-01", 25}});
    auto tri = build_triangle({s1, s3}, "a");
    REQUIRE(tri.rows[0].reports.size() == 3);
    CHECK(tri.rows[0].reports[1].missing);
    CHECK(tri.rows[0].latest()->lag == 3);
  }

  TEST_CASE("truncation replays what was published by a date") {
    ScenarioConfig sc;
    sc.days = 30;
    sc.seed = 11;
    auto sim = simulate(sc);
    auto full = mark_convergence(build_triangle(sim.snapshots, sc.area_id));
    for (int k : {5, 12, 29}) {
      Date as_of = add_days(sc.start, k);
      std::vector<ReportSnapshot> early;
      for (const auto& s : sim.snapshots) {
        if (s.report_date <= as_of) early.push_back(s);
      }
      auto direct = mark_convergence(build_triangle(early, sc.area_id));
      auto cut = truncate_triangle(full, as_of);
      REQUIRE(cut.rows.size() == direct.rows.size());
      CHECK(cut.as_of == direct.as_of);
      for (std::size_t t = 0; t < cut.rows.size(); ++t) {
        REQUIRE(cut.rows[t].reports.size() == direct.rows[t].reports.size());
        CHECK(cut.rows[t].converged == direct.rows[t].converged);
        for (std::size_t j = 0; j < cut.rows[t].reports.size(); ++j) {
          CHECK(cut.rows[t].reports[j].count == direct.rows[t].reports[j].count);
        }
      }
    }
  }

  TEST_CASE("snapshot CSV round trip and malformed rows") {
    ScenarioConfig sc;
    sc.days = 10;
    auto sim = simulate(sc);
    std::ostringstream os;
    write_snapshots_csv(os, sim.snapshots);
    std::istringstream is(os.str());
    auto back = read_snapshots_csv(is);
    CHECK(back.rows_malformed == 0);
    REQUIRE(back.snapshots.size() == sim.snapshots.size());
    for (std::size_t i = 0; i < back.snapshots.size(); ++i) CHECK(back.snapshots[i].entries == sim.snapshots[i].entries);

    std::string text = "area_id,test_date,report_date,count\n";
    for (int i = 0; i < 99; ++i) text += "a,2020-10-01," + format_date(add_days(parse_date("2020-10-02"), i)) + ",5\n";
    std::istringstream one_bad(text + "a,2020-10-01,2020-09-30,5\n");
    auto r = read_snapshots_csv(one_bad, "x.csv");
    CHECK(r.rows_malformed == 1);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("x.csv:101") == 0);

    std::istringstream two_bad(text + "a,2020-10-01,2020-09-30,5\nb,2020-10-01,2020-10-02,-1\n");
    CHECK_THROWS_AS(read_snapshots_csv(two_bad, "x.csv"), DataError);
  }

  TEST_CASE("triangle CSV round trip") {
    ScenarioConfig sc;
    sc.days = 15;
    sc.seed = 2;
    auto sim = simulate(sc);
    auto tri = mark_convergence(build_triangle(sim.snapshots, sc.area_id));
    std::ostringstream os;
    write_triangle_csv(os, tri);
    std::istringstream is(os.str());
    auto back = read_triangles_csv(is);
    REQUIRE(back.size() == 1);
    std::ostringstream again;
    write_triangle_csv(again, back[0]);
    CHECK(again.str() == os.str());
    CHECK(back[0].as_of == tri.as_of);
  }

  TEST_CASE("adjacency neighbourhoods") {
    AdjacencyGraph g;
    g.add_edge("a", "b");
    g.add_edge("b", "c");
    g.add_edge("c", "d");
    CHECK(g.neighbourhood("a", 1) == std::set<std::string>{"b"});
    CHECK(g.neighbourhood("a", 2) == std::set<std::string>{"b", "c"});
    CHECK(g.neighbourhood("b", 2) == std::set<std::string>{"a", "c", "d"});
  }
}
