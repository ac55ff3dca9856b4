#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>
#include <sstream>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "lrareg/errors.hpp"
#include "lrareg/evaluation.hpp"
#include "lrareg/rng.hpp"

using namespace lrareg;

TEST_CASE("mtre") {
  const LandmarkSet grid = default_landmarks(Volume({40, 40, 40}, 2.0));
  const Pose6 a{5, -7, 12, 1, 2, 3};
  CHECK(mtre(a, a, grid) == 0.0);

  SUBCASE("pure translation offsets") {
    const Pose6 b{5, -7, 12, 1 + 3, 2 - 4, 3 + 12};
    CHECK(std::abs(mtre(a, b, grid) - 13.0) < 1e-12);
    CHECK(std::abs(mtre(a, b, LandmarkSet{{Vec3(50, -20, 7)}}) - 13.0) < 1e-12);
  }
  SUBCASE("chord length of a rotation") {
    const LandmarkSet single{{Vec3(100, 0, 0)}};
    const double expected = 2.0 * 100.0 * std::sin(5.0 * std::numbers::pi / 180.0);
    CHECK(std::abs(mtre({0, 0, 10, 0, 0, 0}, {}, single) - expected) < 1e-9);
    CHECK(std::abs(expected - 17.431) < 1e-3);
  }
  SUBCASE("symmetry and relabeling") {
    const Pose6 b{-3, 4, 1, 9, -2, 5};
    CHECK(std::abs(mtre(a, b, grid) - mtre(b, a, grid)) < 1e-12);
    LandmarkSet shuffled = grid;
    std::reverse(shuffled.points.begin(), shuffled.points.end());
    CHECK(std::abs(mtre(a, b, grid) - mtre(a, b, shuffled)) < 1e-12);
  }
  CHECK_THROWS_AS(mtre(a, a, LandmarkSet{}), InvalidArgument);
}

TEST_CASE("pose_error") {
  const Pose6 p{10, 20, -5, 1, 2, 3};
  const PoseError same = pose_error(p, p);
  CHECK(same.rotation_deg == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(same.translation_mm == 0.0);
  const PoseError rot = pose_error({}, {0, 0, 30, 0, 0, 0});
  CHECK(std::abs(rot.rotation_deg - 30.0) < 1e-9);
  CHECK(rot.translation_mm == 0.0);
  const PoseError trans = pose_error({}, {0, 0, 0, 3, 4, 0});
  CHECK(trans.rotation_deg == 0.0);
  CHECK(trans.translation_mm == 5.0);
}

TEST_CASE("default landmarks") {
  const LandmarkSet g = default_landmarks(Volume({256, 256, 256}, 1.0));
  REQUIRE(g.points.size() == 27);
  std::set<std::array<double, 3>> pts;
  for (const Vec3& p : g.points) pts.insert({p.x(), p.y(), p.z()});
  CHECK(pts.size() == 27);
  CHECK(pts.count({0.0, 0.0, 0.0}) == 1);
  CHECK(pts.count({-64.0, -64.0, -64.0}) == 1);
  CHECK(pts.count({64.0, 64.0, 64.0}) == 1);
  for (const Vec3& p : g.points) {
    CHECK(pts.count({-p.x(), -p.y(), -p.z()}) == 1);
    CHECK(p.cwiseAbs().maxCoeff() <= 64.0);
  }
}

TEST_CASE("difference map") {
  DetectorImage a(3, 1, 1.0, std::vector<double>{1.0, 2.0, 5.0});
  DetectorImage neg(3, 1, 1.0, std::vector<double>{-1.0, -2.0, -5.0});
  const DetectorImage zero = difference_map(a, a);
  CHECK(std::all_of(zero.data.begin(), zero.data.end(), [](double x) { return x == 0.0; }));
  const DetectorImage d = difference_map(a, neg);
  CHECK(d.data[0] == 1.0);
  CHECK(d.data[2] == 1.0);
  CHECK(difference_map(neg, a).data == d.data);
  CHECK_THROWS_AS(difference_map(a, DetectorImage(2, 1, 1.0)), InvalidArgument);
}

TEST_CASE("summaries") {
  const Summary s = summarize({4, 1, 3, 2});
  CHECK(s.mean == 2.5);
  CHECK(s.median == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(1.25)));
  CHECK(summarize({7, 1, 3}).median == 3.0);
}

TEST_CASE("benchmark config json") {
  BenchmarkConfig c;
  c.offset_truncation = OffsetTruncation{10, 15};
  const nlohmann::json j = c;
  const auto back = j.get<BenchmarkConfig>();
  CHECK(back.camera == c.camera);
  CHECK(back.offset_truncation->max_trans_mm == 15);
  CHECK(nlohmann::json{{"dims", 32}}.get<BenchmarkConfig>().dims == Dims3{32, 32, 32});
  CHECK_THROWS_AS((nlohmann::json{{"casess", 3}}.get<BenchmarkConfig>()), InvalidArgument);
  BenchmarkConfig bad;
  bad.cases = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

namespace {

struct ProtocolRun {
  BenchmarkConfig cfg;
  std::vector<MethodSpec> methods;
  BenchmarkReport report;
};

// Subcases re-enter the test case, so the run is shared.
const ProtocolRun& protocol_run() {
  static const ProtocolRun run = [] {
    ProtocolRun r;
    BenchmarkConfig& cfg = r.cfg;
    cfg.dims = {32, 32, 32};
    cfg.volume_spacing_mm = 6.0;
    cfg.camera = make_camera({32, 32}, 6.384, 1012, 506);
    cfg.cases = 3;
    cfg.seed = 17;
    cfg.offset_truncation = OffsetTruncation{10, 15};

    RegistrationConfig lra;
    lra.generations = 2;
    RegistrationConfig classic = lra;
    classic.optimizer = OptimizerKind::CmaEs;
    classic.lambda = 50;
    r.methods = {{"lra-cma", lra}, {"cma-es", classic}};
    r.report = run_benchmark(cfg, r.methods);
    return r;
  }();
  return run;
}

}  // namespace

TEST_CASE("benchmark protocol") {
  const BenchmarkConfig& cfg = protocol_run().cfg;
  const auto& methods = protocol_run().methods;
  const BenchmarkReport& r1 = protocol_run().report;
  SUBCASE("reruns are identical except timing") {
    const BenchmarkReport r2 = run_benchmark(cfg, methods);
    CHECK(to_json(r1, false).dump() == to_json(r2, false).dump());
  }
  SUBCASE("thread count does not change results") {
    BenchmarkConfig threaded = cfg;
    threaded.threads = 3;
    nlohmann::json j3 = to_json(run_benchmark(threaded, methods), false);
    nlohmann::json j1 = to_json(r1, false);
    j3["config"].erase("threads");
    j1["config"].erase("threads");
    CHECK(j1 == j3);
  }

  SUBCASE("cases share ground truth and start across methods") {
    for (std::size_t i = 0; i < cfg.cases; ++i) {
      CHECK(r1.methods[0].cases[i].ground_truth == r1.methods[1].cases[i].ground_truth);
      CHECK(r1.methods[0].cases[i].initial == r1.methods[1].cases[i].initial);
      Rng pose_rng(derive_seed(cfg.seed, Stream::TestPose, i));
      CHECK(r1.methods[0].cases[i].ground_truth == sample_test_pose(pose_rng));
    }
  }
  SUBCASE("evaluation ratio") {
    CHECK(r1.methods[0].final.mean_evaluations == 10);
    CHECK(r1.methods[1].final.mean_evaluations == 100);
  }
  SUBCASE("initial row and aggregates recompute from the records") {
    const LandmarkSet lm = default_landmarks(benchmark_volume(cfg));
    std::vector<double> init, fin;
    for (const auto& c : r1.methods[0].cases) {
      CHECK(c.initial_mtre == mtre(c.initial, c.ground_truth, lm));
      init.push_back(c.initial_mtre);
      fin.push_back(c.final_mtre);
      CHECK_FALSE(c.failed);
    }
    CHECK(std::abs(r1.initial.mtre.mean - summarize(init).mean) < 1e-12);
    CHECK(std::abs(r1.methods[0].final.mtre.median - summarize(fin).median) < 1e-12);
  }
  SUBCASE("table shape") {
    const std::string table = format_table(r1);
    std::istringstream in(table);
    std::string header, rule, initial;
    std::getline(in, header);
    std::getline(in, rule);
    std::getline(in, initial);
    for (const char* col : {"Method", "mTRE mean(std)", "median", "Rot.(deg)", "Trans.(mm)",
                            "time(s)"}) {
      CHECK(header.find(col) != std::string::npos);
    }
    CHECK(rule.find_first_not_of('-') == std::string::npos);
    CHECK(initial.rfind("Initial", 0) == 0);
    CHECK(initial.find("N/A") != std::string::npos);
    CHECK(table.find("lra-cma") != std::string::npos);
    CHECK(table.find("cma-es") != std::string::npos);
  }
}

TEST_CASE("difference maps are written per case and method") {
  BenchmarkConfig cfg;
  cfg.dims = {16, 16, 16};
  cfg.volume_spacing_mm = 8.0;
  cfg.camera = make_camera({32, 32}, 6.384, 1012, 506);
  cfg.cases = 2;
  const auto dir = std::filesystem::temp_directory_path() / "lrareg_unit" / "diffmaps";
  std::filesystem::remove_all(dir);
  cfg.diff_map_dir = dir;
  RegistrationConfig rc;
  rc.generations = 1;
  run_benchmark(cfg, {{"lra", rc}});
  CHECK(std::filesystem::exists(dir / "case_0000_lra.pgm"));
  CHECK(std::filesystem::exists(dir / "case_0001_lra.pgm"));
}
