#include <cmath>
#include <memory>
#include <random>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "lrareg/errors.hpp"
#include "lrareg/similarity.hpp"

using namespace lrareg;

namespace {

DetectorImage random_image(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  DetectorImage img(w, h, 1.0);
  for (double& x : img.data) x = u(rng);
  return img;
}

// Textbook Pearson coefficient with long double accumulation.
double pearson(const DetectorImage& a, const DetectorImage& b) {
  const std::size_t n = a.size();
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a.data[i];
    mb += b.data[i];
  }
  ma /= n;
  mb /= n;
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a.data[i] - ma) * (b.data[i] - mb);
    saa += (a.data[i] - ma) * (a.data[i] - ma);
    sbb += (b.data[i] - mb) * (b.data[i] - mb);
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

DetectorImage affine(const DetectorImage& img, double scale, double shift) {
  DetectorImage out = img;
  for (double& x : out.data) x = scale * x + shift;
  return out;
}

DetectorImage checkerboard(int n, int square, bool inverted) {
  DetectorImage img(n, n, 1.0);
  for (int v = 0; v < n; ++v)
    for (int u = 0; u < n; ++u) {
      const bool on = ((u / square) + (v / square)) % 2 == 0;
      img.at(u, v) = (on != inverted) ? 1.0 : 0.0;
    }
  return img;
}

}  // namespace

TEST_CASE("ncc matches a brute-force Pearson oracle") {
  std::mt19937_64 rng(2024);
  for (int n = 0; n < 200; ++n) {
    const DetectorImage a = random_image(8, 8, rng);
    const DetectorImage b = random_image(8, 8, rng);
    CHECK(std::abs(ncc(a, b) - pearson(a, b)) < 1e-12);
  }
}

TEST_CASE("ncc invariances") {
  std::mt19937_64 rng(5);
  const DetectorImage a = random_image(16, 12, rng);
  const DetectorImage b = random_image(16, 12, rng);
  CHECK(ncc(a, a) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ncc(a, affine(a, 3.0, 2.0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ncc(a, affine(a, -0.5, 40.0)) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(ncc(a, b) == ncc(b, a));
  CHECK(std::abs(ncc(affine(a, 2.5, -1.0), b) - ncc(a, b)) < 1e-10);
  CHECK(std::abs(ncc(a, b)) <= 1.0);
}

TEST_CASE("constant images score 0") {
  std::mt19937_64 rng(6);
  const DetectorImage a = random_image(16, 16, rng);
  const DetectorImage c(16, 16, 1.0, 4.0);
  CHECK(ncc(a, c) == 0.0);
  CHECK(ncc(c, c) == 0.0);
  CHECK(lncc(c, c, make_patch_grid(16, 16, 3)) == 0.0);
  CHECK(gradient_correlation(c, c) == 0.0);
}

TEST_CASE("dimension mismatch") {
  const DetectorImage a(8, 8, 1.0, 1.0), b(8, 9, 1.0, 1.0);
  CHECK_THROWS_AS(ncc(a, b), InvalidArgument);
  CHECK_THROWS_AS(gradient_correlation(a, b), InvalidArgument);
  CHECK_THROWS_AS(gradient_correlation(DetectorImage(2, 8, 1.0), DetectorImage(2, 8, 1.0)),
                  InvalidArgument);
}

TEST_CASE("patch grid") {
  const PatchSpec big = make_patch_grid(256, 256, 6);
  CHECK(big.radius == 6);
  CHECK(big.centers.size() == 361);
  for (const auto& [x, y] : big.centers) {
    CHECK(x - 6 >= 0);
    CHECK(y - 6 >= 0);
    CHECK(x + 6 < 256);
    CHECK(y + 6 < 256);
  }
  const PatchSpec one = make_patch_grid(13, 13, 6);
  REQUIRE(one.centers.size() == 1);
  CHECK(one.centers[0] == std::array<int, 2>{6, 6});
  CHECK_THROWS_AS(make_patch_grid(12, 12, 6), InvalidArgument);
  CHECK(make_patch_grid(40, 27, 6).centers.size() == 3 * 2);
}

TEST_CASE("lncc") {
  std::mt19937_64 rng(8);
  const DetectorImage a = random_image(26, 26, rng);
  const DetectorImage b = random_image(26, 26, rng);
  const PatchSpec grid = make_patch_grid(26, 26, 6);
  CHECK(lncc(a, a, grid) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(lncc(a, b, grid) == lncc(b, a, grid));

  SUBCASE("one whole-image patch reduces to ncc") {
    const DetectorImage c = random_image(13, 13, rng);
    const DetectorImage d = random_image(13, 13, rng);
    CHECK(std::abs(lncc(c, d, make_patch_grid(13, 13, 6)) - ncc(c, d)) < 1e-12);
  }
  SUBCASE("mean of per-patch correlations") {
    double expected = 0.0;
    for (const auto& [x, y] : grid.centers) {
      DetectorImage pa(13, 13, 1.0), pb(13, 13, 1.0);
      for (int v = 0; v < 13; ++v)
        for (int u = 0; u < 13; ++u) {
          pa.at(u, v) = a.at(x - 6 + u, y - 6 + v);
          pb.at(u, v) = b.at(x - 6 + u, y - 6 + v);
        }
      expected += pearson(pa, pb);
    }
    expected /= static_cast<double>(grid.centers.size());
    CHECK(std::abs(lncc(a, b, grid) - expected) < 1e-12);
  }
  SUBCASE("flat patches") {
    // left half textured, right half black in both images
    DetectorImage c = a, d = b;
    for (int v = 0; v < 26; ++v)
      for (int u = 13; u < 26; ++u) c.at(u, v) = d.at(u, v) = 0.0;
    // the two right-hand patches carry nothing and are left out
    CHECK(lncc(c, c, grid) == doctest::Approx(1.0));
    // a patch flat in only one image counts as 0
    DetectorImage e = a;
    for (int v = 0; v < 13; ++v)
      for (int u = 0; u < 13; ++u) e.at(u, v) = 0.0;
    CHECK(lncc(a, e, grid) == doctest::Approx(0.75));
  }
  CHECK_THROWS_AS(lncc(a, b, PatchSpec{6, {}}), InvalidArgument);
  CHECK_THROWS_AS(lncc(a, b, PatchSpec{6, {{3, 3}}}), InvalidArgument);
}

TEST_CASE("mncc") {
  std::mt19937_64 rng(9);
  const DetectorImage a = random_image(256, 256, rng);
  DetectorImage b = random_image(256, 256, rng);
  for (std::size_t n = 0; n < b.size(); ++n) b.data[n] += 0.7 * a.data[n];
  SimilarityConfig cfg;
  cfg.mu = 0.5;
  cfg.patch_radius = 6;
  const double expected = 0.5 * pearson(a, b) + 0.5 * lncc(a, b, make_patch_grid(256, 256, 6));
  CHECK(std::abs(mncc(a, b, cfg) - expected) < 1e-12);
  CHECK(mncc(a, a, cfg) == doctest::Approx(1.0).epsilon(1e-13));

  cfg.mu = 1e-9;
  CHECK(std::abs(mncc(a, b, cfg) - ncc(a, b)) < 1e-9);
  cfg.mu = 1.0;
  CHECK_THROWS_AS(mncc(a, b, cfg), InvalidArgument);
}

TEST_CASE("gradient correlation") {
  std::mt19937_64 rng(10);
  const DetectorImage a = random_image(20, 20, rng);
  const DetectorImage b = random_image(20, 20, rng);
  CHECK(gradient_correlation(a, a) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(gradient_correlation(affine(a, 1.0, 100.0), b) - gradient_correlation(a, b)) <
        1e-12);
  CHECK(gradient_correlation(a, b) == gradient_correlation(b, a));
  CHECK(gradient_correlation(checkerboard(16, 2, false), checkerboard(16, 2, true)) ==
        doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("similarity config") {
  SimilarityConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  const nlohmann::json j = cfg;
  CHECK(j.at("metric") == "mncc");
  CHECK(j.get<SimilarityConfig>().mu == cfg.mu);
  CHECK_THROWS_AS((nlohmann::json{{"metric", "mi"}}.get<SimilarityConfig>()), InvalidArgument);
  CHECK_THROWS_AS((nlohmann::json{{"radius", 3}}.get<SimilarityConfig>()), InvalidArgument);
  CHECK_THROWS_AS((nlohmann::json{{"patch_radius", 0}}.get<SimilarityConfig>()), InvalidArgument);
  CHECK_THROWS_AS((nlohmann::json{{"mu", 0.0}}.get<SimilarityConfig>()), InvalidArgument);
  CHECK(parse_metric_kind("gc") == MetricKind::Gc);
}

TEST_CASE("objective") {
  const auto vol = std::make_shared<const Volume>(
      make_phantom(PhantomKind::Spine, {32, 32, 32}, 4.0, 1));
  const CameraGeometry cam = make_camera({64, 64}, 3.192, 1012, 506);
  const Pose6 truth{4, -6, 8, 5, -3, 12};
  const DetectorImage fixed = project(*vol, cam, truth);

  for (MetricKind kind : {MetricKind::Ncc, MetricKind::Lncc, MetricKind::Mncc, MetricKind::Gc}) {
    SimilarityConfig cfg;
    cfg.kind = kind;
    const Objective f(vol, cam, fixed, cfg);
    CAPTURE(to_string(kind));
    CHECK(std::abs(f(truth)) < 1e-9);
    Pose6 off = truth;
    off.rx += 10.0;
    CHECK(f(truth) <= f(off));
  }

  const auto empty = std::make_shared<const Volume>(Volume({16, 16, 16}, 4.0));
  const Objective zero(empty, cam, fixed, SimilarityConfig{});
  CHECK(zero({}) == 1.0);
  CHECK(zero(truth) == 1.0);

  CHECK_THROWS_AS(Objective(vol, make_camera({32, 64}, 3.192, 1012, 506), fixed, {}),
                  InvalidArgument);
}
