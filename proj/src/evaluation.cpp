#include "lrareg/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "lrareg/errors.hpp"
#include "lrareg/parallel.hpp"
#include "lrareg/rng.hpp"

namespace lrareg {

double mtre(const Pose6& a, const Pose6& b, const LandmarkSet& landmarks) {
  if (landmarks.points.empty()) throw InvalidArgument("mtre: empty landmark set");
  const RigidTransform ta = pose_to_transform(a);
  const RigidTransform tb = pose_to_transform(b);
  double sum = 0.0;
  for (const Vec3& p : landmarks.points) {
    sum += (transform_point(ta, p) - transform_point(tb, p)).norm();
  }
  return sum / static_cast<double>(landmarks.points.size());
}

PoseError pose_error(const Pose6& a, const Pose6& b) {
  const RigidTransform ta = pose_to_transform(a);
  const RigidTransform tb = pose_to_transform(b);
  const double c = std::clamp(((ta.rotation.transpose() * tb.rotation).trace() - 1.0) / 2.0, -1.0,
                              1.0);
  return {std::acos(c) * 180.0 / std::numbers::pi, (ta.translation - tb.translation).norm()};
}

LandmarkSet default_landmarks(const Volume& volume) {
  const Vec3 quarter = 0.25 * volume.extent();
  LandmarkSet set;
  set.points.reserve(27);
  for (int k = -1; k <= 1; ++k)
    for (int j = -1; j <= 1; ++j)
      for (int i = -1; i <= 1; ++i)
        set.points.emplace_back(i * quarter.x(), j * quarter.y(), k * quarter.z());
  return set;
}

DetectorImage difference_map(const DetectorImage& a, const DetectorImage& b) {
  if (a.width != b.width || a.height != b.height) {
    throw InvalidArgument(fmt::format("difference_map: dimension mismatch {}x{} vs {}x{}",
                                      a.width, a.height, b.width, b.height));
  }
  const DetectorImage na = normalize_image(a);
  const DetectorImage nb = normalize_image(b);
  DetectorImage out(a.width, a.height, a.spacing_mm);
  for (std::size_t n = 0; n < out.size(); ++n) out.data[n] = std::abs(na.data[n] - nb.data[n]);
  return out;
}

Summary summarize(std::vector<double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double sq = 0.0;
  for (const double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / n);
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return s;
}

namespace {

Aggregates aggregate_final(const std::vector<CaseRecord>& cases) {
  std::vector<double> m, r, t, s, e;
  for (const auto& c : cases) {
    m.push_back(c.final_mtre);
    r.push_back(c.final_error.rotation_deg);
    t.push_back(c.final_error.translation_mm);
    s.push_back(c.seconds);
    e.push_back(static_cast<double>(c.evaluations));
  }
  Aggregates a;
  a.mtre = summarize(m);
  a.rotation_deg = summarize(r);
  a.translation_mm = summarize(t);
  a.seconds = summarize(s);
  a.mean_evaluations = summarize(e).mean;
  return a;
}

Aggregates aggregate_initial(const std::vector<CaseRecord>& cases) {
  std::vector<double> m, r, t;
  for (const auto& c : cases) {
    m.push_back(c.initial_mtre);
    r.push_back(c.initial_error.rotation_deg);
    t.push_back(c.initial_error.translation_mm);
  }
  Aggregates a;
  a.mtre = summarize(m);
  a.rotation_deg = summarize(r);
  a.translation_mm = summarize(t);
  return a;
}

}  // namespace

void MethodReport::aggregate() { final = aggregate_final(cases); }

void BenchmarkReport::aggregate() {
  for (auto& m : methods) m.aggregate();
  initial = methods.empty() ? Aggregates{} : aggregate_initial(methods.front().cases);
}

void BenchmarkConfig::validate() const {
  if (cases < 1) throw InvalidArgument("benchmark: cases must be >= 1");
  make_camera({camera.width, camera.height}, camera.spacing_mm, camera.sid_mm, camera.siso_mm);
  if (!(volume_spacing_mm > 0.0)) throw InvalidArgument("benchmark: volume spacing must be > 0");
  if (offset_truncation &&
      !(offset_truncation->max_rot_deg > 0.0 && offset_truncation->max_trans_mm > 0.0)) {
    throw InvalidArgument("benchmark: truncation bounds must be > 0");
  }
}

Volume benchmark_volume(const BenchmarkConfig& cfg) {
  return make_phantom(cfg.phantom, cfg.dims, cfg.volume_spacing_mm,
                      derive_seed(cfg.seed, Stream::Phantom));
}

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, const std::vector<MethodSpec>& methods) {
  cfg.validate();
  if (methods.empty()) throw InvalidArgument("benchmark: no methods given");
  for (const auto& m : methods) m.config.validate();

  const auto volume = std::make_shared<const Volume>(benchmark_volume(cfg));
  const LandmarkSet landmarks = default_landmarks(*volume);

  BenchmarkReport report;
  report.config = cfg;
  for (const auto& m : methods) {
    MethodReport mr;
    mr.name = m.name;
    mr.config = m.config;
    mr.cases.resize(cfg.cases);
    report.methods.push_back(std::move(mr));
  }

  if (cfg.diff_map_dir) std::filesystem::create_directories(*cfg.diff_map_dir);

  parallel_for(cfg.cases, cfg.threads, [&](std::size_t i) {
    Rng pose_rng(derive_seed(cfg.seed, Stream::TestPose, i));
    Rng offset_rng(derive_seed(cfg.seed, Stream::InitialOffset, i));
    const Pose6 truth = sample_test_pose(pose_rng);
    const Pose6 start = truth + sample_initial_offset(offset_rng, cfg.offset_truncation);
    const DetectorImage fixed = project(*volume, cfg.camera, truth);

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      RegistrationConfig rc = methods[mi].config;
      rc.seed = derive_seed(methods[mi].config.seed ^ cfg.seed, Stream::Optimizer, i);
      rc.threads = 1;

      CaseRecord rec;
      rec.case_id = i;
      rec.ground_truth = truth;
      rec.initial = start;
      rec.initial_mtre = mtre(start, truth, landmarks);
      rec.initial_error = pose_error(start, truth);
      try {
        const Objective objective(volume, cfg.camera, fixed, rc.similarity,
                                  RenderOptions{rc.step_mm, 1});
        const RegistrationResult r = register_pose(objective, start, rc);
        rec.estimate = r.pose;
        rec.final_cost = r.cost;
        rec.seconds = r.seconds;
        rec.evaluations = r.evaluations;
        if (cfg.diff_map_dir) {
          const DetectorImage moving = project(*volume, cfg.camera, r.pose, {rc.step_mm, 1});
          save_image_pgm(difference_map(fixed, moving),
                         *cfg.diff_map_dir /
                             fmt::format("case_{:04d}_{}.pgm", i, methods[mi].name));
        }
      } catch (const std::exception& e) {
        rec.failed = true;
        rec.failure = e.what();
        rec.estimate = start;
      }
      rec.final_mtre = mtre(rec.estimate, truth, landmarks);
      rec.final_error = pose_error(rec.estimate, truth);
      report.methods[mi].cases[i] = std::move(rec);
    }
  });

  report.aggregate();
  return report;
}

namespace {

nlohmann::json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"median", s.median}};
}

nlohmann::json aggregates_json(const Aggregates& a, bool with_runtime, bool include_timing) {
  nlohmann::json j{{"mtre_mm", summary_json(a.mtre)},
                   {"rotation_deg", summary_json(a.rotation_deg)},
                   {"translation_mm", summary_json(a.translation_mm)}};
  if (with_runtime) {
    j["mean_evaluations"] = a.mean_evaluations;
    if (include_timing) j["seconds"] = summary_json(a.seconds);
  }
  return j;
}

}  // namespace

void to_json(nlohmann::json& j, const BenchmarkConfig& c) {
  j = nlohmann::json{{"phantom", std::string(to_string(c.phantom))},
                     {"dims", c.dims},
                     {"volume_spacing_mm", c.volume_spacing_mm},
                     {"camera", c.camera},
                     {"cases", c.cases},
                     {"seed", c.seed},
                     {"threads", c.threads}};
  if (c.offset_truncation) {
    j["offset_truncation"] = {{"max_rot_deg", c.offset_truncation->max_rot_deg},
                              {"max_trans_mm", c.offset_truncation->max_trans_mm}};
  } else {
    j["offset_truncation"] = nullptr;
  }
}

void from_json(const nlohmann::json& j, BenchmarkConfig& c) {
  if (!j.is_object()) throw InvalidArgument("benchmark: expected a JSON object");
  BenchmarkConfig out;
  for (const auto& [key, value] : j.items()) {
    if (key == "phantom") {
      out.phantom = parse_phantom_kind(value.get<std::string>());
    } else if (key == "dims") {
      if (value.is_number()) {
        const int d = value.get<int>();
        out.dims = {d, d, d};
      } else {
        out.dims = value.get<Dims3>();
      }
    } else if (key == "volume_spacing_mm") {
      out.volume_spacing_mm = value.get<double>();
    } else if (key == "camera") {
      out.camera = value.get<CameraGeometry>();
    } else if (key == "cases") {
      out.cases = value.get<std::size_t>();
    } else if (key == "seed") {
      out.seed = value.get<std::uint64_t>();
    } else if (key == "threads") {
      out.threads = value.get<std::size_t>();
    } else if (key == "offset_truncation") {
      if (value.is_null()) {
        out.offset_truncation.reset();
      } else {
        out.offset_truncation = OffsetTruncation{value.at("max_rot_deg").get<double>(),
                                                 value.at("max_trans_mm").get<double>()};
      }
    } else {
      throw InvalidArgument(fmt::format("benchmark: unknown key '{}'", key));
    }
  }
  c = out;
}

nlohmann::json to_json(const BenchmarkReport& report, bool include_timing) {
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : report.methods) {
    nlohmann::json cases = nlohmann::json::array();
    for (const auto& c : m.cases) {
      nlohmann::json cj{{"case", c.case_id},
                        {"ground_truth", c.ground_truth},
                        {"initial", c.initial},
                        {"estimate", c.estimate},
                        {"initial_mtre_mm", c.initial_mtre},
                        {"final_mtre_mm", c.final_mtre},
                        {"initial_rotation_deg", c.initial_error.rotation_deg},
                        {"initial_translation_mm", c.initial_error.translation_mm},
                        {"rotation_deg", c.final_error.rotation_deg},
                        {"translation_mm", c.final_error.translation_mm},
                        {"final_cost", c.final_cost},
                        {"evaluations", c.evaluations},
                        {"failed", c.failed}};
      if (c.failed) cj["failure"] = c.failure;
      if (include_timing) cj["seconds"] = c.seconds;
      cases.push_back(std::move(cj));
    }
    methods.push_back({{"name", m.name},
                       {"config", m.config},
                       {"aggregate", aggregates_json(m.final, true, include_timing)},
                       {"cases", std::move(cases)}});
  }
  return {{"config", report.config},
          {"initial", aggregates_json(report.initial, false, include_timing)},
          {"methods", std::move(methods)}};
}

std::string format_table(const BenchmarkReport& report) {
  struct Row {
    std::string method, mtre, median, rot, trans, time;
  };
  std::vector<Row> rows;
  rows.push_back({"Method", "mTRE mean(std)", "median", "Rot.(deg)", "Trans.(mm)", "time(s)"});
  auto row_for = [](const std::string& name, const Aggregates& a, std::optional<double> time) {
    return Row{name,
               fmt::format("{:.1f}({:.1f})", a.mtre.mean, a.mtre.std),
               fmt::format("{:.1f}", a.mtre.median),
               fmt::format("{:.1f}", a.rotation_deg.mean),
               fmt::format("{:.1f}", a.translation_mm.mean),
               time ? fmt::format("{:.2f}", *time) : std::string("N/A")};
  };
  rows.push_back(row_for("Initial", report.initial, std::nullopt));
  for (const auto& m : report.methods) rows.push_back(row_for(m.name, m.final, m.final.seconds.mean));

  std::array<std::size_t, 6> width{};
  for (const auto& r : rows) {
    const std::array<const std::string*, 6> cells{&r.method, &r.mtre, &r.median,
                                                  &r.rot,    &r.trans, &r.time};
    for (std::size_t c = 0; c < 6; ++c) width[c] = std::max(width[c], cells[c]->size());
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << fmt::format("{:<{}} | {:>{}} | {:>{}} | {:>{}} | {:>{}} | {:>{}}\n", r.method,
                       width[0], r.mtre, width[1], r.median, width[2], r.rot, width[3], r.trans,
                       width[4], r.time, width[5]);
    if (i == 0) {
      std::size_t total = 0;
      for (const auto w : width) total += w;
      out << std::string(total + 3 * 5, '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace lrareg
