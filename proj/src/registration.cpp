#include "lrareg/registration.hpp"

#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "lrareg/errors.hpp"
#include "lrareg/parallel.hpp"
#include "lrareg/rng.hpp"

namespace lrareg {

void RegistrationConfig::validate() const {
  similarity.validate();
  lra.validate();
  if (!(sigma0 > 0.0)) {
    throw InvalidArgument(fmt::format("registration: sigma0 must be > 0, got {}", sigma0));
  }
  if (generations < 1) {
    throw InvalidArgument(fmt::format("registration: generations must be >= 1, got {}",
                                      generations));
  }
  if (lambda && *lambda < 2) {
    throw InvalidArgument(fmt::format("registration: lambda must be >= 2, got {}", *lambda));
  }
  if (!(step_mm > 0.0)) {
    throw InvalidArgument(fmt::format("registration: step_mm must be > 0, got {}", step_mm));
  }
}

int RegistrationConfig::population() const { return lambda.value_or(default_population(6)); }

void to_json(nlohmann::json& j, const RegistrationConfig& c) {
  j = nlohmann::json{{"similarity", c.similarity},
                     {"optimizer", std::string(to_string(c.optimizer))},
                     {"sigma0", c.sigma0},
                     {"generations", c.generations},
                     {"lambda", c.population()},
                     {"seed", c.seed},
                     {"step_mm", c.step_mm},
                     {"threads", c.threads},
                     {"lra",
                      {{"alpha", c.lra.alpha},
                       {"beta", c.lra.beta},
                       {"gamma", c.lra.gamma},
                       {"beta_ema_mean", c.lra.beta_ema_mean},
                       {"beta_ema_Sigma", c.lra.beta_ema_Sigma},
                       {"step_size_correction", c.lra.step_size_correction}}}};
}

void from_json(const nlohmann::json& j, RegistrationConfig& c) {
  if (!j.is_object()) throw InvalidArgument("registration: expected a JSON object");
  RegistrationConfig out;
  for (const auto& [key, value] : j.items()) {
    if (key == "similarity") {
      out.similarity = value.get<SimilarityConfig>();
    } else if (key == "optimizer") {
      out.optimizer = parse_optimizer_kind(value.get<std::string>());
    } else if (key == "sigma0") {
      out.sigma0 = value.get<double>();
    } else if (key == "generations") {
      out.generations = value.get<int>();
    } else if (key == "lambda") {
      if (!value.is_null()) out.lambda = value.get<int>();
    } else if (key == "seed") {
      out.seed = value.get<std::uint64_t>();
    } else if (key == "step_mm") {
      out.step_mm = value.get<double>();
    } else if (key == "threads") {
      out.threads = value.get<std::size_t>();
    } else if (key == "lra") {
      for (const auto& [k, v] : value.items()) {
        if (k == "alpha") {
          out.lra.alpha = v.get<double>();
        } else if (k == "beta") {
          out.lra.beta = v.get<double>();
        } else if (k == "gamma") {
          out.lra.gamma = v.get<double>();
        } else if (k == "beta_ema_mean") {
          out.lra.beta_ema_mean = v.get<double>();
        } else if (k == "beta_ema_Sigma") {
          out.lra.beta_ema_Sigma = v.get<double>();
        } else if (k == "step_size_correction") {
          out.lra.step_size_correction = v.get<bool>();
        } else {
          throw InvalidArgument(fmt::format("registration.lra: unknown key '{}'", k));
        }
      }
    } else {
      throw InvalidArgument(fmt::format("registration: unknown key '{}'", key));
    }
  }
  out.validate();
  c = out;
}

nlohmann::json to_json(const RegistrationResult& r, bool include_timing) {
  nlohmann::json j{{"pose", r.pose},
                   {"cost", r.cost},
                   {"generations", r.generations},
                   {"evaluations", r.evaluations},
                   {"injected_evaluations", r.injected_evaluations}};
  if (include_timing) j["seconds"] = r.seconds;
  return j;
}

RegistrationResult register_pose(const Objective& objective, const Pose6& initial,
                                 const RegistrationConfig& cfg) {
  cfg.validate();
  if (!initial.is_finite()) throw InvalidArgument("register: non-finite initial pose");
  const auto start = std::chrono::steady_clock::now();

  OptimizerConfig ocfg;
  ocfg.kind = cfg.optimizer;
  ocfg.sigma0 = cfg.sigma0;
  ocfg.lambda = cfg.population();
  ocfg.lra = cfg.lra;
  Optimizer opt(initial.to_vector(), ocfg, derive_seed(cfg.seed, Stream::Optimizer));

  auto evaluate = [&](const VecX& x) {
    const Pose6 pose = Pose6::from_vector(x);
    const double y = objective(pose);
    if (!std::isfinite(y)) {
      throw NumericalError(fmt::format(
          "register: non-finite cost {} at pose [{:.6g}, {:.6g}, {:.6g}, {:.6g}, {:.6g}, {:.6g}]",
          y, pose.rx, pose.ry, pose.rz, pose.tx, pose.ty, pose.tz));
    }
    return y;
  };

  RegistrationResult result;
  opt.offer(initial.to_vector(), evaluate(initial.to_vector()));
  result.injected_evaluations = 1;

  for (int g = 0; g < cfg.generations; ++g) {
    auto cands = opt.ask();
    parallel_for(cands.size(), cfg.threads, [&](std::size_t i) { cands[i].y = evaluate(cands[i].x); });
    result.evaluations += cands.size();
    result.trace.push_back(opt.tell(cands));
    ++result.generations;
  }

  result.pose = Pose6::from_vector(opt.best_x());
  result.cost = opt.best_y();
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

RegistrationResult register_pose(std::shared_ptr<const Volume> volume,
                                 const CameraGeometry& camera, const DetectorImage& fixed,
                                 const Pose6& initial, const RegistrationConfig& cfg) {
  const Objective objective(std::move(volume), camera, fixed, cfg.similarity,
                            RenderOptions{cfg.step_mm, 1});
  return register_pose(objective, initial, cfg);
}

Pose6 sample_initial_offset(Rng& rng, std::optional<OffsetTruncation> truncation) {
  std::normal_distribution<double> rot(0.0, 10.0);
  std::normal_distribution<double> trans(0.0, 15.0);
  auto draw = [&](std::normal_distribution<double>& dist, std::optional<double> bound) {
    double v = dist(rng);
    while (bound && std::abs(v) > *bound) v = dist(rng);
    return v;
  };
  const std::optional<double> rb =
      truncation ? std::optional<double>(truncation->max_rot_deg) : std::nullopt;
  const std::optional<double> tb =
      truncation ? std::optional<double>(truncation->max_trans_mm) : std::nullopt;
  Pose6 p;
  p.rx = draw(rot, rb);
  p.ry = draw(rot, rb);
  p.rz = draw(rot, rb);
  p.tx = draw(trans, tb);
  p.ty = draw(trans, tb);
  p.tz = draw(trans, tb);
  return p;
}

Pose6 sample_test_pose(Rng& rng) {
  std::uniform_real_distribution<double> rot(-20.0, 20.0);
  std::uniform_real_distribution<double> in_plane(-30.0, 30.0);
  std::uniform_real_distribution<double> depth(-50.0, 50.0);
  Pose6 p;
  p.rx = rot(rng);
  p.ry = rot(rng);
  p.rz = rot(rng);
  p.tx = in_plane(rng);
  p.ty = in_plane(rng);
  p.tz = depth(rng);
  return p;
}

}  // namespace lrareg
