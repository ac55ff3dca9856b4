// lrareg: phantom generation, DRR rendering, single registration and the
// benchmark protocol.
//
// Every subcommand resolves its configuration as defaults <- --config file <-
// flags, rejects unknown keys and echoes the resolved tree in its output.
// Exit codes: 0 success, 2 bad arguments or config, 3 I/O failure,
// 4 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lrareg/drr.hpp"
#include "lrareg/errors.hpp"
#include "lrareg/evaluation.hpp"
#include "lrareg/registration.hpp"
#include "lrareg/rng.hpp"

using namespace lrareg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitArgs = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

const std::set<std::string> kSections{"phantom",      "camera",  "render",    "registration",
                                      "initial_pose", "methods", "benchmark"};

json default_tree() {
  json tree;
  tree["phantom"] = {{"kind", "spine"}, {"dims", {64, 64, 64}}, {"spacing_mm", 3.0}, {"seed", 0}};
  tree["camera"] = BenchmarkConfig{}.camera;
  tree["render"] = {{"pose", Pose6{}}, {"step_mm", 1.0}, {"threads", 1}};
  json reg = RegistrationConfig{};
  reg.erase("lambda");  // resolved from the optimizer dimension when absent
  tree["registration"] = reg;
  tree["initial_pose"] = Pose6{};
  tree["benchmark"] = BenchmarkConfig{};
  tree["methods"] = json::array({{{"name", "lra-cma"}, {"registration", {{"lambda", 5}}}},
                                 {{"name", "cma-es"},
                                  {"registration", {{"optimizer", "cma-es"}, {"lambda", 50}}}}});
  return tree;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(fmt::format("malformed JSON in '{}': {}", path.string(), e.what()));
  }
}

// Layers: defaults, then the config file, then flag overrides.
json resolve(const std::optional<fs::path>& config_file, const json& overrides) {
  json tree = default_tree();
  if (config_file) {
    const json file = read_json_file(*config_file);
    if (!file.is_object()) throw InvalidArgument("config: expected a JSON object");
    for (const auto& [key, _] : file.items()) {
      if (!kSections.contains(key)) {
        throw InvalidArgument(fmt::format("config: unknown section '{}'", key));
      }
    }
    tree.merge_patch(file);
  }
  for (const auto& [key, value] : overrides.items()) {
    if (!value.is_null()) tree[key].merge_patch(value);
  }
  return tree;
}

Pose6 parse_pose(const std::string& text) {
  std::vector<double> v;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument(fmt::format("pose: cannot parse '{}'", item));
    }
  }
  if (v.size() != 6) {
    throw InvalidArgument(fmt::format("pose: expected 6 comma-separated values, got {}", v.size()));
  }
  return Pose6{v[0], v[1], v[2], v[3], v[4], v[5]};
}

CameraGeometry load_camera(const json& tree, const std::optional<fs::path>& camera_file) {
  if (camera_file) return read_json_file(*camera_file).get<CameraGeometry>();
  return tree.at("camera").get<CameraGeometry>();
}

Dims3 parse_dims(const json& j) {
  if (j.is_number()) {
    const int d = j.get<int>();
    return {d, d, d};
  }
  return j.get<Dims3>();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

json rng_note(std::uint64_t seed) {
  return {{"seed", seed},
          {"streams",
           {{"optimizer", static_cast<int>(Stream::Optimizer)},
            {"test_pose", static_cast<int>(Stream::TestPose)},
            {"initial_offset", static_cast<int>(Stream::InitialOffset)},
            {"phantom", static_cast<int>(Stream::Phantom)}}}};
}

// ---------------------------------------------------------------------------

struct CommonArgs {
  std::optional<fs::path> config;
};

struct PhantomArgs : CommonArgs {
  std::optional<std::string> kind;
  std::vector<int> dims;
  std::optional<double> spacing;
  std::optional<std::uint64_t> seed;
  fs::path out;
};

int cmd_phantom(const PhantomArgs& a) {
  json over;
  if (a.kind) over["phantom"]["kind"] = *a.kind;
  if (!a.dims.empty()) {
    if (a.dims.size() != 1 && a.dims.size() != 3) {
      throw InvalidArgument("phantom: --dims takes 1 or 3 values");
    }
    over["phantom"]["dims"] = a.dims.size() == 1 ? json(a.dims[0]) : json(a.dims);
  }
  if (a.spacing) over["phantom"]["spacing_mm"] = *a.spacing;
  if (a.seed) over["phantom"]["seed"] = *a.seed;
  const json tree = resolve(a.config, over);

  const json& p = tree.at("phantom");
  for (const auto& [key, _] : p.items()) {
    if (key != "kind" && key != "dims" && key != "spacing_mm" && key != "seed") {
      throw InvalidArgument(fmt::format("phantom: unknown key '{}'", key));
    }
  }
  const Volume v = make_phantom(parse_phantom_kind(p.at("kind").get<std::string>()),
                                parse_dims(p.at("dims")), p.at("spacing_mm").get<double>(),
                                p.at("seed").get<std::uint64_t>());
  save_volume(v, a.out);
  fmt::print("{}\n", json{{"config", {{"phantom", p}}}, {"out", a.out.string()}}.dump());
  return kExitOk;
}

struct RenderArgs : CommonArgs {
  fs::path volume;
  std::optional<fs::path> camera;
  std::optional<std::string> pose;
  std::optional<double> step;
  std::optional<std::size_t> threads;
  fs::path out;
  std::optional<fs::path> pgm;
};

int cmd_render(const RenderArgs& a) {
  json over;
  if (a.pose) over["render"]["pose"] = parse_pose(*a.pose);
  if (a.step) over["render"]["step_mm"] = *a.step;
  if (a.threads) over["render"]["threads"] = *a.threads;
  const json tree = resolve(a.config, over);

  const json& r = tree.at("render");
  for (const auto& [key, _] : r.items()) {
    if (key != "pose" && key != "step_mm" && key != "threads") {
      throw InvalidArgument(fmt::format("render: unknown key '{}'", key));
    }
  }
  const CameraGeometry camera = load_camera(tree, a.camera);
  const Volume volume = load_volume(a.volume);
  const DetectorImage img =
      project(volume, camera, r.at("pose").get<Pose6>(),
              RenderOptions{r.at("step_mm").get<double>(), r.at("threads").get<std::size_t>()});
  save_image_raw(img, a.out);
  if (a.pgm) save_image_pgm(img, *a.pgm);
  fmt::print("{}\n", json{{"config", {{"camera", camera}, {"render", r}}},
                          {"volume", a.volume.string()},
                          {"out", a.out.string()}}
                         .dump());
  return kExitOk;
}

struct RegistrationFlags {
  std::optional<std::string> optimizer;
  std::optional<int> lambda;
  std::optional<double> sigma0;
  std::optional<int> generations;
  std::optional<std::string> metric;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;

  void add_to(CLI::App* app) {
    app->add_option("--optimizer", optimizer, "lra-cma or cma-es");
    app->add_option("--lambda", lambda, "Population size");
    app->add_option("--sigma0", sigma0, "Initial step size");
    app->add_option("--generations", generations, "Generation budget");
    app->add_option("--metric", metric, "ncc, lncc, mncc or gc");
  }

  void apply(json& reg) const {
    if (optimizer) reg["optimizer"] = *optimizer;
    if (lambda) reg["lambda"] = *lambda;
    if (sigma0) reg["sigma0"] = *sigma0;
    if (generations) reg["generations"] = *generations;
    if (metric) reg["similarity"]["metric"] = *metric;
    if (seed) reg["seed"] = *seed;
    if (threads) reg["threads"] = *threads;
  }
};

struct RegisterArgs : CommonArgs {
  fs::path volume;
  fs::path fixed;
  std::optional<fs::path> camera;
  std::optional<std::string> initial;
  RegistrationFlags reg;
  std::optional<fs::path> out;
  std::optional<fs::path> trace;
};

int cmd_register(const RegisterArgs& a) {
  json over;
  a.reg.apply(over["registration"]);
  if (a.initial) over["initial_pose"] = parse_pose(*a.initial);
  const json tree = resolve(a.config, over);

  const RegistrationConfig cfg = tree.at("registration").get<RegistrationConfig>();
  const Pose6 initial = tree.at("initial_pose").get<Pose6>();
  const CameraGeometry camera = load_camera(tree, a.camera);
  auto volume = std::make_shared<const Volume>(load_volume(a.volume));
  const DetectorImage fixed = load_image_raw(a.fixed);

  const RegistrationResult result = register_pose(volume, camera, fixed, initial, cfg);

  const json out{{"config", {{"camera", camera}, {"registration", cfg}, {"initial_pose", initial}}},
                 {"rng", rng_note(cfg.seed)},
                 {"inputs", {{"volume", a.volume.string()}, {"fixed", a.fixed.string()}}},
                 {"result", to_json(result)}};
  if (a.trace) {
    std::string lines;
    for (const GenerationRecord& g : result.trace) lines += to_json_line(g).dump() + "\n";
    write_text(*a.trace, lines);
  }
  if (a.out) {
    write_text(*a.out, out.dump(2) + "\n");
  } else {
    fmt::print("{}\n", out.dump(2));
  }
  return kExitOk;
}

struct BenchmarkArgs : CommonArgs {
  std::optional<std::size_t> cases;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<int> generations;
  std::optional<int> lambda_classic;
  std::optional<std::string> metric;
  std::optional<double> max_rot;
  std::optional<double> max_trans;
  std::optional<fs::path> diff_maps;
  std::optional<fs::path> out;
  std::optional<fs::path> table;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  json over;
  json& b = over["benchmark"];
  if (a.cases) b["cases"] = *a.cases;
  if (a.seed) b["seed"] = *a.seed;
  if (a.threads) b["threads"] = *a.threads;
  if (a.max_rot || a.max_trans) {
    if (!a.max_rot || !a.max_trans) {
      throw InvalidArgument("benchmark: --max-rot and --max-trans go together");
    }
    b["offset_truncation"] = {{"max_rot_deg", *a.max_rot}, {"max_trans_mm", *a.max_trans}};
  }
  if (a.generations) over["registration"]["generations"] = *a.generations;
  if (a.metric) over["registration"]["similarity"]["metric"] = *a.metric;
  json tree = resolve(a.config, over);

  if (a.lambda_classic) {
    for (json& m : tree.at("methods")) {
      json& r = m["registration"];
      if (r.value("optimizer", "") == "cma-es") r["lambda"] = *a.lambda_classic;
    }
  }

  BenchmarkConfig cfg = tree.at("benchmark").get<BenchmarkConfig>();
  if (a.diff_maps) cfg.diff_map_dir = *a.diff_maps;
  std::vector<MethodSpec> methods;
  if (!tree.at("methods").is_array() || tree.at("methods").empty()) {
    throw InvalidArgument("methods: expected a non-empty array");
  }
  for (const json& m : tree.at("methods")) {
    for (const auto& [key, _] : m.items()) {
      if (key != "name" && key != "registration") {
        throw InvalidArgument(fmt::format("methods: unknown key '{}'", key));
      }
    }
    json reg = tree.at("registration");
    if (m.contains("registration")) reg.merge_patch(m.at("registration"));
    methods.push_back({m.at("name").get<std::string>(), reg.get<RegistrationConfig>()});
  }

  const BenchmarkReport report = run_benchmark(cfg, methods);
  const std::string table = format_table(report);
  json out = to_json(report);
  out["rng"] = rng_note(cfg.seed);
  if (cfg.diff_map_dir) out["diff_map_dir"] = cfg.diff_map_dir->string();
  if (a.out) write_text(*a.out, out.dump(2) + "\n");
  if (a.table) write_text(*a.table, table);
  fmt::print("{}", table);
  return kExitOk;
}

template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const InvalidArgument& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitArgs;
  } catch (const json::exception& e) {
    fmt::print(stderr, "error: config: {}\n", e.what());
    return kExitArgs;
  } catch (const IoError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitIo;
  } catch (const NumericalError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D/3D registration with learning-rate-adapted CMA-ES"};
  app.require_subcommand(1);

  PhantomArgs ph;
  CLI::App* phantom = app.add_subcommand("phantom", "Write a synthetic volume");
  phantom->add_option("--config", ph.config, "JSON config file")->check(CLI::ExistingFile);
  phantom->add_option("--kind", ph.kind, "sphere, box or spine");
  phantom->add_option("--dims", ph.dims, "Voxels per axis: N or NX NY NZ")->expected(1, 3);
  phantom->add_option("--spacing", ph.spacing, "Voxel spacing in mm");
  phantom->add_option("--seed", ph.seed, "Random seed");
  phantom->add_option("--out", ph.out, "Output stem (writes .raw and .json)")->required();

  RenderArgs rd;
  CLI::App* render = app.add_subcommand("render", "Render a DRR");
  render->add_option("--config", rd.config, "JSON config file")->check(CLI::ExistingFile);
  render->add_option("--volume", rd.volume, "Volume stem")->required();
  render->add_option("--camera", rd.camera, "Camera JSON file");
  render->add_option("--pose", rd.pose, "rx,ry,rz,tx,ty,tz in degrees and mm");
  render->add_option("--step", rd.step, "Ray sampling step in mm");
  render->add_option("--threads", rd.threads, "Worker threads");
  render->add_option("--out", rd.out, "Output stem (writes .raw and .json)")->required();
  render->add_option("--pgm", rd.pgm, "Also write a 16-bit PGM preview");

  RegisterArgs rg;
  CLI::App* reg = app.add_subcommand("register", "Register a volume to one projection");
  reg->add_option("--config", rg.config, "JSON config file")->check(CLI::ExistingFile);
  reg->add_option("--volume", rg.volume, "Volume stem")->required();
  reg->add_option("--fixed", rg.fixed, "Fixed image stem")->required();
  reg->add_option("--camera", rg.camera, "Camera JSON file");
  reg->add_option("--initial", rg.initial, "Start pose rx,ry,rz,tx,ty,tz");
  rg.reg.add_to(reg);
  reg->add_option("--seed", rg.reg.seed, "Random seed");
  reg->add_option("--threads", rg.reg.threads, "Worker threads");
  reg->add_option("--out", rg.out, "Result JSON (default stdout)");
  reg->add_option("--trace", rg.trace, "Per-generation trace as JSON lines");

  BenchmarkArgs bm;
  CLI::App* bench = app.add_subcommand("benchmark", "Run the registration benchmark");
  bench->add_option("--config", bm.config, "JSON config file")->check(CLI::ExistingFile);
  bench->add_option("--cases", bm.cases, "Number of cases");
  bench->add_option("--seed", bm.seed, "Random seed");
  bench->add_option("--threads", bm.threads, "Worker threads");
  bench->add_option("--generations", bm.generations, "Generation budget for every method");
  bench->add_option("--lambda-classic", bm.lambda_classic, "Population of cma-es methods");
  bench->add_option("--metric", bm.metric, "ncc, lncc, mncc or gc");
  bench->add_option("--max-rot", bm.max_rot, "Truncate start rotations to this bound (deg)");
  bench->add_option("--max-trans", bm.max_trans, "Truncate start translations to this bound (mm)");
  bench->add_option("--emit-diff-maps", bm.diff_maps, "Directory for per-case difference maps");
  bench->add_option("--out", bm.out, "Report JSON");
  bench->add_option("--table", bm.table, "Also write the text table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitArgs;
  }

  if (*phantom) return guarded([&] { return cmd_phantom(ph); });
  if (*render) return guarded([&] { return cmd_render(rd); });
  if (*reg) return guarded([&] { return cmd_register(rg); });
  return guarded([&] { return cmd_benchmark(bm); });
}
