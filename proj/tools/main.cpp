#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "inspire/distance_tree.hpp"
#include "inspire/engine.hpp"
#include "inspire/io.hpp"
#include "inspire/samplers.hpp"
#include "inspire/synth.hpp"

namespace {

// Exit codes: 0 success, 1 usage error, 2 input/parse error, 3 degenerate
// runtime failure.
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitDegenerate = 3;

struct DegenerateFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int default_threads() {
  if (const char* env = std::getenv("INSPIRE_THREADS")) {
    const int t = std::atoi(env);
    if (t >= 1) return t;
  }
  return 1;
}

void run_register(const std::string& ref_path, const std::string& flo_path,
                  const std::string& config_path, const std::string& out_dir,
                  int64_t seed_override, bool have_seed, int threads) {
  const inspire::FuzzyImage ref = inspire::read_volume(ref_path);
  const inspire::FuzzyImage flo = inspire::read_volume(flo_path);
  inspire::RegistrationConfig cfg = inspire::parse_config(config_path);
  if (have_seed) cfg.seed = static_cast<uint64_t>(seed_override);

  std::filesystem::create_directories(out_dir);

  inspire::RegistrationResult res = inspire::register_pair(flo, ref, cfg, threads);
  int64_t total_iters = 0;
  for (const inspire::LevelConfig& lc : cfg.levels) total_iters += lc.iterations;
  if (total_iters > 0 && res.degenerate_iterations == total_iters)
    throw DegenerateFailure("all iterations degenerate (no samples accepted)");
  if (res.degenerate_contrast_warning)
    std::cerr << "warning: degenerate image contrast during normalization\n";

  const std::filesystem::path dir(out_dir);
  inspire::write_field(res.pair.forward, dir / "forward.field");
  inspire::write_field(res.pair.backward, dir / "backward.field");

  // Resample the floating image onto the reference grid through the
  // reference-to-floating map.
  inspire::FuzzyImage warped(ref.domain);
  for (int64_t i = 0; i < ref.domain.spel_count(); ++i) {
    const inspire::Vec x = ref.domain.physical(ref.domain.coords(i));
    warped.membership[static_cast<size_t>(i)] =
        flo.sample_linear(res.pair.backward.transform(x), 0.0);
  }
  inspire::write_volume(warped, dir / "warped.vol");
  inspire::write_metrics_csv(dir / "metrics.csv", res.trace);
}

void run_warp(const std::string& in_path, const std::string& field_path,
              const std::string& out_path, bool nearest) {
  const inspire::FuzzyImage img = inspire::read_volume(in_path);
  const inspire::BSplineField field = inspire::read_field(field_path);
  const inspire::FuzzyImage out = inspire::warp_image(
      img, field,
      nearest ? inspire::Interpolation::kNearest : inspire::Interpolation::kLinear,
      inspire::default_warp_background(img));
  inspire::write_volume(out, out_path);
}

void run_synth(const std::string& in_path, const std::string& recipe_path, int64_t seed,
               const std::string& out_prefix, bool nearest) {
  const inspire::FuzzyImage img = inspire::read_volume(in_path);
  const inspire::DeformationRecipe recipe =
      inspire::parse_recipe(recipe_path, static_cast<uint64_t>(seed));
  inspire::DeformationChain chain;
  try {
    chain = inspire::generate_deformation(img.domain, recipe);
  } catch (const std::runtime_error& e) {
    throw DegenerateFailure(e.what());
  }
  const inspire::FuzzyImage warped = inspire::warp_image(
      img, chain,
      nearest ? inspire::Interpolation::kNearest : inspire::Interpolation::kLinear,
      inspire::default_warp_background(img));
  inspire::write_volume(warped, out_prefix + "_warped.vol");
  for (size_t i = 0; i < chain.fields.size(); ++i)
    inspire::write_field(chain.fields[i],
                         out_prefix + "_stage" + std::to_string(i) + ".field");
}

void run_eval(const std::string& ref_mask_path, const std::string& flo_mask_path,
              const std::string& field_path, const std::string& out_path) {
  const inspire::FuzzyImage ref_mask = inspire::read_volume(ref_mask_path);
  const inspire::FuzzyImage flo_mask = inspire::read_volume(flo_mask_path);
  const inspire::BSplineField field = inspire::read_field(field_path);
  const inspire::FuzzyImage warped =
      inspire::warp_image(flo_mask, field, inspire::Interpolation::kNearest);
  const double j =
      inspire::jaccard(inspire::alpha_cut(ref_mask, 0.5), inspire::alpha_cut(warped, 0.5));

  std::ostringstream line;
  line.precision(17);
  line << "jaccard=" << j << "\n";
  std::cout << line.str();
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path + " for writing");
    out << line.str();
  }
}

bool nearly(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// Small built-in oracle checks; the full suites live in the test binaries.
int run_selftest() {
  int failures = 0;
  auto check = [&](bool ok, const std::string& name) {
    std::cout << (ok ? "ok   " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  };

  {
    const auto w = inspire::bspline_basis(0.37);
    check(nearly(w[0] + w[1] + w[2] + w[3], 1.0, 1e-12), "bspline basis partition of unity");
  }
  {
    check(nearly(inspire::generalized_golden_ratio(1), (1.0 + std::sqrt(5.0)) / 2.0, 1e-12),
          "golden ratio root");
    inspire::VecI sizes(1);
    sizes[0] = 10;
    inspire::Vec start(1);
    const inspire::KroneckerSequence seq(sizes, start);
    check(seq.at(1)[0] == 6 && seq.at(2)[0] == 2, "kronecker sequence values");
  }
  {
    // Single object spel at the origin of a 9x9 crisp image; query 3 away.
    inspire::FuzzyImage img(
        inspire::GridDomain(inspire::VecI(9, 9), inspire::Vec(1.0, 1.0)));
    img.at(inspire::VecI(0, 0)) = 1.0;
    const auto tree = inspire::DistanceTree::build(img);
    const auto ctree = inspire::DistanceTree::build(img.complement());
    inspire::SearchParams params;
    params.d_max = 20.0;
    params.beta = 1.0;
    params.n_alpha = 8;
    const auto s = inspire::mc_distance_gradient({inspire::Vec(3.0, 0.0), 1.0}, tree, ctree,
                                                 params);
    check(s.inside && nearly(s.value, 3.0, 1e-9), "crisp point-to-set distance");
  }
  {
    inspire::TransformPair pair;
    pair.forward = inspire::BSplineField(inspire::VecI(2, 2), inspire::Vec(0.0, 0.0),
                                         inspire::Vec(10.0, 10.0));
    pair.backward = pair.forward;
    check(nearly(inspire::iic(pair, inspire::Vec(4.0, 5.0)), 0.0, 1e-15),
          "identity inverse inconsistency");
  }
  std::cout << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return failures == 0 ? 0 : kExitDegenerate;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetric deformable registration of fuzzy-set images"};
  app.require_subcommand(1);

  std::string ref_path, flo_path, config_path, out_dir;
  int64_t seed = 0;
  int threads = default_threads();
  auto* reg = app.add_subcommand("register", "Register a floating image onto a reference");
  reg->add_option("--ref", ref_path, "Reference volume header")->required();
  reg->add_option("--flo", flo_path, "Floating volume header")->required();
  reg->add_option("--config", config_path, "Registration config file")->required();
  reg->add_option("--out-dir", out_dir, "Output directory")->required();
  auto* seed_opt = reg->add_option("--seed", seed, "Override the config seed");
  reg->add_option("--threads", threads, "Worker threads (or INSPIRE_THREADS)");

  std::string in_path, field_path, out_path;
  bool nearest = false;
  auto* warp = app.add_subcommand("warp", "Apply a stored field to a volume");
  warp->add_option("--in", in_path, "Input volume header")->required();
  warp->add_option("--field", field_path, "Field header")->required();
  warp->add_option("--out", out_path, "Output volume header")->required();
  warp->add_flag("--nearest", nearest, "Nearest-neighbor interpolation");

  std::string synth_in, recipe_path, out_prefix;
  int64_t synth_seed = 0;
  bool synth_nearest = false;
  auto* synth = app.add_subcommand("synth", "Apply a random synthetic deformation");
  synth->add_option("--in", synth_in, "Input volume header")->required();
  synth->add_option("--recipe", recipe_path, "Deformation recipe file")->required();
  synth->add_option("--seed", synth_seed, "Deformation seed")->required();
  synth->add_option("--out-prefix", out_prefix, "Output path prefix")->required();
  synth->add_flag("--nearest", synth_nearest, "Nearest-neighbor interpolation");

  std::string ref_mask, flo_mask, eval_field, eval_out;
  auto* eval = app.add_subcommand("eval", "Score mask overlap under a recovered field");
  eval->add_option("--ref-mask", ref_mask, "Reference mask volume")->required();
  eval->add_option("--flo-mask", flo_mask, "Floating mask volume")->required();
  eval->add_option("--field", eval_field, "Reference-to-floating field")->required();
  eval->add_option("--out", eval_out, "Output text file");

  auto* selftest = app.add_subcommand("selftest", "Run built-in oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : kExitUsage;
  }

  try {
    if (reg->parsed()) {
      if (threads < 1) {
        std::cerr << "error: --threads must be >= 1\n";
        return kExitUsage;
      }
      run_register(ref_path, flo_path, config_path, out_dir, seed, seed_opt->count() > 0,
                   threads);
    } else if (warp->parsed()) {
      run_warp(in_path, field_path, out_path, nearest);
    } else if (synth->parsed()) {
      run_synth(synth_in, recipe_path, synth_seed, out_prefix, synth_nearest);
    } else if (eval->parsed()) {
      run_eval(ref_mask, flo_mask, eval_field, eval_out);
    } else if (selftest->parsed()) {
      return run_selftest();
    }
  } catch (const DegenerateFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const inspire::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
