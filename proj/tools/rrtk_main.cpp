#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rrtk/pipelines.hpp"
#include "rrtk/render.hpp"
#include "rrtk/volume_io.hpp"

namespace {

std::string default_out_root() {
  if (const char* env = std::getenv("RRTK_OUT"))
    return env;
  return ".";
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-rounding numerical uncertainty toolkit"};
  app.require_subcommand(1);

  // ---- sample ----------------------------------------------------------
  auto* sample = app.add_subcommand(
      "sample", "Run N seeded RR samples of a pipeline plus the IEEE "
                "reference");
  std::string pipeline = "cnn-register";
  rrtk::ExperimentConfig cfg;
  std::string outdir = default_out_root() + "/samples";
  bool volumetric = false;
  sample->add_option("--pipeline", pipeline,
                     "cnn-register | gd-register | cnn-segment | gd-segment")
      ->required();
  sample->add_option("--subject", cfg.subject_seed, "subject seed");
  sample->add_option("--atlas-seed", cfg.atlas_seed, "atlas/reference seed");
  sample->add_option("--weight-seed", cfg.weight_seed, "CNN weight seed");
  sample->add_option("-n,--samples", cfg.n, "number of RR samples");
  sample->add_option("-t,--precision", cfg.t, "virtual precision in bits");
  sample->add_option("--seed0", cfg.seed0, "base seed for RR streams");
  sample->add_option("--size", cfg.shape[2], "spatial edge length");
  sample->add_flag("--3d", volumetric, "volumetric (cubic) subjects");
  sample->add_option("--regions", cfg.n_regions, "synthetic region count");
  sample->add_flag("--only-inexact", cfg.only_inexact,
                   "perturb only inexact operations");
  sample->add_option("--warp-scale", cfg.warp_scale,
                     "CNN warp head scaling (voxels)");
  sample->add_option("--lambda", cfg.reg.lambda_smooth, "smoothness weight");
  sample->add_option("--step", cfg.reg.step_size, "GD initial step size");
  sample->add_option("--iterations", cfg.reg.iterations, "GD iteration cap");
  sample->add_option("--stop-tol", cfg.reg.stop_tol, "GD grad-norm tolerance");
  sample->add_option("--jobs", cfg.jobs, "concurrent sample runs");
  sample->add_option("-o,--out", outdir, "output directory");

  // ---- sigbits ---------------------------------------------------------
  auto* sigbits = app.add_subcommand(
      "sigbits", "Significant-bits map of a sample set");
  std::string sampledir, target = "image", metric_out;
  bool render = false;
  sigbits->add_option("--samples", sampledir, "sample directory")->required();
  sigbits->add_option("--target", target, "image | warp");
  sigbits->add_option("-o,--out", metric_out, "output directory")->required();
  sigbits->add_flag("--render", render, "also write a PPM slice");

  // ---- dice ------------------------------------------------------------
  auto* dicecmd = app.add_subcommand(
      "dice", "Min pairwise Dice per region across label samples");
  bool include_ieee = false;
  dicecmd->add_option("--samples", sampledir, "sample directory")->required();
  dicecmd->add_flag("--include-ieee", include_ieee,
                    "count the IEEE run as an ordinary sample");
  dicecmd->add_option("-o,--out", metric_out, "output directory")->required();

  // ---- entropy ---------------------------------------------------------
  auto* entropy = app.add_subcommand(
      "entropy", "Voxel-entropy map across label samples");
  entropy->add_option("--samples", sampledir, "sample directory")->required();
  entropy->add_flag("--include-ieee", include_ieee,
                    "count the IEEE run as an ordinary sample");
  entropy->add_option("-o,--out", metric_out, "output directory")->required();
  entropy->add_flag("--render", render, "also write a PPM slice");

  // ---- compare ---------------------------------------------------------
  auto* compare = app.add_subcommand(
      "compare", "Paired t-test with Bonferroni correction between two "
                 "metric CSVs");
  std::string csv_a, csv_b, report = "compare.csv";
  double alpha = 0.001;
  int m_tests = 0;
  compare->add_option("--a", csv_a, "first metric CSV")->required();
  compare->add_option("--b", csv_b, "second metric CSV")->required();
  compare->add_option("--alpha", alpha, "significance threshold");
  compare->add_option("--m-tests", m_tests,
                      "Bonferroni test count (0 = number of targets)");
  compare->add_option("-o,--out", report, "report CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sample->parsed()) {
      cfg.pipeline = rrtk::pipeline_from_name(pipeline);
      cfg.shape[1] = cfg.shape[2];
      cfg.shape[0] = volumetric ? cfg.shape[2] : 1;
      rrtk::run_sample_command(cfg, outdir);
      std::cout << "wrote " << outdir << "\n";
    } else if (sigbits->parsed()) {
      const double mean = rrtk::sigbits_command(sampledir, target, metric_out);
      std::cout << "mean significant bits (" << target << "): " << mean
                << "\n";
      if (render) {
        const rrtk::LoadedVolume v =
            rrtk::read_volume(metric_out + "/sigbits_" + target);
        rrtk::write_slice_ppm(v.values, v.header.shape, v.header.shape[0] / 2,
                              0.0, 53.0,
                              metric_out + "/sigbits_" + target + ".ppm");
      }
    } else if (dicecmd->parsed()) {
      for (const auto& [region, d] :
           rrtk::dice_command(sampledir, include_ieee, metric_out))
        std::cout << region << ": " << d << "\n";
    } else if (entropy->parsed()) {
      const double mean =
          rrtk::entropy_command(sampledir, include_ieee, metric_out);
      std::cout << "mean entropy: " << mean << "\n";
      if (render) {
        const rrtk::LoadedVolume v = rrtk::read_volume(metric_out + "/entropy");
        rrtk::write_slice_ppm(v.values, v.header.shape, v.header.shape[0] / 2,
                              0.0, std::log(5.0),
                              metric_out + "/entropy.ppm");
      }
    } else if (compare->parsed()) {
      const auto rows =
          rrtk::compare_command(csv_a, csv_b, alpha, m_tests, report);
      for (const auto& r : rows) {
        std::cout << r.target << ": ";
        if (r.degenerate)
          std::cout << "degenerate variance (no test)\n";
        else
          std::cout << "mean_diff=" << r.mean_diff << " t=" << r.t
                    << " p=" << r.p << " p_corr=" << r.p_corrected
                    << (r.flagged ? " *" : "") << "\n";
      }
    }
  } catch (const rrtk::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const rrtk::PipelineError& e) {
    std::cerr << "pipeline failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
