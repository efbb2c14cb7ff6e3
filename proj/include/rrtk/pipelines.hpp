#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rrtk/mca.hpp"
#include "rrtk/nn.hpp"
#include "rrtk/optim.hpp"
#include "rrtk/tensor.hpp"
#include "rrtk/volume.hpp"

namespace rrtk {

// cnn-register: toy U-Net -> warp field -> resampled image.
// gd-register:  gradient-descent registration -> warp field -> image.
// cnn-segment:  toy U-Net -> softmax -> per-voxel labels.
// gd-segment:   gradient-descent atlas registration -> warped atlas labels.
enum class Pipeline { CnnRegister, GdRegister, CnnSegment, GdSegment };

std::string pipeline_name(Pipeline p);
Pipeline pipeline_from_name(const std::string& name);

struct ExperimentConfig {
  Pipeline pipeline = Pipeline::CnnRegister;
  std::array<std::size_t, 3> shape{1, 32, 32}; // D, H, W
  std::size_t n_regions = 8;
  std::uint64_t subject_seed = 1;
  std::uint64_t atlas_seed = 1000; // fixed/reference image
  std::uint64_t weight_seed = 7;
  int n = 10; // RR samples; an IEEE reference always runs as well
  int t = 53;
  std::uint64_t seed0 = 0;
  bool only_inexact = false;
  double warp_scale = 2.0; // CNN head displacement scaling, in voxels
  RegistrationConfig reg;
  int jobs = 1;

  void validate() const;
};

std::uint64_t config_hash(const ExperimentConfig& cfg);

// Per-sample RR seed, a pure function of (seed0, index).
std::uint64_t sample_seed(std::uint64_t seed0, int index);

struct SampleOutputs {
  Tensor warp;        // register pipelines
  Tensor image;       // register pipelines (resampled moving image)
  LabelVolume labels; // segment pipelines
  EnergyTrace trace;  // gd pipelines
};

SampleOutputs run_pipeline_once(const ExperimentConfig& cfg, Mode mode,
                                std::uint64_t seed);

// Runs n RR samples plus the IEEE reference and writes sample volumes and a
// manifest under outdir. RR sample failures are recorded in the manifest;
// an IEEE failure propagates as PipelineError.
void run_sample_command(const ExperimentConfig& cfg,
                        const std::string& outdir);

// Significant-bits map of `target` ("image" or "warp") across the RR
// samples against the IEEE reference; writes the map and appends a CSV row
// (subject, target, mean). Warp maps are averaged across components.
// Returns the mean number of significant bits.
double sigbits_command(const std::string& sampledir, const std::string& target,
                       const std::string& outdir);

// Min pairwise Dice per region across samples; writes CSV rows
// (subject, region-name, min_dice).
std::vector<std::pair<std::string, double>>
dice_command(const std::string& sampledir, bool include_ieee,
             const std::string& outdir);

// Voxel entropy map across samples; writes the map plus one CSV row.
// Returns the mean entropy.
double entropy_command(const std::string& sampledir, bool include_ieee,
                       const std::string& outdir);

struct CompareRow {
  std::string target;
  double mean_diff = 0.0; // mean(a - b)
  double t = 0.0;
  double p = 1.0;
  double p_corrected = 1.0;
  bool flagged = false;
  bool degenerate = false;
};

// Paired t-test per target between two metric CSVs (schema
// subject,target,value), Bonferroni over m_tests (0 = number of targets).
std::vector<CompareRow> compare_command(const std::string& csv_a,
                                        const std::string& csv_b, double alpha,
                                        int m_tests,
                                        const std::string& out_path);

} // namespace rrtk
