#include "rrtk/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "rrtk/csv.hpp"
#include "rrtk/seg_metrics.hpp"
#include "rrtk/significance.hpp"
#include "rrtk/stats.hpp"
#include "rrtk/volume_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rrtk {

std::string pipeline_name(Pipeline p) {
  switch (p) {
  case Pipeline::CnnRegister: return "cnn-register";
  case Pipeline::GdRegister: return "gd-register";
  case Pipeline::CnnSegment: return "cnn-segment";
  case Pipeline::GdSegment: return "gd-segment";
  }
  return "?";
}

Pipeline pipeline_from_name(const std::string& name) {
  if (name == "cnn-register") return Pipeline::CnnRegister;
  if (name == "gd-register") return Pipeline::GdRegister;
  if (name == "cnn-segment") return Pipeline::CnnSegment;
  if (name == "gd-segment") return Pipeline::GdSegment;
  throw ValidationError("unknown pipeline: " + name);
}

void ExperimentConfig::validate() const {
  if (n < 2)
    throw ValidationError("need n >= 2 RR samples");
  VirtualPrecision check(t); // range check
  (void)check;
  if (jobs < 1)
    throw ValidationError("jobs must be >= 1");
  reg.validate();
}

namespace {

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["pipeline"] = pipeline_name(cfg.pipeline);
  j["shape"] = cfg.shape;
  j["n_regions"] = cfg.n_regions;
  j["subject_seed"] = cfg.subject_seed;
  j["atlas_seed"] = cfg.atlas_seed;
  j["weight_seed"] = cfg.weight_seed;
  j["n"] = cfg.n;
  j["t"] = cfg.t;
  j["seed0"] = cfg.seed0;
  j["only_inexact"] = cfg.only_inexact;
  j["warp_scale"] = cfg.warp_scale;
  j["reg"] = {{"lambda_smooth", cfg.reg.lambda_smooth},
              {"step_size", cfg.reg.step_size},
              {"iterations", cfg.reg.iterations},
              {"stop_tol", cfg.reg.stop_tol}};
  return j;
}

} // namespace

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string s = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ull; // FNV-1a
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t sample_seed(std::uint64_t seed0, int index) {
  return splitmix64(seed0 ^ splitmix64(static_cast<std::uint64_t>(index) + 1));
}

namespace {

UNetSpec register_spec(bool volumetric) {
  UNetSpec spec;
  spec.in_channels = 2; // moving, fixed
  spec.out_channels = volumetric ? 3 : 2;
  return spec;
}

UNetSpec segment_spec(const ExperimentConfig& cfg) {
  UNetSpec spec;
  spec.in_channels = 1;
  spec.out_channels = cfg.n_regions;
  return spec;
}

LabelVolume warp_atlas_labels(const LabelVolume& atlas, const Tensor& warp,
                              RRContext& ctx) {
  const std::size_t wc = warp.shape[0], d = warp.shape[1], h = warp.shape[2],
                    w = warp.shape[3];
  LabelVolume out;
  out.shape = {d, h, w};
  out.labels.resize(d * h * w);
  out.region_table = atlas.region_table;
  const auto nearest = [](double p, std::size_t dim) {
    const double hi = static_cast<double>(dim - 1);
    double pc = p;
    if (!(pc >= 0.0))
      pc = 0.0;
    if (pc > hi)
      pc = hi;
    return static_cast<std::size_t>(std::lround(pc));
  };
  for (std::size_t z = 0; z < d; ++z)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t off = (z * h + y) * w + x;
        const double uz = wc == 3 ? warp.data[off] : 0.0;
        const double uy = warp.data[(wc - 2) * d * h * w + off];
        const double ux = warp.data[(wc - 1) * d * h * w + off];
        const std::size_t sz =
            wc == 3 ? nearest(ctx.add(static_cast<double>(z), uz), d) : 0;
        const std::size_t sy = nearest(ctx.add(static_cast<double>(y), uy), h);
        const std::size_t sx = nearest(ctx.add(static_cast<double>(x), ux), w);
        out.labels[off] = atlas.at(sz, sy, sx);
      }
  return out;
}

} // namespace

SampleOutputs run_pipeline_once(const ExperimentConfig& cfg, Mode mode,
                                std::uint64_t seed) {
  cfg.validate();
  const auto [subject, subject_truth] =
      synth_subject(cfg.subject_seed, cfg.shape, cfg.n_regions);
  const bool volumetric = cfg.shape[0] > 1;
  RRContext ctx(VirtualPrecision(cfg.t), mode, seed, cfg.only_inexact);

  SampleOutputs out;
  switch (cfg.pipeline) {
  case Pipeline::CnnRegister: {
    const auto [atlas, atlas_truth] =
        synth_subject(cfg.atlas_seed, cfg.shape, cfg.n_regions);
    (void)atlas_truth;
    const UNetSpec spec = register_spec(volumetric);
    const WeightStore weights =
        generate_weights(spec, volumetric, cfg.weight_seed);
    const Tensor input = concat_channels(subject, atlas);
    Tensor head = unet_forward(spec, weights.tensors, input, ctx);
    for (double& v : head.data)
      v = ctx.mul(cfg.warp_scale, v);
    out.image = resample(subject, head, ctx);
    out.warp = std::move(head);
    break;
  }
  case Pipeline::GdRegister: {
    const auto [atlas, atlas_truth] =
        synth_subject(cfg.atlas_seed, cfg.shape, cfg.n_regions);
    (void)atlas_truth;
    auto [warp, trace] = register_images(subject, atlas, cfg.reg, ctx);
    out.image = resample(subject, warp, ctx);
    out.warp = std::move(warp);
    out.trace = std::move(trace);
    break;
  }
  case Pipeline::CnnSegment: {
    const UNetSpec spec = segment_spec(cfg);
    const WeightStore weights =
        generate_weights(spec, volumetric, cfg.weight_seed);
    const Tensor logits = unet_forward(spec, weights.tensors, subject, ctx);
    const Tensor probs = activation(logits, ActKind::Softmax, ctx);
    out.labels = argmax_labels(probs);
    out.labels.region_table = subject_truth.region_table;
    break;
  }
  case Pipeline::GdSegment: {
    // Atlas-to-subject registration, then warped atlas labels: the toy
    // analog of registration-driven whole-brain segmentation.
    const auto [atlas, atlas_truth] =
        synth_subject(cfg.atlas_seed, cfg.shape, cfg.n_regions);
    auto [warp, trace] = register_images(atlas, subject, cfg.reg, ctx);
    out.labels = warp_atlas_labels(atlas_truth, warp, ctx);
    out.warp = std::move(warp);
    out.trace = std::move(trace);
    break;
  }
  }
  return out;
}

namespace {

bool is_register(Pipeline p) {
  return p == Pipeline::CnnRegister || p == Pipeline::GdRegister;
}

void write_trace_csv(const EnergyTrace& trace, const std::string& path) {
  std::string text = "iteration,energy,grad_norm\n";
  for (std::size_t i = 0; i < trace.energy.size(); ++i)
    text += std::to_string(i) + "," + format_double(trace.energy[i]) + "," +
            format_double(trace.grad_norm[i]) + "\n";
  write_text_atomic(path, text);
}

// Writes one sample's outputs; returns the files it produced.
std::vector<std::string> write_sample(const ExperimentConfig& cfg,
                                      const SampleOutputs& s,
                                      const std::string& dir,
                                      const std::string& name) {
  std::vector<std::string> files;
  if (is_register(cfg.pipeline)) {
    VolumeHeader wh;
    wh.shape = cfg.shape;
    wh.channels = s.warp.shape[0];
    wh.kind = Kind::Warp;
    write_scalar_volume(wh, s.warp.data, dir + "/" + name + "_warp");
    files.push_back(name + "_warp");

    VolumeHeader ih;
    ih.shape = cfg.shape;
    ih.kind = Kind::Image;
    write_scalar_volume(ih, s.image.data, dir + "/" + name + "_image");
    files.push_back(name + "_image");
  } else {
    write_label_volume(s.labels, {1.0, 1.0, 1.0}, dir + "/" + name +
                                                      "_labels");
    files.push_back(name + "_labels");
  }
  if (cfg.pipeline == Pipeline::GdRegister ||
      cfg.pipeline == Pipeline::GdSegment) {
    write_trace_csv(s.trace, dir + "/" + name + "_trace.csv");
    files.push_back(name + "_trace.csv");
  }
  return files;
}

} // namespace

void run_sample_command(const ExperimentConfig& cfg,
                        const std::string& outdir) {
  cfg.validate();
  fs::create_directories(outdir);

  // IEEE reference first: if it fails, the subject is excluded and the
  // whole command fails.
  const SampleOutputs ieee = run_pipeline_once(cfg, Mode::IEEE, cfg.seed0);

  struct Entry {
    std::string name;
    std::string mode;
    std::uint64_t seed;
    std::vector<std::string> files;
    std::string error;
  };
  std::vector<Entry> entries(static_cast<std::size_t>(cfg.n) + 1);
  entries[0] = {"ieee", "ieee", cfg.seed0,
                write_sample(cfg, ieee, outdir, "ieee"), ""};

  std::mutex fail_mutex;
  const auto run_range = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "rr%03d", i);
      Entry e{buf, "rr", sample_seed(cfg.seed0, i), {}, ""};
      try {
        const SampleOutputs s =
            run_pipeline_once(cfg, Mode::RandomRounding, e.seed);
        e.files = write_sample(cfg, s, outdir, e.name);
      } catch (const std::exception& ex) {
        std::lock_guard<std::mutex> lock(fail_mutex);
        e.error = ex.what();
      }
      entries[static_cast<std::size_t>(i) + 1] = std::move(e);
    }
  };

  const int jobs = std::min(cfg.jobs, cfg.n);
  if (jobs <= 1) {
    run_range(0, cfg.n);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (cfg.n + jobs - 1) / jobs;
    for (int j = 0; j < jobs; ++j) {
      const int b = j * chunk;
      const int e = std::min(cfg.n, b + chunk);
      if (b < e)
        pool.emplace_back(run_range, b, e);
    }
    for (auto& th : pool)
      th.join();
  }

  json manifest = config_to_json(cfg);
  manifest["config_hash"] = config_hash(cfg);
  json samples = json::array();
  for (const auto& e : entries) {
    json s;
    s["name"] = e.name;
    s["mode"] = e.mode;
    s["seed"] = e.seed;
    s["files"] = e.files;
    s["status"] = e.error.empty() ? "ok" : "failed";
    if (!e.error.empty())
      s["error"] = e.error;
    samples.push_back(s);
  }
  manifest["samples"] = samples;
  write_text_atomic(outdir + "/manifest.json", manifest.dump(2) + "\n");
}

namespace {

json read_manifest(const std::string& sampledir) {
  std::ifstream f(sampledir + "/manifest.json");
  if (!f)
    throw ValidationError("missing manifest: " + sampledir + "/manifest.json");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  return j;
}

std::vector<std::string> sample_names(const json& manifest,
                                      const std::string& mode) {
  std::vector<std::string> names;
  for (const auto& s : manifest.at("samples")) {
    if (s.at("mode").get<std::string>() != mode)
      continue;
    if (s.at("status").get<std::string>() != "ok")
      continue;
    names.push_back(s.at("name").get<std::string>());
  }
  return names;
}

std::string subject_key(const json& manifest) {
  return "subject-" + std::to_string(
                          manifest.at("subject_seed").get<std::uint64_t>());
}

void append_csv_rows(const std::string& path,
                     const std::vector<CsvRow>& rows) {
  const bool fresh = !fs::exists(path);
  std::ofstream f(path, std::ios::app);
  if (!f)
    throw ValidationError("cannot open CSV for append: " + path);
  if (fresh)
    f << "subject,target,value\n";
  for (const auto& r : rows)
    f << csv_join(r) << "\n";
}

} // namespace

double sigbits_command(const std::string& sampledir, const std::string& target,
                       const std::string& outdir) {
  if (target != "image" && target != "warp")
    throw ValidationError("sigbits target must be image or warp");
  const json manifest = read_manifest(sampledir);
  const auto ieee_names = sample_names(manifest, "ieee");
  if (ieee_names.empty())
    throw ValidationError("missing IEEE reference in " + sampledir);
  const auto rr_names = sample_names(manifest, "rr");
  if (rr_names.size() < 2)
    throw ValidationError("need at least 2 RR samples in " + sampledir);

  const std::string suffix = "_" + target;
  const LoadedVolume ref =
      read_volume(sampledir + "/" + ieee_names[0] + suffix);
  std::vector<LoadedVolume> rr;
  for (const auto& name : rr_names) {
    rr.push_back(read_volume(sampledir + "/" + name + suffix));
    if (rr.back().header.shape != ref.header.shape ||
        rr.back().header.channels != ref.header.channels)
      throw ValidationError("sample shape mismatch in " + sampledir);
  }

  const int t = manifest.at("t").get<int>();
  const int m = t == 24 ? 24 : 53;
  const std::size_t spatial =
      ref.header.shape[0] * ref.header.shape[1] * ref.header.shape[2];
  const std::size_t channels = ref.header.channels;

  // Per-component estimates, then the component average per voxel.
  std::vector<double> avg(spatial, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    SampleSet set;
    set.m = m;
    set.reference.assign(ref.values.begin() + c * spatial,
                         ref.values.begin() + (c + 1) * spatial);
    for (const auto& vol : rr)
      set.samples.emplace_back(vol.values.begin() + c * spatial,
                               vol.values.begin() + (c + 1) * spatial);
    const std::vector<int> bits = significant_bits(set);
    for (std::size_t v = 0; v < spatial; ++v)
      avg[v] += static_cast<double>(bits[v]);
  }
  for (double& v : avg)
    v /= static_cast<double>(channels);

  fs::create_directories(outdir);
  VolumeHeader h;
  h.shape = ref.header.shape;
  h.kind = Kind::Sigbits;
  write_scalar_volume(h, avg, outdir + "/sigbits_" + target);

  const double mean = mean_sigbits(avg);
  append_csv_rows(outdir + "/sigbits.csv",
                  {{subject_key(manifest), target, format_double(mean)}});
  return mean;
}

namespace {

std::vector<LabelVolume> load_label_samples(const std::string& sampledir,
                                            const json& manifest,
                                            bool include_ieee) {
  std::vector<std::string> names = sample_names(manifest, "rr");
  if (include_ieee) {
    const auto ieee = sample_names(manifest, "ieee");
    names.insert(names.begin(), ieee.begin(), ieee.end());
  }
  if (names.size() < 2)
    throw ValidationError("need at least 2 label samples in " + sampledir);
  std::vector<LabelVolume> vols;
  for (const auto& name : names) {
    LoadedVolume v = read_volume(sampledir + "/" + name + "_labels");
    if (v.header.kind != Kind::Labels)
      throw ValidationError(name + "_labels is not a label volume");
    if (!vols.empty() &&
        vols.front().region_table != v.labels.region_table)
      throw ValidationError("region-table mismatch across samples in " +
                            sampledir);
    vols.push_back(std::move(v.labels));
  }
  return vols;
}

} // namespace

std::vector<std::pair<std::string, double>>
dice_command(const std::string& sampledir, bool include_ieee,
             const std::string& outdir) {
  const json manifest = read_manifest(sampledir);
  const auto vols = load_label_samples(sampledir, manifest, include_ieee);

  fs::create_directories(outdir);
  std::vector<std::pair<std::string, double>> result;
  std::vector<CsvRow> rows;
  for (const auto& [id, name] : vols.front().region_table) {
    const double d = min_pairwise_dice(vols, id);
    result.emplace_back(name, d);
    rows.push_back({subject_key(manifest), name, format_double(d)});
  }
  append_csv_rows(outdir + "/dice.csv", rows);
  return result;
}

double entropy_command(const std::string& sampledir, bool include_ieee,
                       const std::string& outdir) {
  const json manifest = read_manifest(sampledir);
  const auto vols = load_label_samples(sampledir, manifest, include_ieee);

  std::vector<std::uint16_t> regions;
  for (const auto& [id, name] : vols.front().region_table)
    regions.push_back(id);
  const std::vector<double> map = entropy_map(vols, regions);

  fs::create_directories(outdir);
  VolumeHeader h;
  h.shape = vols.front().shape;
  h.kind = Kind::Entropy;
  write_scalar_volume(h, map, outdir + "/entropy");

  double mean = 0.0;
  for (const double v : map)
    mean += v;
  mean /= static_cast<double>(map.size());
  append_csv_rows(outdir + "/entropy.csv",
                  {{subject_key(manifest), "entropy", format_double(mean)}});
  return mean;
}

namespace {

// subject -> value maps per target, from a (subject,target,value) CSV.
std::map<std::string, std::map<std::string, double>>
load_metric_csv(const std::string& path) {
  std::map<std::string, std::map<std::string, double>> by_target;
  const auto rows = read_csv(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 0 && !rows[i].empty() && rows[i][0] == "subject")
      continue; // header
    if (rows[i].size() != 3)
      throw ValidationError("bad CSV row in " + path);
    by_target[rows[i][1]][rows[i][0]] = std::stod(rows[i][2]);
  }
  return by_target;
}

} // namespace

std::vector<CompareRow> compare_command(const std::string& csv_a,
                                        const std::string& csv_b, double alpha,
                                        int m_tests,
                                        const std::string& out_path) {
  const auto a = load_metric_csv(csv_a);
  const auto b = load_metric_csv(csv_b);

  std::set<std::string> targets;
  for (const auto& [t, _] : a)
    targets.insert(t);
  for (const auto& [t, _] : b)
    targets.insert(t);
  const int m = m_tests > 0 ? m_tests : static_cast<int>(targets.size());

  std::vector<CompareRow> rows;
  for (const auto& target : targets) {
    const auto ia = a.find(target);
    const auto ib = b.find(target);
    if (ia == a.end() || ib == b.end())
      throw ValidationError("target " + target + " missing from one input");

    PairedSamples pairs;
    std::vector<std::string> unmatched;
    for (const auto& [subject, value] : ia->second) {
      const auto jt = ib->second.find(subject);
      if (jt == ib->second.end()) {
        unmatched.push_back(subject);
        continue;
      }
      pairs.a.push_back(value);
      pairs.b.push_back(jt->second);
    }
    for (const auto& [subject, value] : ib->second)
      if (!ia->second.count(subject))
        unmatched.push_back(subject);
    if (!unmatched.empty()) {
      std::string list;
      for (const auto& s : unmatched)
        list += (list.empty() ? "" : ", ") + s;
      throw ValidationError("unmatched subject keys for target " + target +
                            ": " + list);
    }

    CompareRow row;
    row.target = target;
    for (std::size_t i = 0; i < pairs.a.size(); ++i)
      row.mean_diff += pairs.a[i] - pairs.b[i];
    row.mean_diff /= static_cast<double>(pairs.a.size());
    try {
      const TTestResult r = paired_t_test(pairs);
      row.t = r.t;
      row.p = r.p_value;
      row.p_corrected = bonferroni({r.p_value}, m)[0];
      row.flagged = row.p_corrected < alpha;
    } catch (const ValidationError&) {
      row.degenerate = true;
    }
    rows.push_back(row);
  }

  std::string text =
      "target,mean_diff,t,p,p_corrected,flagged,degenerate\n";
  for (const auto& r : rows)
    text += r.target + "," + format_double(r.mean_diff) + "," +
            format_double(r.t) + "," + format_double(r.p) + "," +
            format_double(r.p_corrected) + "," + (r.flagged ? "1" : "0") +
            "," + (r.degenerate ? "1" : "0") + "\n";
  write_text_atomic(out_path, text);
  return rows;
}

} // namespace rrtk
