// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#include "tlc/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "json.hpp"

#include "tlc/analysis.hpp"
#include "tlc/enhanced.hpp"
#include "tlc/flowgen.hpp"
#include "tlc/io.hpp"
#include "tlc/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tlc::cli {

namespace {

// One process per output directory.
class DirLock {
 public:
  explicit DirLock(const std::string& dir) : path_(fs::path(dir) / ".lock") {
    fs::create_directories(dir);
    if (fs::exists(path_))
      throw ConfigError("output directory is locked by another run: " + path_.string());
    std::ofstream f(path_);
    f << "lock\n";
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

std::string join(const std::string& a, const std::string& b) {
  return (fs::path(a) / b).string();
}

void write_manifest(const std::string& dir, const std::string& stage,
                    const config::RunConfig& cfg,
                    const std::map<std::string, std::string>& inputs,
                    const std::vector<std::string>& output_files) {
  json m;
  m["schema_version"] = 1;
  m["stage"] = stage;
  m["config_hash"] = cfg.config_hash;
  m["seed"] = cfg.seed;
  m["inputs"] = inputs;
  json outs;
  for (const auto& f : output_files) outs[f] = hex64(io::file_checksum(join(dir, f)));
  m["outputs"] = std::move(outs);
  io::atomic_write(join(dir, stage + "_manifest.json"), m.dump(1));
}

std::vector<std::string> list_trajectory_files(const std::string& data_dir) {
  std::vector<std::string> files;
  if (!fs::exists(data_dir)) throw ConfigError("data directory missing: " + data_dir);
  for (const auto& e : fs::directory_iterator(data_dir)) {
    if (e.path().extension() == ".trj") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no .trj files under " + data_dir);
  return files;
}

std::vector<dynamics::Trajectory> load_trajectories(const std::string& data_dir) {
  std::vector<dynamics::Trajectory> trajs;
  for (const auto& f : list_trajectory_files(data_dir)) trajs.push_back(dynamics::read_trajectory(f));
  return trajs;
}

cvmodels::Featurizer featurizer_for(const config::RunConfig& cfg) {
  return cvmodels::Featurizer::for_system(cfg.system, cfg.model.input_mode);
}

std::string model_checkpoint_path(const config::RunConfig& cfg) {
  return join(join(cfg.out_dir, "models"), cfg.model.kind + ".json");
}

cvmodels::CvFunction resolve_cv(const config::RunConfig& cfg, const std::string& which,
                                cvmodels::CvEncoder* loaded) {
  if (which == "ground_truth") return cvmodels::basin_coordinate_cv(cfg.system);
  *loaded = cvmodels::load_encoder(model_checkpoint_path(cfg));
  // a tlc encoder must still be the one its flow was trained with
  const std::string flow_path = join(join(cfg.out_dir, "models"), "tlc_flow.json");
  if (cfg.model.kind == "tlc" && fs::exists(flow_path)) {
    std::uint64_t paired = 0;
    flowgen::load_flow(flow_path, &paired);
    if (paired != flowgen::encoder_checksum(*loaded))
      throw ConfigError("checkpoint mismatch: " + model_checkpoint_path(cfg) +
                        " is not the encoder paired with " + flow_path);
  }
  return cvmodels::cv_function(*loaded);
}

// Thermalized basin-A pool for SMD starts: unbiased run, second half kept.
std::vector<Configuration> smd_initial_pool(const config::RunConfig& cfg) {
  dynamics::LangevinParams params = cfg.langevin;
  params.seed = stage_seed(cfg.seed, 6);
  const Configuration init = systems::basin_minimum(cfg.system, systems::BasinLabel::A);
  const auto traj = dynamics::run(cfg.system, params, init, 4000, 10);
  std::vector<Configuration> pool(traj.frames.begin() + traj.frames.size() / 2,
                                  traj.frames.end());
  return pool;
}

struct SweepEntry {
  double k = 0.0;
  analysis::PathMetrics metrics;
  int n_diverged = 0;
};

json sweep_entry_json(const SweepEntry& e) {
  json j;
  j["k"] = e.k;
  j["thp_percent"] = e.metrics.thp_percent;
  j["rmsd_mean"] = e.metrics.rmsd_mean;
  if (e.metrics.ets_mean) {
    j["ets_mean"] = *e.metrics.ets_mean;
    j["ets_std"] = *e.metrics.ets_std;
  } else {
    j["ets_mean"] = nullptr;
    j["ets_std"] = nullptr;
  }
  j["n_diverged"] = e.n_diverged;
  return j;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::string cell;
  std::vector<std::string> row;
  for (char c : text) {
    if (c == ',') {
      row.push_back(cell);
      cell.clear();
    } else if (c == '\n') {
      row.push_back(cell);
      cell.clear();
      rows.push_back(row);
      row.clear();
    } else {
      cell += c;
    }
  }
  if (!cell.empty() || !row.empty()) {
    row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

template <typename T>
void put_bytes(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take_bytes(const std::string& in, std::size_t& off) {
  if (off + sizeof(T) > in.size()) throw NumericsError("pair file truncated");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t base, std::uint64_t stage, std::uint64_t index) {
  return enhanced::replica_seed(enhanced::replica_seed(base, static_cast<int>(stage)),
                                static_cast<int>(index));
}

void write_pairs(const std::string& path, const dynamics::PairDataset& pairs, int dim) {
  std::string out;
  out.append("TLCPRS1", 7);
  put_bytes<std::uint32_t>(out, 1u);
  put_bytes<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  put_bytes<std::uint64_t>(out, pairs.x_t.size());
  put_bytes<std::uint64_t>(out, static_cast<std::uint64_t>(pairs.tau_steps));
  for (std::size_t i = 0; i < pairs.x_t.size(); ++i) {
    out.append(reinterpret_cast<const char*>(pairs.x_t[i].data()), sizeof(double) * dim);
    out.append(reinterpret_cast<const char*>(pairs.x_tau[i].data()), sizeof(double) * dim);
  }
  io::atomic_write(path, out);
}

dynamics::PairDataset read_pairs(const std::string& path, int* dim_out) {
  const std::string in = io::read_bytes(path);
  if (in.size() < 7 || in.compare(0, 7, "TLCPRS1") != 0)
    throw NumericsError("not a pair file: " + path);
  std::size_t off = 7;
  if (take_bytes<std::uint32_t>(in, off) != 1) throw NumericsError("unsupported pair version");
  const int dim = static_cast<int>(take_bytes<std::uint32_t>(in, off));
  const auto n = take_bytes<std::uint64_t>(in, off);
  dynamics::PairDataset ds;
  ds.tau_steps = static_cast<std::int64_t>(take_bytes<std::uint64_t>(in, off));
  ds.x_t.resize(n, Configuration(dim));
  ds.x_tau.resize(n, Configuration(dim));
  for (std::uint64_t i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) ds.x_t[i][j] = take_bytes<double>(in, off);
    for (int j = 0; j < dim; ++j) ds.x_tau[i][j] = take_bytes<double>(in, off);
  }
  if (dim_out != nullptr) *dim_out = dim;
  return ds;
}

void cmd_simulate(const config::RunConfig& cfg) {
  DirLock lock(cfg.out_dir);
  const std::string data_dir = join(cfg.out_dir, "data");
  fs::create_directories(data_dir);

  std::vector<std::string> outputs;
  int traj_index = 0;
  for (const auto basin : {systems::BasinLabel::A, systems::BasinLabel::B}) {
    const Configuration init = systems::basin_minimum(cfg.system, basin);
    for (int i = 0; i < cfg.data.n_trajs_per_basin; ++i, ++traj_index) {
      dynamics::LangevinParams params = cfg.langevin;
      params.seed = stage_seed(cfg.seed, 1, static_cast<std::uint64_t>(traj_index));
      const auto traj = dynamics::run(cfg.system, params, init, cfg.data.n_steps,
                                      cfg.data.record_stride);
      const std::string name = std::string("traj_") +
                               (basin == systems::BasinLabel::A ? "A" : "B") + "_" +
                               std::to_string(i) + ".trj";
      dynamics::write_trajectory(join(data_dir, name), traj);
      outputs.push_back(name);
    }
  }
  write_manifest(data_dir, "simulate", cfg, {}, outputs);
  std::cout << "simulate: wrote " << outputs.size() << " trajectories to " << data_dir << "\n";
}

void cmd_make_pairs(const config::RunConfig& cfg) {
  DirLock lock(cfg.out_dir);
  const std::string data_dir = join(cfg.out_dir, "data");
  const auto trajs = load_trajectories(data_dir);

  Rng rng(stage_seed(cfg.seed, 2));
  const auto pairs =
      dynamics::extract_pairs(trajs, cfg.system, cfg.data.tau_steps,
                              cfg.data.exclude_transitions,
                              static_cast<std::size_t>(cfg.data.max_pairs), rng);
  write_pairs(join(data_dir, "pairs.bin"), pairs, cfg.system.dim());

  std::map<std::string, std::string> inputs;
  for (const auto& f : list_trajectory_files(data_dir))
    inputs[fs::path(f).filename().string()] = hex64(io::file_checksum(f));
  write_manifest(data_dir, "pairs", cfg, inputs, {"pairs.bin"});
  std::cout << "make-pairs: " << pairs.x_t.size() << " pairs (tau_steps=" << pairs.tau_steps
            << ")\n";
}

namespace {

void split_by_label(const config::RunConfig& cfg, const std::vector<Configuration>& configs,
                    std::vector<systems::BasinLabel>& labels,
                    std::vector<Configuration>& basin_a) {
  labels.clear();
  basin_a.clear();
  for (const auto& c : configs) {
    labels.push_back(systems::basin_of(cfg.system, c));
    if (labels.back() == systems::BasinLabel::A) basin_a.push_back(c);
  }
}

// Labeled frame sample for the supervised baselines.
std::vector<Configuration> labeled_frames(const config::RunConfig& cfg,
                                          const std::string& data_dir) {
  const auto trajs = load_trajectories(data_dir);
  std::vector<Configuration> configs;
  for (const auto& tr : trajs)
    for (const auto& f : tr.frames) configs.push_back(f);
  const std::size_t cap = static_cast<std::size_t>(cfg.data.max_pairs);
  if (cap > 0 && configs.size() > cap) {
    // uniform deterministic subsample
    std::vector<Configuration> kept;
    kept.reserve(cap);
    for (std::size_t i = 0; i < cap; ++i)
      kept.push_back(configs[i * configs.size() / cap]);
    configs = std::move(kept);
  }
  return configs;
}

void write_loss_csv(const std::string& path, const std::vector<double>& losses) {
  io::Csv csv;
  csv.header({"iter", "loss"});
  for (std::size_t i = 0; i < losses.size(); ++i)
    csv.row({std::to_string(i), io::fmt_double(losses[i])});
  io::atomic_write(path, csv.body);
}

}  // namespace

void cmd_train(const config::RunConfig& cfg) {
  DirLock lock(cfg.out_dir);
  const std::string data_dir = join(cfg.out_dir, "data");
  const std::string model_dir = join(cfg.out_dir, "models");
  fs::create_directories(model_dir);
  const auto feat = featurizer_for(cfg);
  const std::string kind = cfg.model.kind;
  const std::uint64_t seed = stage_seed(cfg.seed, 3);

  std::vector<std::string> outputs;
  json extras;
  extras["model"] = kind;
  extras["config_hash"] = cfg.config_hash;
  extras["system"] = systems::to_string(cfg.system.kind);

  cvmodels::CvEncoder encoder;
  if (kind == "tlc" || kind == "tae" || kind == "vde" || kind == "tica") {
    const auto pairs = read_pairs(join(data_dir, "pairs.bin"));
    std::vector<systems::BasinLabel> labels;
    std::vector<Configuration> basin_a;
    split_by_label(cfg, pairs.x_t, labels, basin_a);
    if (basin_a.empty()) throw NumericsError("train: no basin-A samples for calibration sign");

    if (kind == "tlc") {
      flowgen::TlcConfig tc;
      tc.tau_steps = pairs.tau_steps;
      tc.lambda = cfg.model.lambda;
      tc.sigma = cfg.model.sigma;
      tc.lr = cfg.model.lr;
      tc.batch_size = cfg.model.batch_size;
      tc.n_iters = cfg.model.n_iters;
      tc.ode_steps = cfg.model.ode_steps;
      tc.seed = seed;
      tc.flow_hidden = cfg.model.flow_hidden;
      tc.encoder_hidden = cfg.model.hidden;
      // the generative side always works on aligned coordinates; only the
      // encoder switches representation (the distances ablation)
      const auto flow_feat = cvmodels::Featurizer::for_system(
          cfg.system, cvmodels::InputMode::AlignedCoords);
      auto res = flowgen::train_tlc(pairs, feat, flow_feat, tc, basin_a);
      encoder = std::move(res.encoder);

      io::Csv csv;
      csv.header({"iter", "l_cfm", "l_ac", "l_total"});
      for (const auto& row : res.loss_history)
        csv.row({io::fmt_double(row[0]), io::fmt_double(row[1]), io::fmt_double(row[2]),
                 io::fmt_double(row[3])});
      io::atomic_write(join(model_dir, "tlc_loss.csv"), csv.body);
      flowgen::save_flow(join(model_dir, "tlc_flow.json"), res.flow,
                         flowgen::encoder_checksum(encoder));
      outputs.push_back("tlc_loss.csv");
      outputs.push_back("tlc_flow.json");
    } else if (kind == "tae") {
      cvmodels::TaeConfig tc;
      tc.hidden = cfg.model.hidden;
      tc.lr = cfg.model.lr;
      tc.batch_size = cfg.model.batch_size;
      tc.n_iters = cfg.model.n_iters;
      tc.seed = seed;
      auto res = cvmodels::train_tae(pairs, feat, tc);
      encoder = std::move(res.encoder);
      cvmodels::calibrate(encoder, pairs.x_t, basin_a);
      write_loss_csv(join(model_dir, "tae_loss.csv"), res.loss_history);
      outputs.push_back("tae_loss.csv");
    } else if (kind == "vde") {
      cvmodels::VdeConfig vc;
      vc.hidden = cfg.model.hidden;
      vc.lr = cfg.model.lr;
      vc.batch_size = cfg.model.batch_size;
      vc.n_iters = cfg.model.n_iters;
      vc.seed = seed;
      vc.beta_kl = cfg.model.beta_kl;
      vc.lambda_ac = cfg.model.lambda_ac;
      auto res = cvmodels::train_vde(pairs, feat, vc);
      encoder = std::move(res.encoder);
      cvmodels::calibrate(encoder, pairs.x_t, basin_a);
      write_loss_csv(join(model_dir, "vde_loss.csv"), res.loss_history);
      outputs.push_back("vde_loss.csv");
    } else {  // tica
      const auto lin = cvmodels::fit_linear_tica(pairs, feat, cfg.model.reg);
      encoder = cvmodels::linear_cv_encoder(lin, feat);
      cvmodels::calibrate(encoder, pairs.x_t, basin_a);
      extras["eigenvalues"] = lin.eigenvalues;
      io::Csv csv;
      csv.header({"index", "eigenvalue"});
      for (std::size_t i = 0; i < lin.eigenvalues.size(); ++i)
        csv.row({std::to_string(i), io::fmt_double(lin.eigenvalues[i])});
      io::atomic_write(join(model_dir, "tica_eigenvalues.csv"), csv.body);
      outputs.push_back("tica_eigenvalues.csv");
    }
  } else {  // deeptda | lda: labeled frames
    const auto configs = labeled_frames(cfg, data_dir);
    std::vector<systems::BasinLabel> labels;
    std::vector<Configuration> basin_a;
    split_by_label(cfg, configs, labels, basin_a);
    if (basin_a.empty() || basin_a.size() == configs.size())
      throw NumericsError("train: need frames from both basins");

    if (kind == "deeptda") {
      cvmodels::DeepTdaConfig dc;
      dc.hidden = cfg.model.hidden;
      dc.lr = cfg.model.lr;
      dc.batch_size = cfg.model.batch_size;
      dc.n_iters = cfg.model.n_iters;
      dc.seed = seed;
      auto res = cvmodels::train_deeptda(configs, labels, feat, dc);
      encoder = std::move(res.encoder);
      cvmodels::calibrate(encoder, configs, basin_a);
      write_loss_csv(join(model_dir, "deeptda_loss.csv"), res.loss_history);
      outputs.push_back("deeptda_loss.csv");
    } else {  // lda
      const auto lin = cvmodels::fit_lda(configs, labels, feat, cfg.model.reg);
      encoder = cvmodels::linear_cv_encoder(lin, feat);
      cvmodels::calibrate(encoder, configs, basin_a);
    }
  }

  cvmodels::save_encoder(model_checkpoint_path(cfg), encoder, extras);
  outputs.push_back(kind + ".json");
  write_manifest(model_dir, "train", cfg, {{"pairs.bin", ""}}, outputs);
  std::cout << "train: wrote " << model_checkpoint_path(cfg) << "\n";
}

void cmd_calibrate(const config::RunConfig& cfg) {
  DirLock lock(cfg.out_dir);
  const std::string data_dir = join(cfg.out_dir, "data");
  json extras;
  cvmodels::CvEncoder enc = cvmodels::load_encoder(model_checkpoint_path(cfg), &extras);
  const auto configs = labeled_frames(cfg, data_dir);
  std::vector<systems::BasinLabel> labels;
  std::vector<Configuration> basin_a;
  split_by_label(cfg, configs, labels, basin_a);
  if (basin_a.empty()) throw NumericsError("calibrate: no basin-A samples");
  cvmodels::calibrate(enc, configs, basin_a);
  // keep prior extras minus the featurizer/calibration fields rewritten by save
  extras.erase("input_mode");
  extras.erase("reference");
  extras.erase("n_particles");
  extras.erase("spatial_dim");
  extras.erase("calibration");
  cvmodels::save_encoder(model_checkpoint_path(cfg), enc, extras);
  std::cout << "calibrate: updated " << model_checkpoint_path(cfg) << "\n";
}

void cmd_project(const config::RunConfig& cfg) {
  DirLock lock(cfg.out_dir);
  const std::string report_dir = join(cfg.out_dir, "report");
  fs::create_directories(report_dir);
  cvmodels::CvEncoder enc = cvmodels::load_encoder(model_checkpoint_path(cfg));

  const auto grid = analysis::LandscapeGrid::default_for(cfg.system, 101);
  const auto rows = analysis::cv_landscape(enc, cfg.system, grid);
  io::Csv csv;
  csv.header(cfg.system.kind == systems::SystemKind::MullerBrown2d
                 ? std::vector<std::string>{"x", "y", "cv"}
                 : std::vector<std::string>{"x", "cv"});
  for (const auto& r : rows) {
    std::vector<std::string> cells;
    for (double c : r.coords) cells.push_back(io::fmt_double(c));
    cells.push_back(io::fmt_double(r.cv));
    csv.row(cells);
  }
  io::atomic_write(join(report_dir, "landscape.csv"), csv.body);

  // presentational rendering of the same numbers
  if (cfg.system.kind == systems::SystemKind::MullerBrown2d) {
    std::vector<double> values;
    for (const auto& r : rows) values.push_back(r.cv);
    io::atomic_write(join(report_dir, "landscape.svg"),
                     io::heatmap_svg(values, grid.n_x, grid.n_y, "cv landscape"));
  } else {
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
      xs.push_back(r.coords[0]);
      ys.push_back(r.cv);
    }
    io::atomic_write(join(report_dir, "landscape.svg"),
                     io::line_plot_svg({xs}, {ys}, {"cv"}, "cv landscape"));
  }

  const auto configs = labeled_frames(cfg, join(cfg.out_dir, "data"));
  const auto sens = cvmodels::sensitivity(enc, configs);
  io::Csv scsv;
  scsv.header({"feature", "sensitivity"});
  for (const auto& s : sens) scsv.row({std::to_string(s.feature), io::fmt_double(s.value)});
  io::atomic_write(join(report_dir, "sensitivity.csv"), scsv.body);

  // per-frame projections of the training trajectories
  io::Csv pcsv;
  pcsv.header({"frame", "ground_truth", "cv"});
  for (std::size_t i = 0; i < configs.size(); ++i)
    pcsv.row({std::to_string(i), io::fmt_double(systems::ground_truth_cv(cfg.system, configs[i])),
              io::fmt_double(cvmodels::encode(enc, configs[i]))});
  io::atomic_write(join(report_dir, "projection.csv"), pcsv.body);

  write_manifest(report_dir, "project", cfg, {},
                 {"landscape.csv", "sensitivity.csv", "projection.csv"});
  std::cout << "project: wrote landscape/sensitivity/projection under " << report_dir << "\n";
}

void cmd_smd(const config::RunConfig& cfg) {
  DirLock lock(cfg.out_dir);
  const std::string smd_dir = join(cfg.out_dir, "smd");
  fs::create_directories(smd_dir);

  cvmodels::CvEncoder loaded;
  const auto cv = resolve_cv(cfg, cfg.smd.cv, &loaded);
  const Configuration target = systems::basin_minimum(cfg.system, systems::BasinLabel::B);
  const Configuration start = systems::basin_minimum(cfg.system, systems::BasinLabel::A);
  const auto pool = smd_initial_pool(cfg);

  enhanced::SmdConfig base;
  base.horizon_steps = cfg.smd.horizon_steps;
  base.s_initial = cv.value(start);
  base.s_target = cv.value(target);
  base.n_replicas = cfg.smd.n_replicas;
  base.seed = stage_seed(cfg.seed, 4);
  base.record_stride = cfg.smd.record_stride;

  // k = 0 baseline pins the energy cap
  enhanced::SmdConfig zero = base;
  zero.k = 0.0;
  const auto base_run = enhanced::run_smd(cfg.system, cv, cfg.langevin, zero, pool);
  double e0_max = -1e300;
  for (const auto& tr : base_run.replicas)
    for (double e : tr.energy) e0_max = std::max(e0_max, e);
  const double cap = cfg.smd.energy_cap > 0.0
                         ? cfg.smd.energy_cap
                         : e0_max + 2.0 * cfg.langevin.temperature;

  std::vector<SweepEntry> sweep;
  std::vector<enhanced::SmdRunResult> runs;
  for (int i = 0; i < cfg.smd.k_count; ++i) {
    enhanced::SmdConfig sc = base;
    sc.k = cfg.smd.k_count == 1
               ? cfg.smd.k_min
               : cfg.smd.k_min + (cfg.smd.k_max - cfg.smd.k_min) * i / (cfg.smd.k_count - 1);
    auto run = enhanced::run_smd(cfg.system, cv, cfg.langevin, sc, pool);
    std::vector<dynamics::Trajectory> live;
    int diverged = 0;
    for (std::size_t r = 0; r < run.replicas.size(); ++r) {
      if (run.diverged[r])
        ++diverged;
      else
        live.push_back(run.replicas[r]);
    }
    SweepEntry entry;
    entry.k = sc.k;
    entry.n_diverged = diverged;
    entry.metrics = analysis::path_metrics(live, cfg.system, target, cfg.smd.hit_threshold);
    sweep.push_back(std::move(entry));
    runs.push_back(std::move(run));
  }

  // best THP under the cap; ties resolved toward lower transition energy
  int best = -1;
  bool best_under_cap = false;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const auto& m = sweep[i].metrics;
    const bool under = m.ets_mean && *m.ets_mean <= cap;
    if (!under) continue;
    if (best < 0 || m.thp_percent > sweep[static_cast<std::size_t>(best)].metrics.thp_percent ||
        (m.thp_percent == sweep[static_cast<std::size_t>(best)].metrics.thp_percent &&
         *m.ets_mean < *sweep[static_cast<std::size_t>(best)].metrics.ets_mean)) {
      best = static_cast<int>(i);
      best_under_cap = true;
    }
  }
  if (best < 0) {  // nothing under the cap; report the highest THP anyway
    for (std::size_t i = 0; i < sweep.size(); ++i)
      if (best < 0 ||
          sweep[i].metrics.thp_percent > sweep[static_cast<std::size_t>(best)].metrics.thp_percent)
        best = static_cast<int>(i);
  }

  // artifacts: per-replica trajectories of the selected k
  std::vector<std::string> outputs;
  const auto& best_run = runs[static_cast<std::size_t>(best)];
  for (std::size_t r = 0; r < best_run.replicas.size(); ++r) {
    if (best_run.diverged[r]) continue;
    const std::string name = "replica_" + std::to_string(r);
    dynamics::write_trajectory(join(smd_dir, name + ".trj"), best_run.replicas[r]);
    dynamics::write_trajectory_csv(join(smd_dir, name + ".csv"), best_run.replicas[r]);
    outputs.push_back(name + ".trj");
    outputs.push_back(name + ".csv");
  }

  json doc;
  doc["schema_version"] = 1;
  doc["config_hash"] = cfg.config_hash;
  doc["cv"] = cfg.smd.cv;
  doc["s_initial"] = base.s_initial;
  doc["s_target"] = base.s_target;
  doc["k_zero_max_energy"] = e0_max;
  doc["energy_cap"] = cap;
  doc["best_under_cap"] = best_under_cap;
  json sj = json::array();
  for (const auto& e : sweep) sj.push_back(sweep_entry_json(e));
  doc["sweep"] = std::move(sj);
  doc["best"] = sweep_entry_json(sweep[static_cast<std::size_t>(best)]);
  io::atomic_write(join(smd_dir, "metrics.json"), doc.dump(1));
  outputs.push_back("metrics.json");

  io::Csv csv;
  csv.header({"k", "thp_percent", "rmsd_mean", "ets_mean", "ets_std", "n_diverged"});
  for (const auto& e : sweep)
    csv.row({io::fmt_double(e.k), io::fmt_double(e.metrics.thp_percent),
             io::fmt_double(e.metrics.rmsd_mean),
             e.metrics.ets_mean ? io::fmt_double(*e.metrics.ets_mean) : "nan",
             e.metrics.ets_std ? io::fmt_double(*e.metrics.ets_std) : "nan",
             std::to_string(e.n_diverged)});
  io::atomic_write(join(smd_dir, "sweep.csv"), csv.body);
  outputs.push_back("sweep.csv");

  write_manifest(smd_dir, "smd", cfg, {}, outputs);
  std::cout << "smd: best k=" << sweep[static_cast<std::size_t>(best)].k
            << " thp=" << sweep[static_cast<std::size_t>(best)].metrics.thp_percent << "%"
            << (best_under_cap ? "" : " (no k met the energy cap)") << "\n";
}

void cmd_opes(const config::RunConfig& cfg) {
  DirLock lock(cfg.out_dir);
  const std::string opes_dir = join(cfg.out_dir, "opes");
  fs::create_directories(opes_dir);

  cvmodels::CvEncoder loaded;
  const auto cv = resolve_cv(cfg, cfg.opes.cv, &loaded);

  enhanced::OpesConfig oc;
  oc.pace = cfg.opes.pace;
  oc.sigma = cfg.opes.sigma;
  oc.barrier = cfg.opes.barrier;
  oc.gamma = cfg.opes.gamma;
  oc.beta = 1.0 / cfg.langevin.temperature;
  oc.record_stride = cfg.opes.record_stride;
  oc.total_steps = cfg.opes.total_steps;
  oc.seed = stage_seed(cfg.seed, 5);
  oc.grid_lo = cfg.opes.grid_lo;
  oc.grid_hi = cfg.opes.grid_hi;
  oc.grid_bins = cfg.opes.grid_bins;
  if (oc.pace > oc.total_steps)
    std::cerr << "opes: warning: pace > total_steps, no kernels will be deposited\n";

  const Configuration init = systems::basin_minimum(cfg.system, systems::BasinLabel::A);
  const auto res = enhanced::run_opes(cfg.system, cv, cfg.langevin, oc, init);

  dynamics::write_trajectory(join(opes_dir, "traj.trj"), res.traj);
  dynamics::write_trajectory_csv(join(opes_dir, "traj.csv"), res.traj);

  io::Csv log;
  log.header({"step", "s", "V", "n_kernels"});
  for (const auto& row : res.log)
    log.row({std::to_string(row.step), io::fmt_double(row.s), io::fmt_double(row.v),
             std::to_string(row.n_kernels)});
  io::atomic_write(join(opes_dir, "bias_log.csv"), log.body);

  io::Csv kcsv;
  kcsv.header({"center", "weight"});
  for (const auto& k : res.state.kernels)
    kcsv.row({io::fmt_double(k.center), io::fmt_double(k.weight)});
  io::atomic_write(join(opes_dir, "kernels.csv"), kcsv.body);

  write_manifest(opes_dir, "opes", cfg, {},
                 {"traj.trj", "traj.csv", "bias_log.csv", "kernels.csv"});
  std::cout << "opes: " << res.state.kernels.size() << " kernels, z=" << res.state.z << "\n";
}

void cmd_fes(const config::RunConfig& cfg) {
  DirLock lock(cfg.out_dir);
  const std::string opes_dir = join(cfg.out_dir, "opes");
  const auto rows = parse_csv(io::read_bytes(join(opes_dir, "bias_log.csv")));
  require(rows.size() >= 2 && rows[0].size() >= 3, "fes: malformed bias_log.csv");

  // pseudo-trajectory over the logged CV samples; bias drives the reweighting
  dynamics::Trajectory traj;
  traj.n_particles = 1;
  traj.spatial_dim = 1;
  traj.record_stride = cfg.opes.record_stride;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    traj.frames.push_back({std::strtod(rows[i][1].c_str(), nullptr)});
    traj.bias.push_back(std::strtod(rows[i][2].c_str(), nullptr));
  }
  const auto coord = [](const Configuration& x) { return x[0]; };
  const double beta = 1.0 / cfg.langevin.temperature;

  const auto fes = analysis::reweighted_fes(traj, coord, beta, cfg.fes.n_bins,
                                            cfg.fes.burn_in_fraction);
  io::Csv fcsv;
  fcsv.header({"center", "free_energy", "count"});
  for (std::size_t b = 0; b < fes.centers.size(); ++b)
    fcsv.row({io::fmt_double(fes.centers[b]), io::fmt_double(fes.free_energy[b]),
              std::to_string(fes.counts[b])});
  io::atomic_write(join(opes_dir, "fes.csv"), fcsv.body);

  const double df = analysis::delta_f(fes, beta, cfg.fes.basin_split);
  const double reference = cfg.fes.has_reference ? cfg.fes.reference
                                                 : std::numeric_limits<double>::quiet_NaN();
  const auto series = analysis::delta_f_series(
      traj, coord, beta, cfg.fes.burn_in_fraction, cfg.fes.checkpoint_stride,
      cfg.fes.basin_split, cfg.fes.n_bins, reference, 0.5 * cfg.langevin.temperature);

  io::Csv scsv;
  scsv.header({"step", "delta_f"});
  for (const auto& [step, value] : series.checkpoints)
    scsv.row({std::to_string(step), io::fmt_double(value)});
  io::atomic_write(join(opes_dir, "delta_f_series.csv"), scsv.body);

  json doc;
  doc["schema_version"] = 1;
  doc["config_hash"] = cfg.config_hash;
  doc["delta_f"] = df;
  doc["delta_f_final_window"] = series.final_value;
  if (cfg.fes.has_reference) {
    doc["reference"] = cfg.fes.reference;
    doc["converged"] = series.converged;
  } else {
    doc["reference"] = nullptr;
  }
  doc["effective_samples"] = fes.effective_samples;
  io::atomic_write(join(opes_dir, "fes_metrics.json"), doc.dump(1));

  // presentational plots; the numbers live in the CSVs
  std::vector<double> centers(fes.centers), fe(fes.free_energy);
  io::atomic_write(join(opes_dir, "fes.svg"),
                   io::line_plot_svg({centers}, {fe}, {"F"}, "reweighted free energy"));
  std::vector<double> steps, dfs;
  for (const auto& [st, v] : series.checkpoints) {
    steps.push_back(static_cast<double>(st));
    dfs.push_back(v);
  }
  io::atomic_write(join(opes_dir, "delta_f_series.svg"),
                   io::line_plot_svg({steps}, {dfs}, {"dF"}, "delta F convergence"));

  write_manifest(opes_dir, "fes", cfg, {{"bias_log.csv", ""}},
                 {"fes.csv", "delta_f_series.csv", "fes_metrics.json"});
  std::cout << "fes: delta_f=" << df << "\n";
}

void cmd_report(const config::RunConfig& cfg, const std::vector<std::string>& run_dirs) {
  require(!run_dirs.empty(), "report: pass at least one run directory");
  DirLock lock(cfg.out_dir);
  const std::string report_dir = join(cfg.out_dir, "report");
  fs::create_directories(report_dir);

  std::vector<double> dfs;
  std::vector<json> smd_rows;
  for (const auto& dir : run_dirs) {
    const std::string fm = join(join(dir, "opes"), "fes_metrics.json");
    if (fs::exists(fm)) {
      const auto doc = json::parse(io::read_bytes(fm));
      dfs.push_back(doc.at("delta_f").get<double>());
    }
    const std::string sm = join(join(dir, "smd"), "metrics.json");
    if (fs::exists(sm)) smd_rows.push_back(json::parse(io::read_bytes(sm))["best"]);
  }

  json doc;
  doc["schema_version"] = 1;
  doc["config_hash"] = cfg.config_hash;
  doc["n_runs"] = run_dirs.size();
  io::Csv csv;
  csv.header({"quantity", "mean", "std", "n"});
  if (!dfs.empty()) {
    const double m = stats::mean(dfs);
    const double sd = dfs.size() > 1 ? std::sqrt(stats::variance(dfs) * dfs.size() /
                                                 (dfs.size() - 1))
                                     : 0.0;
    doc["delta_f"] = {{"mean", m}, {"std", sd}, {"n", dfs.size()}};
    csv.row({"delta_f", io::fmt_double(m), io::fmt_double(sd), std::to_string(dfs.size())});
  }
  if (!smd_rows.empty()) {
    std::vector<double> thp, ets, rmsd;
    for (const auto& r : smd_rows) {
      thp.push_back(r.at("thp_percent").get<double>());
      rmsd.push_back(r.at("rmsd_mean").get<double>());
      if (!r.at("ets_mean").is_null()) ets.push_back(r.at("ets_mean").get<double>());
    }
    auto put = [&](const char* name, std::vector<double>& v) {
      if (v.empty()) return;
      const double m = stats::mean(v);
      const double sd =
          v.size() > 1 ? std::sqrt(stats::variance(v) * v.size() / (v.size() - 1)) : 0.0;
      doc[name] = {{"mean", m}, {"std", sd}, {"n", v.size()}};
      csv.row({name, io::fmt_double(m), io::fmt_double(sd), std::to_string(v.size())});
    };
    put("smd_thp_percent", thp);
    put("smd_rmsd", rmsd);
    put("smd_ets", ets);
  }
  io::atomic_write(join(report_dir, "summary.json"), doc.dump(1));
  io::atomic_write(join(report_dir, "summary.csv"), csv.body);
  std::cout << "report: aggregated " << run_dirs.size() << " runs\n";
}

}  // namespace tlc::cli
