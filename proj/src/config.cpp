// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#include "tlc/config.hpp"

#include <variant>

#include "tlc/io.hpp"
#include "tlc/io.hpp"
#include "tlc/toml.hpp"

namespace tlc::config {

namespace {

// Canonical serialization of the parsed keys (out_dir excluded), so the hash
// tracks the scientific content and not the text layout or output location.
void canonical_value(const toml::Value& v, std::string& out) {
  using T = toml::Value::Type;
  switch (v.type) {
    case T::String: out += "s:" + v.str; break;
    case T::Float: out += "f:" + io::fmt_double(v.number); break;
    case T::Integer: out += "i:" + std::to_string(v.integer); break;
    case T::Boolean: out += v.boolean ? "b:1" : "b:0"; break;
    case T::Array:
      out += "a:[";
      for (const auto& e : v.array) {
        canonical_value(e, out);
        out += ',';
      }
      out += ']';
      break;
  }
}

std::string canonical_hash(const toml::Table& t) {
  std::string doc;
  for (const auto& [key, value] : t.entries()) {
    if (key == "out_dir") continue;
    doc += key + '=';
    canonical_value(value, doc);
    doc += '\n';
  }
  return hex64(fnv1a64(doc));
}

systems::SystemSpec read_system(const toml::Table& t) {
  if (!t.has("system.kind"))
    throw ConfigError("config: missing required key 'system.kind' ([system] section)");
  const std::string kind = t.require_string("system.kind");
  systems::SystemSpec sys;
  if (kind == "doublewell1d") {
    sys = systems::SystemSpec::double_well_1d(t.get_double("system.a", 5.0),
                                              t.get_double("system.tilt", 0.0));
  } else if (kind == "mullerbrown2d") {
    sys = systems::SystemSpec::muller_brown_2d();
  } else if (kind == "butane4") {
    sys = systems::SystemSpec::butane4();
    auto& p = std::get<systems::Butane4Params>(sys.params);
    p.bond_k = t.get_double("system.bond_k", p.bond_k);
    p.bond_r0 = t.get_double("system.bond_r0", p.bond_r0);
    p.angle_k = t.get_double("system.angle_k", p.angle_k);
    p.angle_theta0 = t.get_double("system.angle_theta0", p.angle_theta0);
    p.torsion_c = t.get_double("system.torsion_c", p.torsion_c);
  } else {
    throw ConfigError("config: unknown system.kind '" + kind + "'");
  }
  std::vector<double> default_masses(sys.masses.begin(), sys.masses.end());
  const auto masses = t.get_double_array("system.masses", default_masses);
  if (masses.size() != static_cast<std::size_t>(sys.particle_count))
    throw ConfigError("config: system.masses must have one entry per particle");
  for (double m : masses)
    if (!(m > 0.0)) throw ConfigError("config: system.masses must be positive");
  sys.masses = masses;
  return sys;
}

}  // namespace

RunConfig run_config_from_text(const std::string& text,
                               const std::vector<std::string>& overrides) {
  toml::Table t = toml::Table::parse(text);
  for (const auto& o : overrides) t.set_override(o);

  RunConfig cfg;
  cfg.system = read_system(t);

  cfg.seed = static_cast<std::uint64_t>(t.get_int("seed", 0));
  cfg.out_dir = t.get_string("out_dir", "out");

  cfg.langevin.dt = t.get_double("langevin.dt", 2e-3);
  cfg.langevin.gamma = t.get_double("langevin.gamma", 1.0);
  cfg.langevin.temperature = t.get_double("langevin.temperature", 1.0);
  cfg.langevin.masses = cfg.system.masses;
  cfg.langevin.seed = cfg.seed;
  if (!(cfg.langevin.dt > 0.0)) throw ConfigError("config: langevin.dt must be > 0");
  if (cfg.langevin.gamma < 0.0) throw ConfigError("config: langevin.gamma must be >= 0");
  if (cfg.langevin.temperature < 0.0)
    throw ConfigError("config: langevin.temperature must be >= 0");

  DataPlan& d = cfg.data;
  d.n_trajs_per_basin = static_cast<int>(t.get_int("data.n_trajs_per_basin", 5));
  d.n_steps = t.get_int("data.n_steps", 40000);
  d.record_stride = t.get_int("data.record_stride", 4);
  d.tau_steps = t.get_int("data.tau_steps", 10 * d.record_stride);
  d.exclude_transitions = t.get_bool("data.exclude_transitions", true);
  d.max_pairs = t.get_int("data.max_pairs", 20000);
  if (d.n_trajs_per_basin < 1) throw ConfigError("config: data.n_trajs_per_basin must be >= 1");
  if (d.record_stride < 1 || d.n_steps < d.record_stride)
    throw ConfigError("config: need data.n_steps >= data.record_stride >= 1");
  if (d.tau_steps < 1 || d.tau_steps % d.record_stride != 0)
    throw ConfigError("config: data.tau_steps must be a positive multiple of record_stride");

  ModelSection& m = cfg.model;
  m.kind = t.get_string("model.kind", "tlc");
  if (m.kind != "tlc" && m.kind != "tae" && m.kind != "vde" && m.kind != "deeptda" &&
      m.kind != "tica" && m.kind != "lda")
    throw ConfigError("config: unknown model.kind '" + m.kind + "'");
  m.input_mode =
      cvmodels::input_mode_from_string(t.get_string("model.input_mode", "aligned_coords"));
  m.hidden = t.get_int_array("model.hidden", m.hidden);
  m.flow_hidden = t.get_int_array("model.flow_hidden", m.flow_hidden);
  m.lr = t.get_double("model.lr", m.lr);
  m.batch_size = static_cast<int>(t.get_int("model.batch_size", m.batch_size));
  m.n_iters = static_cast<int>(t.get_int("model.n_iters", m.n_iters));
  m.lambda = t.get_double("model.lambda", m.lambda);
  m.sigma = t.get_double("model.sigma", m.sigma);
  m.ode_steps = static_cast<int>(t.get_int("model.ode_steps", m.ode_steps));
  m.beta_kl = t.get_double("model.beta_kl", m.beta_kl);
  m.lambda_ac = t.get_double("model.lambda_ac", m.lambda_ac);
  m.reg = t.get_double("model.reg", m.reg);
  if (m.lambda < 0.0) throw ConfigError("config: model.lambda must be >= 0");
  if (!(m.sigma > 0.0)) throw ConfigError("config: model.sigma must be > 0");
  if (m.batch_size < 2) throw ConfigError("config: model.batch_size must be >= 2");

  SmdSection& s = cfg.smd;
  s.k_min = t.get_double("smd.k_min", s.k_min);
  s.k_max = t.get_double("smd.k_max", s.k_max);
  s.k_count = static_cast<int>(t.get_int("smd.k_count", s.k_count));
  s.horizon_steps = t.get_int("smd.horizon_steps", s.horizon_steps);
  s.n_replicas = static_cast<int>(t.get_int("smd.n_replicas", s.n_replicas));
  s.record_stride = t.get_int("smd.record_stride", s.record_stride);
  s.hit_threshold = t.get_double("smd.hit_threshold", s.hit_threshold);
  s.energy_cap = t.get_double("smd.energy_cap", s.energy_cap);
  s.cv = t.get_string("smd.cv", s.cv);
  if (s.cv != "encoder" && s.cv != "ground_truth")
    throw ConfigError("config: smd.cv must be 'encoder' or 'ground_truth'");
  if (s.k_count < 1 || !(s.k_min > 0.0) || s.k_max < s.k_min)
    throw ConfigError("config: bad smd k grid");
  if (s.horizon_steps < 1) throw ConfigError("config: smd.horizon_steps must be >= 1");

  OpesSection& o = cfg.opes;
  o.pace = t.get_int("opes.pace", o.pace);
  o.sigma = t.get_double("opes.sigma", o.sigma);
  o.barrier = t.get_double("opes.barrier", o.barrier);
  o.gamma = t.get_double("opes.gamma", o.gamma);
  o.record_stride = t.get_int("opes.record_stride", o.record_stride);
  o.total_steps = t.get_int("opes.total_steps", o.total_steps);
  o.cv = t.get_string("opes.cv", o.cv);
  o.grid_lo = t.get_double("opes.grid_lo", o.grid_lo);
  o.grid_hi = t.get_double("opes.grid_hi", o.grid_hi);
  o.grid_bins = static_cast<int>(t.get_int("opes.grid_bins", o.grid_bins));
  if (o.cv != "encoder" && o.cv != "ground_truth")
    throw ConfigError("config: opes.cv must be 'encoder' or 'ground_truth'");
  if (o.pace < 1 || !(o.sigma > 0.0) || !(o.barrier > 0.0))
    throw ConfigError("config: bad opes section");

  FesSection& f = cfg.fes;
  f.n_bins = static_cast<int>(t.get_int("fes.n_bins", f.n_bins));
  f.burn_in_fraction = t.get_double("fes.burn_in_fraction", f.burn_in_fraction);
  f.checkpoint_stride = t.get_int("fes.checkpoint_stride", f.checkpoint_stride);
  f.basin_split = t.get_double("fes.basin_split", f.basin_split);
  f.has_reference = t.has("fes.reference");
  f.reference = t.get_double("fes.reference", 0.0);
  if (f.n_bins < 2) throw ConfigError("config: fes.n_bins must be >= 2");
  if (f.burn_in_fraction < 0.0 || f.burn_in_fraction >= 1.0)
    throw ConfigError("config: fes.burn_in_fraction must lie in [0, 1)");

  const auto leftovers = t.unconsumed();
  if (!leftovers.empty()) {
    std::string msg = "config: unknown keys:";
    for (const auto& k : leftovers) msg += ' ' + k;
    throw ConfigError(msg);
  }

  cfg.config_hash = canonical_hash(t);
  return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  return run_config_from_text(io::read_bytes(path), overrides);
}

}  // namespace tlc::config
