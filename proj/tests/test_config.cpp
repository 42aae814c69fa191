// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tlc/config.hpp"
#include "tlc/toml.hpp"

using namespace tlc;

namespace {

const char* kMinimal = R"(
seed = 42
out_dir = "out"

[system]
kind = "doublewell1d"
a = 5.0

[langevin]
dt = 0.002
gamma = 1.0
temperature = 1.0
)";

}  // namespace

TEST_CASE("toml subset parses scalars, arrays, sections, comments") {
  const auto t = toml::Table::parse(R"(
# header comment
top = 3
name = "hello \"quoted\""   # trailing comment
flag = true
ratio = 0.25
negexp = 1.5e-3

[sec]
values = [1, 2, 3]
mixed = [0.5, 1.5]

[sec.sub]
deep = -7
)");
  CHECK(t.require_int("top") == 3);
  CHECK(t.require_string("name") == "hello \"quoted\"");
  CHECK(t.get_bool("flag", false));
  CHECK(t.require_double("ratio") == doctest::Approx(0.25));
  CHECK(t.require_double("negexp") == doctest::Approx(1.5e-3));
  CHECK(t.get_int_array("sec.values", {}) == std::vector<int>{1, 2, 3});
  CHECK(t.get_double_array("sec.mixed", {})[1] == doctest::Approx(1.5));
  CHECK(t.require_int("sec.sub.deep") == -7);
  CHECK(t.has_section("sec"));
  CHECK(!t.has_section("nope"));
}

TEST_CASE("toml reports the line of bad input") {
  CHECK_THROWS_WITH_AS(toml::Table::parse("a = \n"), doctest::Contains("line 1"), ConfigError);
  CHECK_THROWS_WITH_AS(toml::Table::parse("\n\nkey 5\n"), doctest::Contains("line 3"),
                       ConfigError);
  CHECK_THROWS_AS(toml::Table::parse("a = 1\na = 2\n"), ConfigError);  // duplicate
  CHECK_THROWS_AS(toml::Table::parse("s = \"unterminated\n"), ConfigError);
}

TEST_CASE("run config loads with defaults") {
  const auto cfg = config::run_config_from_text(kMinimal);
  CHECK(cfg.seed == 42);
  CHECK(cfg.system.kind == systems::SystemKind::DoubleWell1d);
  CHECK(cfg.langevin.dt == doctest::Approx(0.002));
  CHECK(cfg.data.tau_steps == 10 * cfg.data.record_stride);
  CHECK(cfg.model.kind == "tlc");
  CHECK(cfg.smd.k_count == 10);
  CHECK(cfg.opes.pace == 500);
  CHECK(!cfg.config_hash.empty());
}

TEST_CASE("missing system section names the key") {
  CHECK_THROWS_WITH_AS(config::run_config_from_text("seed = 1\n"),
                       doctest::Contains("system.kind"), ConfigError);
}

TEST_CASE("unknown keys are rejected with their line") {
  const std::string text = std::string(kMinimal) + "\n[model]\nkindd = \"tlc\"\n";
  CHECK_THROWS_WITH_AS(config::run_config_from_text(text), doctest::Contains("model.kindd"),
                       ConfigError);
}

TEST_CASE("overrides replace values and join the hash") {
  const auto base = config::run_config_from_text(kMinimal);
  const auto over = config::run_config_from_text(kMinimal, {"seed=7", "langevin.dt=0.01"});
  CHECK(over.seed == 7);
  CHECK(over.langevin.dt == doctest::Approx(0.01));
  CHECK(over.config_hash != base.config_hash);
}

TEST_CASE("validation catches bad sections") {
  CHECK_THROWS_AS(config::run_config_from_text(std::string(kMinimal) + "[data]\nn_steps = 0\n"),
                  ConfigError);
  CHECK_THROWS_AS(
      config::run_config_from_text(std::string(kMinimal) + "[model]\nkind = \"what\"\n"),
      ConfigError);
  CHECK_THROWS_AS(
      config::run_config_from_text(std::string(kMinimal) + "[smd]\ncv = \"nope\"\n"),
      ConfigError);
  CHECK_THROWS_AS(
      config::run_config_from_text(std::string(kMinimal) + "[system2]\nkind = \"x\"\n"),
      ConfigError);
}

TEST_CASE("butane system parameters flow through") {
  const std::string text = R"(
[system]
kind = "butane4"
torsion_c = 4.0
masses = [1.0, 2.0, 2.0, 1.0]
)";
  const auto cfg = config::run_config_from_text(text);
  CHECK(std::get<systems::Butane4Params>(cfg.system.params).torsion_c == 4.0);
  CHECK(cfg.langevin.masses == std::vector<double>{1.0, 2.0, 2.0, 1.0});
}
