#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "scaffopt/config.hpp"
#include "scaffopt/toml.hpp"
#include "scaffopt/vtk.hpp"

using namespace scaffopt;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("toml subset parsing") {
  const std::string text = R"(
# experiment
dimension = 3
eta = 2.5           # weight
delta = 1e-4
loads = ["A11", "A22"]
schedule = [5, 9, 17]
flag = true
[phase0]
E = 10.0
nu = 0.25
)";
  const auto table = toml::parse(text);
  CHECK(table.at("dimension").as_integer() == 3);
  CHECK(table.at("eta").as_number() == 2.5);
  CHECK(table.at("delta").as_number() == doctest::Approx(1e-4));
  CHECK(table.at("loads").array.size() == 2);
  CHECK(table.at("loads").array[1].as_string() == "A22");
  CHECK(table.at("schedule").array[2].as_integer() == 17);
  CHECK(table.at("flag").boolean == true);
  CHECK(table.at("phase0.E").as_number() == 10.0);
  CHECK(table.at("phase0.nu").as_number() == 0.25);

  CHECK_THROWS_AS(toml::parse("a = 1\na = 2\n"), toml::ParseError);
  CHECK_THROWS_AS(toml::parse("a == 2\n"), toml::ParseError);
  CHECK_THROWS_AS(toml::parse("a = [1, 2\n"), toml::ParseError);
  CHECK_THROWS_AS(toml::parse("= 3\n"), toml::ParseError);
  CHECK_THROWS_AS(toml::parse("b = 1 trailing\n"), toml::ParseError);
}

TEST_CASE("presets carry the published experiment families") {
  const auto equal = preset_config("equal-3compr");
  CHECK(equal.loads == std::vector<std::string>{"A11", "A22", "A33"});
  CHECK(equal.eta == 2.0);
  CHECK(equal.delta == 1e-4);
  CHECK(equal.p == 2.0);
  CHECK(equal.beta == -0.25);
  CHECK(equal.phase0.young.value() == 10.0);
  CHECK(equal.phase0.poisson.value() == 0.25);
  CHECK(equal.phase1.young.value() == 10.0);

  const auto bone = preset_config("bone-polymer");
  CHECK(bone.phase1.young.value() / bone.phase0.young.value() ==
        doctest::Approx(15.0).epsilon(1e-14));
  CHECK(bone.phase1.poisson.value() == 0.1);
  CHECK(bone.phase0.poisson.value() == 0.3);

  const auto young = preset_config("young-sweep");
  CHECK(young.eta == 1.0);
  REQUIRE(young.sweep.has_value());
  CHECK(young.sweep->key == "phase0.E");
  CHECK(young.sweep->values == std::vector<double>{20.0, 40.0, 80.0, 160.0, 320.0});

  const auto flat = preset_config("2d-2compr");
  CHECK(flat.dimension == 2);
  CHECK(flat.loads == std::vector<std::string>{"A11", "A22"});

  CHECK(preset_config("eta-sweep").sweep->values == std::vector<double>{2.0, 4.0, 10.0});
  CHECK(preset_config("p-sweep").sweep->values == std::vector<double>{2.0, 4.0, 8.0, 16.0});
  CHECK(preset_config("equal-2compr-1shear").loads ==
        std::vector<std::string>{"A11", "A22", "A23"});
  CHECK(preset_config("equal-1compr-2shear").loads ==
        std::vector<std::string>{"A11", "A12", "A13"});
  CHECK_THROWS_AS(preset_config("no-such-preset"), std::invalid_argument);
}

TEST_CASE("config validation names the offending key") {
  auto expect_message = [](const std::string& text, const std::string& needle) {
    try {
      parse_config_text(text);
      FAIL("expected a validation error for: " << needle);
    } catch (const std::exception& err) {
      CHECK(std::string(err.what()).find(needle) != std::string::npos);
    }
  };

  expect_message("preset = \"equal-3compr\"\n[phase0]\nE = 10.0\nnu = 0.7\n", "nu");
  expect_message("preset = \"equal-3compr\"\nunknown_key = 1\n", "unknown_key");
  expect_message("preset = \"equal-3compr\"\nloads = [\"A23\", \"A23\"]\n", "A23");
  expect_message("preset = \"2d-2compr\"\nloads = [\"A33\"]\n", "A33");
  expect_message("preset = \"equal-3compr\"\nschedule = [9, 10]\n", "schedule");
  expect_message("preset = \"equal-3compr\"\ndelta = 0.0\n", "delta");
  expect_message("preset = \"equal-3compr\"\nbeta = 0.0\n", "beta");
  expect_message(
      "preset = \"equal-3compr\"\n[phase0]\nE = 10.0\nnu = 0.25\nmu = 4.0\nlambda = 4.0\n",
      "not both");
}

TEST_CASE("preset overrides apply key by key") {
  const auto cfg = parse_config_text(R"(
preset = "equal-3compr"
eta = 4.0
schedule = [9, 17]
seed = 42
[solver]
cg_tol = 1e-9
)");
  CHECK(cfg.eta == 4.0);
  CHECK(cfg.schedule == std::vector<int>{9, 17});
  CHECK(cfg.seed == 42);
  CHECK(cfg.cg_tol == 1e-9);
  CHECK(cfg.loads == std::vector<std::string>{"A11", "A22", "A33"});  // kept
}

TEST_CASE("config round-trips through serialization") {
  auto cfg = preset_config("young-sweep");
  cfg.schedule = {9, 17};
  cfg.seed = 7;
  cfg.isosurface_level = 0.0;
  cfg.phase1 = MaterialSpec{};
  cfg.phase1.mu = 3.5;
  cfg.phase1.lambda = 2.25;
  const std::string text = serialize_config(cfg);
  const auto back = parse_config_text(text);
  CHECK(serialize_config(back) == text);
  CHECK(back.dimension == cfg.dimension);
  CHECK(back.schedule == cfg.schedule);
  CHECK(back.loads == cfg.loads);
  CHECK(back.beta == cfg.beta);
  CHECK(back.eta == cfg.eta);
  CHECK(back.delta == cfg.delta);
  CHECK(back.p == cfg.p);
  CHECK(back.q_max == cfg.q_max);
  CHECK(back.seed == cfg.seed);
  CHECK(back.output_dir == cfg.output_dir);
  CHECK(back.tile == cfg.tile);
  CHECK(back.isosurface_level.value() == cfg.isosurface_level.value());
  CHECK(back.phase0.young.value() == cfg.phase0.young.value());
  CHECK(back.phase1.mu.value() == cfg.phase1.mu.value());
  CHECK(back.sweep->key == cfg.sweep->key);
  CHECK(back.sweep->values == cfg.sweep->values);
  CHECK(config_hash(back) == config_hash(cfg));

  auto changed = cfg;
  changed.eta += 1.0;
  CHECK(config_hash(changed) != config_hash(cfg));
}

TEST_CASE("sweep expansion applies values and separates output dirs") {
  const auto cfg = preset_config("eta-sweep");
  const auto runs = expand_sweep(cfg);
  REQUIRE(runs.size() == 3);
  CHECK(runs[0].second.eta == 2.0);
  CHECK(runs[2].second.eta == 10.0);
  CHECK(runs[1].second.output_dir != runs[2].second.output_dir);
  CHECK(!runs[0].second.sweep.has_value());

  const auto plain = preset_config("equal-3compr");
  CHECK(expand_sweep(plain).size() == 1);
}

TEST_CASE("VTK structured points round-trip is bit exact") {
  std::mt19937_64 rng(123);
  StructuredGrid grid;
  grid.dim = 3;
  grid.dims = {4, 4, 4};
  grid.spacing = {0.25, 0.25, 0.25};
  std::vector<double> values(64);
  for (double& v : values) {
    v = 2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0;
    v *= std::pow(10.0, static_cast<int>(rng() % 7) - 3);
  }
  grid.fields.emplace_back("phase", values);
  std::vector<double> second(64, 1.0 / 3.0);
  grid.fields.emplace_back("extra", second);

  const auto path = temp_path("scaffopt_roundtrip.vtk");
  write_structured_points(path.string(), grid);
  const StructuredGrid back = read_structured_points(path.string());
  CHECK(back.dim == 3);
  CHECK(back.dims == grid.dims);
  CHECK(back.spacing == grid.spacing);
  REQUIRE(back.fields.size() == 2);
  CHECK(back.fields[0].first == "phase");
  for (std::size_t i = 0; i < values.size(); ++i) {
    CHECK(back.fields[0].second[i] == values[i]);  // bitwise
    CHECK(back.fields[1].second[i] == second[i]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("periodic tiling") {
  // tile=1 is the identity
  std::vector<double> values = {1.0, 2.0, 3.0, 4.0};
  CHECK(tile_periodic(values, 2, 2, 1) == values);

  // constant fields stay constant on the tiled grid
  std::vector<double> constant(9, 0.5);
  const auto tiled = tile_periodic(constant, 2, 3, 3);
  CHECK(tiled.size() == 81);
  for (double v : tiled) CHECK(v == 0.5);

  // lookup at any tiled point equals the single-cell lookup at x mod 1
  std::mt19937_64 rng(7);
  std::vector<double> field(16);
  for (double& v : field) v = (rng() >> 11) * 0x1.0p-53;
  const int cells = 4, tile = 3;
  const auto big = tile_periodic(field, 2, cells, tile);
  for (int j = 0; j < cells * tile; ++j) {
    for (int i = 0; i < cells * tile; ++i) {
      CHECK(big[j * cells * tile + i] == field[(j % cells) * cells + (i % cells)]);
    }
  }
}
