#include <string>

#include <gtest/gtest.h>

#include "pendular/config.hpp"

namespace pendular::config {
namespace {

const std::string kConfigDir = PENDULAR_SOURCE_DIR "/configs/";

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"go1.toml", "pointmass.toml", "pointmass_zmp.toml"}) {
    const auto cfg = load_run_config(kConfigDir + name);
    EXPECT_NO_THROW(cfg.validate()) << name;
  }
  const auto go1 = load_run_config(kConfigDir + "go1.toml");
  EXPECT_DOUBLE_EQ(go1.robot.lx, 0.188);
  EXPECT_EQ(go1.scenario.sway.size(), 2u);
  EXPECT_EQ(go1.stance().size(), 4u);
}

TEST(Config, TomlRoundTrip) {
  auto cfg = load_run_config(kConfigDir + "go1.toml");
  cfg.weights.alpha_grid = {1, 3.5, 1e5};
  cfg.scenario.offset = Vec3(0.1, -0.2, 1.0 / 3.0);
  cfg.seed = 42;
  const std::string text = to_toml(cfg);
  const auto back = parse_run_config(text);
  EXPECT_EQ(to_toml(back), text);
  EXPECT_EQ(back.weights.alpha_grid, cfg.weights.alpha_grid);
  EXPECT_EQ(back.scenario.offset, cfg.scenario.offset);
  EXPECT_EQ(back.seed, 42u);
}

TEST(Config, DocumentValues) {
  const auto doc = parse_document("a = 1.5\n[s]\nb = true # note\nc = \"x#y\"\nd = [1, 2]\ne = [\"p\", \"q\"]\n");
  EXPECT_DOUBLE_EQ(std::get<double>(doc.at("").at("a").value), 1.5);
  EXPECT_TRUE(std::get<bool>(doc.at("s").at("b").value));
  EXPECT_EQ(std::get<std::string>(doc.at("s").at("c").value), "x#y");
  EXPECT_EQ(std::get<std::vector<double>>(doc.at("s").at("d").value).size(), 2u);
  EXPECT_EQ(std::get<std::vector<std::string>>(doc.at("s").at("e").value)[1], "q");
  EXPECT_EQ(doc.at("s").at("e").line, 6);
  EXPECT_EQ(doc.at("s").at("").line, 2);
}

void expect_error(const std::string& text, int line, const std::string& field) {
  try {
    parse_run_config(text);
    FAIL() << "expected ConfigError for:\n" << text;
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
    EXPECT_EQ(e.field(), field) << e.what();
  }
}

TEST(Config, ErrorsNameLineAndField) {
  expect_error("[robot]\nmass = -3\n", 2, "robot.mass");
  expect_error("[robot]\nmass = 3\nfoo = 1\n", 3, "robot.foo");
  expect_error("[nope]\n", 1, "nope");
  expect_error("[weights]\nalpha = \"big\"\n", 2, "weights.alpha");
  expect_error("[robot]\nstance = \"tripod\"\n", 2, "robot.stance");
  expect_error("[scenario]\nsway_axis = [\"x\"]\nsway_amplitude = [0.1, 0.2]\nsway_frequency = [1]\n", 2,
               "scenario.sway_axis");
  expect_error("[robot]\nmass = 3\n[robot]\n", 3, "robot");
  expect_error("[robot]\nmass = \n", 2, "robot.mass");
}

TEST(Config, MissingFile) {
  EXPECT_THROW(load_run_config("/nonexistent/run.toml"), ConfigError);
}

}  // namespace
}  // namespace pendular::config
