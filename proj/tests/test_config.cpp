#include <doctest.h>

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "spoofbreak/config.hpp"
#include "test_util.hpp"

using namespace spoofbreak;
using nlohmann::json;

TEST_CASE("defaults are the documented operating point") {
  config::RunConfig cfg;
  CHECK(cfg.data.target_sample_rate == 16000);
  CHECK(cfg.data.frame_len == 5980);
  CHECK(cfg.generator.stage_widths == std::vector<int>({64, 128, 256, 128}));
  CHECK(cfg.generator.alpha_init == 0.01);
  CHECK(cfg.generator.highpass_cutoff_hz == 30.0);
  CHECK(cfg.generator.highpass_taps == 101);
  CHECK(cfg.discriminator.channels == 64);
  CHECK(cfg.losses.lambda1 == 1.0);
  CHECK(cfg.losses.lambda2 == 0.0001);
  CHECK(cfg.losses.lambda3 == 1.0);
  CHECK(cfg.losses.lambda4 == 0.01);
  CHECK(cfg.losses.adversarial_form == "non_saturating");
  CHECK(cfg.training.batch_size == 16);
  CHECK(cfg.training.seed == 7);
  CHECK(cfg.evaluation.threshold == 0.5);
  REQUIRE(cfg.ensemble.members.size() == 2);
  CHECK(cfg.ensemble.members[0].family == "res_tssdnet_like");
  CHECK(cfg.ensemble.members[1].family == "inc_tssdnet_like");
  CHECK_NOTHROW(config::validate(cfg));
}

TEST_CASE("partial json overlays defaults") {
  json j = {{"training", {{"batch_size", 4}, {"seed", 99}}},
            {"losses", {{"lambda2", 0.5}}}};
  config::RunConfig cfg = config::from_json(j);
  CHECK(cfg.training.batch_size == 4);
  CHECK(cfg.training.seed == 99);
  CHECK(cfg.losses.lambda2 == 0.5);
  CHECK(cfg.losses.lambda1 == 1.0);             // untouched
  CHECK(cfg.data.target_sample_rate == 16000);  // untouched section
}

TEST_CASE("unknown keys are rejected with their dotted path") {
  json j = {{"training", {{"batch_sze", 4}}}};
  CHECK_THROWS_WITH_AS(config::from_json(j),
                       doctest::Contains("training.batch_sze"), ConfigError);
  json top = {{"trainning", json::object()}};
  CHECK_THROWS_WITH_AS(config::from_json(top), doctest::Contains("trainning"),
                       ConfigError);
}

TEST_CASE("validation failures carry the offending path") {
  json j = {{"losses", {{"lambda1", -1.0}}}};
  CHECK_THROWS_WITH_AS(config::from_json(j), doctest::Contains("losses.lambda1"),
                       ConfigError);

  config::RunConfig cfg;
  cfg.training.batch_size = 1;  // discriminator batch norm needs >= 2
  CHECK_THROWS_AS(config::validate(cfg), ConfigError);

  cfg = config::RunConfig{};
  cfg.losses.adversarial_form = "bogus";
  CHECK_THROWS_AS(config::validate(cfg), ConfigError);

  cfg = config::RunConfig{};
  cfg.generator.highpass_taps = 100;  // must be odd
  CHECK_THROWS_AS(config::validate(cfg), ConfigError);

  cfg = config::RunConfig{};
  cfg.generator.stage_widths = {64, 128};  // needs four stages
  CHECK_THROWS_AS(config::validate(cfg), ConfigError);

  cfg = config::RunConfig{};
  cfg.data.frame_len = 8;  // too short for the discriminator pools
  CHECK_THROWS_AS(config::validate(cfg), ConfigError);

  cfg = config::RunConfig{};
  cfg.ensemble.members.clear();
  CHECK_THROWS_AS(config::validate(cfg), ConfigError);
}

TEST_CASE("file round trip preserves every field") {
  const std::string dir = testutil::scratch_dir("config_roundtrip");
  config::RunConfig cfg;
  cfg.training.total_steps = 1234;
  cfg.losses.lambda2 = 0.025;
  cfg.ensemble.members[0].model_id = "alpha";
  cfg.ensemble.members[0].weights_path = "w/alpha.sbck";
  cfg.evaluation.lambda2_grid = {0.5, 0.25};
  config::write_config_file(cfg, dir + "/cfg.json");
  config::RunConfig back = config::load_config_file(dir + "/cfg.json");
  CHECK(back == cfg);
  CHECK_FALSE(back == config::RunConfig{});
}

TEST_CASE("empty config file yields pure defaults") {
  const std::string dir = testutil::scratch_dir("config_empty");
  std::ofstream(dir + "/empty.json") << "\n";
  config::RunConfig cfg = config::load_config_file(dir + "/empty.json");
  CHECK(cfg == config::RunConfig{});
}

TEST_CASE("overrides rewrite nested fields and parse json values") {
  json doc = json::object();
  config::apply_override(doc, "losses.lambda2=0.001");
  config::apply_override(doc, "training.batch_size=8");
  config::apply_override(doc, "losses.adversarial_form=paper");
  config::apply_override(doc, "generator.stage_widths=[8,16,32,16]");
  config::RunConfig cfg = config::from_json(doc);
  CHECK(cfg.losses.lambda2 == 0.001);
  CHECK(cfg.training.batch_size == 8);
  CHECK(cfg.losses.adversarial_form == "paper");
  CHECK(cfg.generator.stage_widths == std::vector<int>({8, 16, 32, 16}));

  CHECK_THROWS_AS(config::apply_override(doc, "no_equals_sign"), ConfigError);
  CHECK_THROWS_AS(config::apply_override(doc, "=5"), ConfigError);
}

TEST_CASE("to_json materializes every section") {
  json j = config::to_json(config::RunConfig{});
  for (const char* key : {"data", "generator", "discriminator", "ensemble",
                          "transcription", "losses", "training", "evaluation"})
    CHECK(j.contains(key));
  CHECK(j["losses"]["lambda2"] == 0.0001);
  CHECK(j["ensemble"]["members"].size() == 2);
  // the echo parses back to the same config
  CHECK(config::from_json(j) == config::RunConfig{});
}
