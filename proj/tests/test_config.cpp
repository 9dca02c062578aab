#include <gtest/gtest.h>

#include "psipde/config.hpp"

using namespace psipde;

namespace {

ErrorCode code_of(const std::string& text) {
  try {
    config_from_toml(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST(Toml, ParsesScalarsArraysAndComments) {
  const auto doc = parse_toml(R"(# leading comment
[run]
system = "kdv"   # trailing
seed = 1_000
noise = 0.25
flag = true
list = [1, 2.5, "x"]
[a.b]
e = -3e-2
)");
  EXPECT_EQ(std::get<std::string>(doc.at("run.system").v), "kdv");
  EXPECT_EQ(std::get<std::int64_t>(doc.at("run.seed").v), 1000);
  EXPECT_DOUBLE_EQ(std::get<double>(doc.at("run.noise").v), 0.25);
  EXPECT_TRUE(std::get<bool>(doc.at("run.flag").v));
  const auto& list = std::get<TomlArray>(doc.at("run.list").v);
  ASSERT_EQ(list.size(), 3u);
  EXPECT_EQ(std::get<std::int64_t>(list[0].v), 1);
  EXPECT_EQ(std::get<std::string>(list[2].v), "x");
  EXPECT_DOUBLE_EQ(std::get<double>(doc.at("a.b.e").v), -0.03);
}

TEST(Toml, SyntaxErrorsAreConfigErrors) {
  for (const char* bad : {"[run\nseed = 1", "seed 1", "x = \"open", "x = 1\nx = 2", "[t]\n[t]", "x = [1, 2"}) {
    try {
      parse_toml(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::config_error) << bad;
      EXPECT_NE(std::string(e.what()).find("line"), std::string::npos) << e.what();
    }
  }
}

TEST(Config, ValuesLandInTheirFields) {
  const auto c = config_from_toml(R"(
[run]
system = "burgers2d"
seed = 9
noise = 0.2
formats = ["json"]
[denoise]
enabled = false
hidden = [16, 8]
[featlib]
scheme = "poly_interp"
[fft]
cutoff_fraction = 0.3
[select]
n_val = 200
stop_rule = "both"
[refine]
max_iters = 5
ic_source = "from_data"
[stridge]
lambda = 0.1
)");
  EXPECT_EQ(c.system, SystemKind::burgers2d);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_DOUBLE_EQ(c.noise, 0.2);
  EXPECT_EQ(c.formats, std::vector<std::string>{"json"});
  EXPECT_FALSE(c.denoise_enabled);
  EXPECT_EQ(c.denoise.hidden, (std::vector<int>{16, 8}));
  EXPECT_EQ(c.diff.scheme, DiffScheme::poly_interp);
  EXPECT_DOUBLE_EQ(c.cutoff_fraction, 0.3);
  EXPECT_EQ(c.select.n_val, 200);
  EXPECT_EQ(c.select.stop_rule, StopRule::both);
  EXPECT_EQ(c.refine.max_iters, 5);
  EXPECT_EQ(c.ic_source, "from_data");
  EXPECT_DOUBLE_EQ(c.stridge.lambda, 0.1);
}

TEST(Config, UnknownKeysAndBadTypesAreRejected) {
  EXPECT_EQ(code_of("[run]\nsede = 3"), ErrorCode::config_error);
  EXPECT_EQ(code_of("[nope]\nx = 1"), ErrorCode::config_error);
  EXPECT_EQ(code_of("[run]\nseed = \"three\""), ErrorCode::config_error);
  EXPECT_EQ(code_of("[run]\nnoise = 2.0"), ErrorCode::config_error);
  EXPECT_EQ(code_of("[run]\nsystem = \"navier\""), ErrorCode::config_error);
  EXPECT_EQ(code_of("[select]\nn_val = 3"), ErrorCode::config_error);
  EXPECT_EQ(code_of("[fft]\ncutoff_fraction = 0"), ErrorCode::config_error);
}

TEST(Config, IntegersAreAcceptedForFloats) {
  EXPECT_DOUBLE_EQ(config_from_toml("[run]\nnoise = 0").noise, 0.0);
  EXPECT_DOUBLE_EQ(config_from_toml("[fft]\ncutoff_fraction = 1").cutoff_fraction, 1.0);
}

TEST(Config, DefaultsRoundTrip) {
  const auto text = default_config_toml();
  const auto parsed = config_from_toml(text);
  const auto d = PipelineConfig::defaults();
  EXPECT_EQ(parsed.seed, d.seed);
  EXPECT_EQ(parsed.cutoff_fraction, d.cutoff_fraction);
  EXPECT_EQ(parsed.select.n_val, d.select.n_val);
  EXPECT_EQ(parsed.denoise.hidden, d.denoise.hidden);
  EXPECT_EQ(parsed.refine.max_iters, d.refine.max_iters);
  EXPECT_EQ(parsed.stridge.d_tol, d.stridge.d_tol);
  EXPECT_EQ(default_config_toml(), text);
  EXPECT_EQ(config_from_toml("").seed, d.seed);
}
