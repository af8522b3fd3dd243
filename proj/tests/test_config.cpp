// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "gacoop/config.hpp"

using namespace gacoop;

namespace {
ErrorKind kind_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::ContractViolation;
}
}  // namespace

TEST(Config, EmptyGivesDefaults) {
  EXPECT_EQ(parse_config(""), default_config());
  EXPECT_EQ(parse_config("# only a comment\n\n"), default_config());
}

TEST(Config, Defaults) {
  const Config c = default_config();
  EXPECT_EQ(c.train.epochs, 50u);
  EXPECT_EQ(c.train.lr, 0.002);
  EXPECT_EQ(c.train.batch_size, 32u);
  EXPECT_EQ(c.train.lambda, 0.25);
  EXPECT_EQ(c.train.tau, 0.01);
  EXPECT_EQ(c.train.context_length, 16u);
  EXPECT_EQ(c.train.effective_k_rank(20), 10u);
  EXPECT_EQ(c.synth.n_classes, 20u);
  EXPECT_EQ(c.synth.n_regions, 9u);
}

TEST(Config, Overrides) {
  const Config c = parse_config("lambda = 0.5\nstrategy=locoop  # trailing\nk_rank = 3\nseed = 9\n");
  EXPECT_EQ(c.train.lambda, 0.5);
  EXPECT_EQ(c.train.strategy, Strategy::LoCoOp);
  EXPECT_EQ(c.train.effective_k_rank(20), 3u);
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.synth.seed, 9u);
}

TEST(Config, Errors) {
  EXPECT_EQ(kind_of("lr = -1"), ErrorKind::Config);
  EXPECT_EQ(kind_of("epochs = 0"), ErrorKind::Config);
  EXPECT_EQ(kind_of("beta = 1.5"), ErrorKind::Config);
  EXPECT_EQ(kind_of("unknown_key = 1"), ErrorKind::Config);
  EXPECT_EQ(kind_of("lambda = 1\nlambda = 2"), ErrorKind::Config);
  EXPECT_EQ(kind_of("lambda"), ErrorKind::Config);
  EXPECT_EQ(kind_of("lambda = abc"), ErrorKind::Config);
  EXPECT_EQ(kind_of("batch_size = -3"), ErrorKind::Config);
  EXPECT_EQ(kind_of("strategy = sgd"), ErrorKind::Config);
}

TEST(Config, ErrorNamesTheField) {
  try {
    parse_config("\nlr = -1\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("lr"), std::string::npos);
  }
}

TEST(Config, DumpRoundTrips) {
  Config c = default_config();
  c.train.lambda = 0.1 + 0.2;  // not exactly representable in short decimal
  c.train.k_rank = 4;
  c.train.strategy = Strategy::GaCoOp;
  c.train.add_ood_gradient = true;
  c.train.prompt_init_zeros = true;
  c.synth.beta = 1.0 / 3.0;
  c.synth.seed = c.train.seed = 123;
  EXPECT_EQ(parse_config(dump_config(c)), c);
  EXPECT_EQ(parse_config(dump_config(default_config())), default_config());
}
