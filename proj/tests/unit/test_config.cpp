#include <gtest/gtest.h>

#include "nestco/config.hpp"
#include "nestco/error.hpp"

using namespace nestco;
using namespace nestco::pipeline;

TEST(Config, DefaultsMatchTrainingRecipe) {
  ExperimentConfig c;
  c.validate();
  EXPECT_EQ(c.stage1.sgd.momentum, 0.9);
  EXPECT_EQ(c.stage1.sgd.weight_decay, 5e-4);
  EXPECT_EQ(c.stage1.epochs, 30u);
  EXPECT_EQ(c.stage2.epochs, 30u);
  EXPECT_NEAR(c.stage2.sgd.schedule.base_lr, c.stage1.sgd.schedule.base_lr / 10, 1e-15);
  EXPECT_EQ(c.stage2.sgd.schedule.warmup_iters, 0u);
  EXPECT_TRUE(c.stage2.freeze_bn);
  EXPECT_EQ(c.stage2.coteach.lambda_forget, 0.3);
  EXPECT_EQ(c.sigma_nest, 200.0);
  EXPECT_EQ(c.toy.points, 64u);
  EXPECT_EQ(c.toy.epochs, 100000u);
}

TEST(Config, NestedSectionFoldsIntoStages) {
  ExperimentConfig c;
  c.sigma_nest = 50;
  c.model.width = 64;
  auto s1 = c.stage1_config();
  ASSERT_TRUE(s1.nested);
  EXPECT_EQ(s1.nested->sigma_nest, 50.0);
  EXPECT_EQ(s1.nested->channels, 64u);
  c.nested_enabled = false;
  EXPECT_FALSE(c.stage1_config().nested);
  EXPECT_FALSE(c.stage2_config().nested);
}

TEST(Config, ParseIniAndOverride) {
  auto c = parse_config(
      "[data]\nseparation = 4.5\nnoise = pairflip\n"
      "[stage1]\nlr = 0.05\ndecay = 3:0.5\n"
      "[stage2]\nlambda_forget = 0.2\nschedule = gradual\ngradual_epochs = 4\n"
      "[ablation]\nsigmas = 10, 20\n");
  EXPECT_EQ(c.data.separation, 4.5);
  EXPECT_EQ(c.data.noise, NoiseKind::pairflip);
  EXPECT_EQ(c.stage1.sgd.schedule.base_lr, 0.05);
  ASSERT_EQ(c.stage1.sgd.schedule.decay.size(), 1u);
  EXPECT_EQ(c.stage1.sgd.schedule.decay[0].first, 3u);
  EXPECT_EQ(c.stage2.coteach.lambda_forget, 0.2);
  EXPECT_EQ(c.stage2.coteach.schedule, coteach::ForgetSchedule::gradual);
  EXPECT_EQ(c.ablation.sigmas, (std::vector<double>{10, 20}));
  apply_override(c, "stage1.lr=0.1");
  EXPECT_EQ(c.stage1.sgd.schedule.base_lr, 0.1);
}

TEST(Config, EveryKeyRoundTripsThroughIni) {
  ExperimentConfig c;
  apply_override(c, "toy.optimizer=sgd");
  apply_override(c, "stage2.selection_forward=sampled_mask");
  apply_override(c, "stage1.decay=none");
  auto back = parse_config(to_ini(c));
  EXPECT_EQ(to_json(back), to_json(c));
  const auto doc = to_json(c);
  for (const auto& key : config_keys()) {
    const auto dot = key.find('.');
    ASSERT_NE(dot, std::string::npos) << key;
    EXPECT_TRUE(doc.contains(key.substr(0, dot)) &&
                doc[key.substr(0, dot)].contains(key.substr(dot + 1)))
        << key;
  }
}

TEST(Config, Errors) {
  ExperimentConfig c;
  EXPECT_THROW(apply_override(c, "stage1.nonsense=1"), ValidationError);
  EXPECT_THROW(apply_override(c, "stage1.lr"), ValidationError);
  EXPECT_THROW(apply_override(c, "stage1.lr=fast"), ValidationError);
  EXPECT_THROW(apply_override(c, "data.noise=sometimes"), ValidationError);
  EXPECT_THROW(parse_config("[stage2]\nwarmup_iters = 10\n"), ValidationError);
  EXPECT_THROW(parse_config("[stage1\nlr = 1\n"), ParseError);
}
