#include <gtest/gtest.h>

#include "ddist/config.hpp"

using namespace ddist;

TEST(Config, ParseKeyValues) {
  const auto kv = parse_key_values("# top\n a.b = 1 \n\nc.d=x y # trailing\n");
  EXPECT_EQ(kv.at("a.b"), "1");
  EXPECT_EQ(kv.at("c.d"), "x y");
  EXPECT_THROW(parse_key_values("novalue\n"), Error);
  EXPECT_THROW(parse_key_values(" = 3\n"), Error);
}

TEST(Config, AppliesEverySection) {
  const auto c = config_from_text(
      "targets.alpha = 0.2\nnet.depth = 2\nnet.heads = single-outer\ntrain.max_epochs = 7\n"
      "detect.h = 0.3\ndetect.connectivity = 4\nsegment.min_marker_area = 12\n"
      "eval.h_candidates = 0.1, 0.3\nsynth.shape = disk\n");
  EXPECT_EQ(c.targets.alpha, 0.2);
  EXPECT_EQ(c.net.depth, 2);
  ASSERT_EQ(c.net.heads.size(), 1u);
  EXPECT_EQ(c.net.heads[0].name, HeadName::Outer);
  EXPECT_EQ(c.train.max_epochs, 7);
  EXPECT_EQ(c.detect.h, 0.3);
  EXPECT_EQ(c.detect.connectivity, Connectivity::Four);
  EXPECT_EQ(c.segment.min_marker_area, 12);
  EXPECT_EQ(c.eval.h_candidates, (std::vector<double>{0.1, 0.3}));
  EXPECT_EQ(c.synth.shape, CellShape::Disk);
}

TEST(Config, HeadListAndWeights) {
  const auto c = config_from_text("net.classification_weight = 0.5\nnet.heads = inner, classification\n");
  ASSERT_EQ(c.net.heads.size(), 2u);
  EXPECT_EQ(c.net.heads[1].name, HeadName::Classification);
  EXPECT_EQ(c.net.heads[1].loss_weight, 0.5);
}

TEST(Config, Errors) {
  PipelineConfig c;
  EXPECT_THROW(c.set("net.width", "3"), Error);
  EXPECT_THROW(c.set("net.depth", "three"), Error);
  EXPECT_THROW(c.set("detect.connectivity", "6"), Error);
  EXPECT_THROW(c.set("net.heads", "inner,edges"), Error);
}

TEST(Config, SeedReachesEveryComponent) {
  PipelineConfig c;
  c.set_seed(99);
  EXPECT_EQ(c.net.seed, 99u);
  EXPECT_EQ(c.train.seed, 99u);
  EXPECT_EQ(c.synth.seed, 99u);
}
