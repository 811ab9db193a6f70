#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "naslab/archspace.hpp"
#include "naslab/autograd.hpp"
#include "naslab/errors.hpp"
#include "support/gradcheck.hpp"

using namespace naslab;
using namespace naslab::arch;

namespace {

SearchSpaceDef singleton_dense() {
  SearchSpaceDef s;
  s.id = "single";
  s.kind = SpaceKind::Dense;
  s.op_vocabulary = {"linear"};
  s.depth_range = {3, 3};
  s.width_choices = {5};
  s.input_shape = {4};
  s.num_classes = 3;
  return s;
}

std::size_t brute_force_params(const ag::NetworkInstance& net) {
  std::size_t n = 0;
  for (const auto& node : net.nodes()) {
    for (const auto& p : node.params) n += p.value.values().size();
  }
  return n;
}

std::vector<double> all_weights(const ag::NetworkInstance& net) {
  std::vector<double> out;
  for (const auto& node : net.nodes()) {
    for (const auto& p : node.params) out.insert(out.end(), p.value.values().begin(), p.value.values().end());
  }
  return out;
}

}  // namespace

TEST(Sampling, SingletonSpaceAlwaysYieldsTheUniqueGenotype) {
  const auto s = singleton_dense();
  const auto first = sample_genotype(s, 0);
  EXPECT_EQ(first.depth(), 3);
  for (std::uint64_t seed = 1; seed < 50; ++seed) EXPECT_EQ(sample_genotype(s, seed), first);
  EXPECT_EQ(enumerate_space(s).size(), 1u);
}

TEST(Sampling, DeterministicPerSeed) {
  for (const auto& name : builtin_space_names()) {
    const auto s = builtin_space(name);
    EXPECT_EQ(serialize(sample_genotype(s, 42)), serialize(sample_genotype(s, 42))) << name;
    EXPECT_TRUE(contains(s, sample_genotype(s, 42)));
  }
}

TEST(Sampling, OpFrequenciesUniformWithinThreeSigma) {
  const auto s = builtin_space("toy-micro");
  std::map<std::string, std::size_t> counts;
  const std::size_t draws = 10000;
  for (std::uint64_t seed = 0; seed < draws; ++seed) {
    const auto genotype = sample_genotype(s, seed);
    for (const auto& g : genotype.genes()) ++counts[g.op];
  }
  const double n = draws * 6.0, p = 1.0 / 5.0;
  const double sigma = std::sqrt(n * p * (1 - p));
  ASSERT_EQ(counts.size(), 5u);
  for (const auto& [op, c] : counts) EXPECT_LT(std::abs(c - n * p), 3 * sigma) << op;
}

TEST(Sampling, DepthFollowsGenotypeCounts) {
  // toy-macro: 6^3 genotypes of depth 3 and 6^4 of depth 4
  const auto s = builtin_space("toy-macro");
  std::size_t deep = 0;
  const std::size_t draws = 7000;
  for (std::uint64_t seed = 0; seed < draws; ++seed) deep += sample_genotype(s, seed).depth() == 4;
  const double p = 1296.0 / (216.0 + 1296.0);
  EXPECT_LT(std::abs(deep - draws * p), 3 * std::sqrt(draws * p * (1 - p)));
}

TEST(Sampling, EmptyVocabularyIsConfigError) {
  auto s = singleton_dense();
  s.op_vocabulary.clear();
  EXPECT_THROW(sample_genotype(s, 0), ConfigError);
  EXPECT_THROW(builtin_space("nope"), ConfigError);
}

TEST(Instantiate, XavierUniformBound) {
  ag::NetworkBuilder b({4});
  b.linear(ag::kNetworkInput, 4, false);
  auto net = std::move(b).build();
  initialize(net, {InitKind::XavierUniform, 9});
  for (double w : net.param(0, 0).values()) EXPECT_LE(std::abs(w), std::sqrt(6.0 / 8.0));
  EXPECT_NEAR(std::sqrt(6.0 / 8.0), 0.866, 1e-3);
}

TEST(Instantiate, StrategiesChangeParametersNotGraph) {
  const auto s = builtin_space("toy-micro");
  const auto g = sample_genotype(s, 3);
  const auto a = instantiate(s, g, {InitKind::KaimingUniform, 1});
  const auto b = instantiate(s, g, {InitKind::XavierNormal, 1});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.node(i).kind, b.node(i).kind);
    EXPECT_EQ(a.node(i).inputs, b.node(i).inputs);
    EXPECT_EQ(a.node(i).output_shape, b.node(i).output_shape);
  }
  EXPECT_NE(all_weights(a), all_weights(b));
  EXPECT_EQ(all_weights(a), all_weights(instantiate(s, g, {InitKind::KaimingUniform, 1})));
  EXPECT_NE(all_weights(a), all_weights(instantiate(s, g, {InitKind::KaimingUniform, 2})));
}

TEST(Counts, ClosedFormExamples) {
  ag::NetworkBuilder lin({8});
  lin.linear(ag::kNetworkInput, 3, true);
  EXPECT_EQ(count_params(std::move(lin).build()), 27u);

  ag::NetworkBuilder conv({3, 6, 6});
  conv.conv2d(ag::kNetworkInput, 8, 3, 1, std::nullopt, true);
  auto cnet = std::move(conv).build();
  EXPECT_EQ(count_params(cnet), 224u);
  EXPECT_EQ(count_flops(cnet, {3, 6, 6}), 3u * 8 * 9 * 36);

  ag::NetworkBuilder pool({2, 4, 4});
  pool.global_avg_pool(pool.avg_pool(ag::kNetworkInput, 2, 2, 0));
  auto pnet = std::move(pool).build();
  EXPECT_EQ(count_params(pnet), 0u);
  EXPECT_EQ(count_flops(pnet, {2, 4, 4}), 0u);
  EXPECT_THROW(count_flops(pnet, {2, 5, 5}), PreconditionError);
}

TEST(Counts, MatchBruteForceOverLayerTensors) {
  auto s = builtin_space("toy-micro");
  s.cells = 4;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto net = instantiate(s, sample_genotype(s, seed), {InitKind::KaimingNormal, seed});
    EXPECT_EQ(count_params(net), brute_force_params(net));
  }
  for (const auto& name : builtin_space_names()) {
    const auto sp = builtin_space(name);
    const auto net = instantiate(sp, sample_genotype(sp, 5), {});
    EXPECT_EQ(count_params(net), brute_force_params(net)) << name;
  }
}

TEST(Genotype, SerializeRoundTrip) {
  for (const auto& name : builtin_space_names()) {
    const auto s = builtin_space(name);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const auto g = sample_genotype(s, seed);
      const auto back = parse_genotype(serialize(g));
      EXPECT_EQ(back, g);
      EXPECT_EQ(back.hash(), g.hash());
      EXPECT_EQ(serialize(back), serialize(g));
    }
  }
  EXPECT_EQ(serialize(ArchGenotype("toy-micro", {{"conv3x3", 8}, {"skip", 8}})),
            R"({"space":"toy-micro","depth":2,"genes":[{"op":"conv3x3","width":8},{"op":"skip","width":8}]})");
  EXPECT_THROW(parse_genotype("{\"space\":1}"), DataError);
  EXPECT_THROW(parse_genotype("not json"), DataError);
}

TEST(Genotype, HashInjectiveOverEnumeratedSpaces) {
  for (const auto& name : builtin_space_names()) {
    const auto s = builtin_space(name);
    const auto all = enumerate_space(s);
    EXPECT_EQ(static_cast<double>(all.size()), s.size()) << name;
    std::set<std::uint64_t> hashes;
    std::set<std::string> texts;
    for (const auto& g : all) {
      hashes.insert(g.hash());
      texts.insert(serialize(g));
    }
    EXPECT_EQ(hashes.size(), all.size()) << name;
    EXPECT_EQ(texts.size(), all.size()) << name;
  }
  EXPECT_THROW(enumerate_space(builtin_space("toy-micro"), 100), ConfigError);
}

TEST(Instantiate, EveryGenotypeOfSmallSpaceRuns) {
  const auto s = builtin_space("toy-micro-4op");
  const auto all = enumerate_space(s);
  ASSERT_EQ(all.size(), 4096u);
  Shape batch_shape{4};
  batch_shape.insert(batch_shape.end(), s.input_shape.begin(), s.input_shape.end());
  const Tensor x = naslab::testing::random_tensor(batch_shape, 1);
  const Tensor y = naslab::testing::class_labels(4, s.num_classes, 2);
  for (const auto& g : all) {
    const auto net = instantiate(s, g, {InitKind::KaimingNormal, g.hash()});
    const auto pass = ag::forward(net, x, y, ag::LossKind::CrossEntropy);
    ASSERT_TRUE(std::isfinite(pass.loss())) << serialize(g);
    int expect = 1;
    for (const auto& node : net.nodes()) {
      if (ag::is_parameterized(node.kind)) EXPECT_EQ(node.depth_index, expect++);
    }
  }
}

TEST(Spaces, JsonOverridesAndRoundTrip) {
  const auto base = builtin_space("toy-macro");
  EXPECT_EQ(space_to_json(space_from_json(nlohmann::json::parse(space_to_json(base).dump()))), space_to_json(base));
  const auto s = space_from_json(nlohmann::json::parse(R"({"base":"toy-macro","id":"wide","widths":[16],"activation":"gelu"})"));
  EXPECT_EQ(s.id, "wide");
  EXPECT_EQ(s.width_choices, std::vector<int>{16});
  EXPECT_EQ(s.activation, ag::Activation::GeLU);
  EXPECT_THROW(space_from_json(nlohmann::json::parse(R"({"base":"toy-macro","activation":"tanh"})")), ConfigError);
}

TEST(Spaces, SyntheticAccuracyDeterministicAndZeroizedCellsFloor) {
  const auto s = builtin_space("toy-micro");
  std::vector<Gene> dead(6, Gene{"zeroize", 8});
  const ArchGenotype g("toy-micro", dead);
  EXPECT_EQ(synthetic_accuracy(s, g), synthetic_accuracy(s, g));
  std::vector<Gene> convs(6, Gene{"conv3x3", 8});
  EXPECT_GT(synthetic_accuracy(s, ArchGenotype("toy-micro", convs)), synthetic_accuracy(s, g) + 40);
}
