#include <gtest/gtest.h>

#include <functional>

#include "bier/config.hpp"
#include "bier/errors.hpp"

namespace bier {
namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

TEST(ConfigText, ParsesKeysCommentsAndBlankLines) {
  RunConfig c;
  apply_config_text(c,
                    "# experiment\n"
                    "learners = 4   # trailing comment\n"
                    "\n"
                    "  lr=0.005\n"
                    "diversity = adversarial\n"
                    "group_sizes = 2, 4, 8, 18\n"
                    "backbone_trainable = false\n");
  EXPECT_EQ(c.train.learners, 4u);
  EXPECT_EQ(c.train.optim.lr, 0.005);
  EXPECT_EQ(c.train.diversity, DiversityKind::adversarial);
  EXPECT_EQ(c.train.group_sizes, (std::vector<std::size_t>{2, 4, 8, 18}));
  EXPECT_EQ(c.train.partition_source, PartitionSource::explicit_sizes);
  EXPECT_FALSE(c.train.backbone_trainable);
}

TEST(ConfigText, ErrorsCarrySourceAndLine) {
  RunConfig c;
  const std::string unknown = error_of([&] { apply_config_text(c, "lr = 0.1\nbogus = 3\n", "run.cfg"); });
  EXPECT_NE(unknown.find("run.cfg line 2"), std::string::npos) << unknown;
  EXPECT_NE(unknown.find("bogus"), std::string::npos);
  const std::string value = error_of([&] { apply_config_text(c, "\n\nlearners = many\n"); });
  EXPECT_NE(value.find("line 3"), std::string::npos) << value;
  EXPECT_THROW(apply_config_text(c, "just words\n"), InvalidArgument);
  EXPECT_THROW(apply_config_text(c, "= 4\n"), InvalidArgument);
  EXPECT_THROW(apply_config_text(c, "shuffle_classes = maybe\n"), InvalidArgument);
  EXPECT_THROW(apply_config_file(c, "/nonexistent/bier.cfg"), IoError);
}

TEST(ConfigOverride, KeyEqualsValue) {
  RunConfig c;
  apply_override(c, "seed=42");
  EXPECT_EQ(c.train.seed, 42u);
  EXPECT_EQ(c.synth.seed, 42u);
  EXPECT_EQ(c.split.seed, 42u);
  apply_override(c, "lambda_div=0.25");
  EXPECT_EQ(c.train.lambda_div, 0.25);
  apply_override(c, "lambda_div=auto");
  EXPECT_FALSE(c.train.lambda_div.has_value());
  EXPECT_THROW(apply_override(c, "seed"), InvalidArgument);
  EXPECT_THROW(apply_override(c, "colour=red"), InvalidArgument);
}

TEST(ConfigDump, RoundTripsEveryKey) {
  RunConfig c;
  apply_config_text(c,
                    "lr = 0.0123456789\nloss = triplet\ngroup_sizes = 3,5\nks = 1,5\nsim_normalizer = target\n"
                    "split_mode = within_class\nnoise = 0.3\nreverse_target_path = false\n");
  const std::string dumped = dump_config(c);
  RunConfig back;
  apply_config_text(back, dumped, "dump");
  for (const ConfigKey& k : config_keys()) {
    EXPECT_EQ(get_config_value(back, k.name), get_config_value(c, k.name)) << k.name;
  }
  RunConfig defaults;
  RunConfig reloaded;
  apply_config_text(reloaded, dump_config(defaults));
  EXPECT_EQ(dump_config(reloaded), dump_config(defaults));
}

TEST(ConfigKeys, ReferenceListsEveryKey) {
  const std::string ref = config_reference();
  for (const ConfigKey& k : config_keys()) {
    EXPECT_NE(ref.find(std::string(k.name) + " = "), std::string::npos) << k.name;
    EXPECT_FALSE(k.help.empty());
  }
  EXPECT_THROW(get_config_value(RunConfig{}, "nope"), InvalidArgument);
}

TEST(ConfigValidate, RejectsBadCombinations) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  apply_override(c, "threads=0");
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = RunConfig{};
  apply_override(c, "train_fraction=1.5");
  EXPECT_THROW(c.validate(), InvalidArgument);
}

}  // namespace
}  // namespace bier
