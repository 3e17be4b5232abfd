#include <gtest/gtest.h>

#include <sstream>

#include "treecal/config.hpp"
#include "treecal/csv.hpp"
#include "treecal/random.hpp"
#include "treecal/synthetic_data.hpp"

namespace {

using namespace treecal;

TEST(FormatDouble, ShortestRoundTrip) {
  Rng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.below(30)) - 15);
    double back;
    ASSERT_TRUE(parse_double(format_double(v), back));
    ASSERT_EQ(back, v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(1.0), "1");
}

TEST(DatasetCsv, RoundTripIsExact) {
  const auto data = generate_dataset(500, 1.0, 3);
  std::stringstream ss;
  write_dataset_csv(ss, data);
  const auto back = read_dataset_csv(ss);
  EXPECT_EQ(back.n_features, 10u);
  EXPECT_EQ(back.features, data.features);
  EXPECT_EQ(back.labels, data.labels);
  EXPECT_EQ(*back.true_probs, *data.true_probs);
}

TEST(DatasetCsv, HeaderLayout) {
  std::stringstream ss;
  write_dataset_csv(ss, generate_dataset(0, 1.0, 1));
  EXPECT_EQ(ss.str(), "x1,x2,x3,x4,x5,x6,x7,x8,x9,x10,label,true_prob\n");
}

TEST(DatasetCsv, TrueProbColumnIsOptional) {
  std::istringstream is("x1,x2,label\n0.5,1,1\n-2,3e-1,0\n");
  const auto d = read_dataset_csv(is);
  EXPECT_EQ(d.n_features, 2u);
  EXPECT_FALSE(d.true_probs.has_value());
  EXPECT_EQ(d.features, (std::vector<double>{0.5, 1, -2, 0.3}));
  EXPECT_EQ(d.labels, (std::vector<std::uint8_t>{1, 0}));
}

TEST(DatasetCsv, MalformedRowsCiteLine) {
  auto fails_at = [](const std::string& text, const std::string& where) {
    std::istringstream is(text);
    try {
      read_dataset_csv(is);
    } catch (const parse_error& e) {
      return std::string(e.what()).find(where) != std::string::npos;
    }
    return false;
  };
  EXPECT_TRUE(fails_at("x1,label\n1,0\n2,2\n", "line 3"));
  EXPECT_TRUE(fails_at("x1,label\n1,0\nabc,1\n", "line 3"));
  EXPECT_TRUE(fails_at("x1,label\n1,0,5\n", "line 2"));
  EXPECT_TRUE(fails_at("x1,label,true_prob\n1,0,1.5\n", "line 2"));
  EXPECT_TRUE(fails_at("x2,label\n", "line 1"));
  EXPECT_TRUE(fails_at("", "line 1"));
}

TEST(KeyValueConfig, ParsesCommentsAndOverrides) {
  std::istringstream is("# sweep\nn_train = 1000\n\nbetas = 0.1, 0.2  # two rates\nn_train=2000\n");
  const auto kv = KeyValueConfig::parse(is);
  ASSERT_EQ(kv.entries().size(), 2u);
  SweepConfig cfg;
  apply_config(cfg, kv);
  EXPECT_EQ(cfg.n_train, 2000u);
  EXPECT_EQ(cfg.betas, (std::vector<double>{0.1, 0.2}));
}

TEST(KeyValueConfig, ErrorsNameTheField) {
  std::istringstream bad("no equals sign\n");
  EXPECT_THROW(KeyValueConfig::parse(bad), parse_error);

  std::istringstream unknown("n_train = 5\nbogus = 1\n");
  SweepConfig cfg;
  try {
    apply_config(cfg, KeyValueConfig::parse(unknown));
    FAIL();
  } catch (const config_error& e) {
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  std::istringstream badnum("n_trees = many\n");
  try {
    apply_config(cfg, KeyValueConfig::parse(badnum));
    FAIL();
  } catch (const config_error& e) {
    EXPECT_NE(std::string(e.what()).find("n_trees"), std::string::npos);
  }
  BiasStudyConfig bias;
  std::istringstream ok("prevalence_targets = 0.5,0.1\nn_replicates = 4\n");
  apply_config(bias, KeyValueConfig::parse(ok));
  EXPECT_EQ(bias.n_replicates, 4u);
  EXPECT_EQ(bias.prevalence_targets.size(), 2u);
}

} // namespace
