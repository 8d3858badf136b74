#include <gtest/gtest.h>

#include "spnet/errors.hpp"
#include "spnet/gradcheck.hpp"

namespace spnet {
namespace {

class GradcheckTargets : public ::testing::TestWithParam<std::string> {};

TEST_P(GradcheckTargets, Passes) {
  const std::uint64_t seeds = GetParam() == "model" ? 1 : 3;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    const auto problem = make_gradcheck_problem(GetParam(), seed);
    const GradcheckReport r = gradcheck(*problem);
    EXPECT_TRUE(r.passed()) << r.to_text();
    for (const auto& e : r.entries) EXPECT_LT(e.max_relative_error, kGradcheckTolerance) << e.name;
  }
}

INSTANTIATE_TEST_SUITE_P(All, GradcheckTargets, ::testing::ValuesIn(gradcheck_targets()),
                         [](const auto& info) { return info.param; });

TEST(Gradcheck, FlagsASignFlip) {
  const auto problem = make_gradcheck_problem("spconv", 1);
  GradcheckOptions opt;
  opt.tamper = [](ParameterList<double>& tensors) {
    for (auto* t : tensors) {
      if (t->name.find("w1") != std::string::npos) t->grad = -t->grad;
    }
  };
  const GradcheckReport r = gradcheck(*problem, opt);
  EXPECT_FALSE(r.passed());
  bool flagged = false;
  for (const auto& e : r.entries) {
    if (e.name.find("w1") != std::string::npos) {
      EXPECT_FALSE(e.passed);
      flagged = true;
    } else {
      EXPECT_TRUE(e.passed) << e.name;
    }
  }
  EXPECT_TRUE(flagged);
}

TEST(Gradcheck, FlagsAScaledGradient) {
  const auto problem = make_gradcheck_problem("attention", 2);
  GradcheckOptions opt;
  opt.tamper = [](ParameterList<double>& tensors) { tensors.front()->grad *= 1.001; };
  EXPECT_FALSE(gradcheck(*problem, opt).passed());
}

TEST(Gradcheck, UnknownTargetIsRejected) {
  EXPECT_THROW(make_gradcheck_problem("nonsense", 0), ParameterError);
}

}  // namespace
}  // namespace spnet
