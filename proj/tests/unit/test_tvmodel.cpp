#include "ida/tvmodel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace ida;
using namespace ida::tv;

TEST(EvalParam, FunctionShapes) {
  const double quadr[] = {1.0, 0.0, 0.0};
  for (double t : {-5.0, -1.0, 0.0, 2.0}) EXPECT_EQ(eval_param(FuncKind::Quadr, quadr, t), 1.0);
  const double lin[] = {2.0, 1.0};
  EXPECT_EQ(eval_param(FuncKind::Lin, lin, -3.0), -1.0);
  const double expon[] = {0.5, 0.0, 1.0};
  EXPECT_EQ(eval_param(FuncKind::Expon, expon, 0.0), 1.5);
  const double q2[] = {1.0, 2.0, 3.0};
  EXPECT_DOUBLE_EQ(eval_param(FuncKind::Quadr, q2, -2.0), 1.0 - 4.0 + 12.0);
}

TEST(EvalParam, OverflowIsInfeasible) {
  const double expon[] = {0.0, 800.0, 1.0};
  EXPECT_THROW(eval_param(FuncKind::Expon, expon, 0.0), ParameterInfeasibleError);
  EXPECT_FALSE(std::isfinite(eval_param_unchecked(FuncKind::Expon, expon, 0.0)));
}

TEST(Complexity, Ordering) {
  EXPECT_EQ(complexity(FuncKind::Const), 1);
  EXPECT_EQ(complexity(FuncKind::Lin), 2);
  EXPECT_EQ(complexity(FuncKind::Quadr), 3);
  EXPECT_EQ(complexity(FuncKind::Expon), 3);
}

TEST(Enumerate, ThirtySevenUniqueModels) {
  const auto models = enumerate_models();
  ASSERT_EQ(models.size(), 37u);
  std::set<std::string> names;
  int per_family[4] = {0, 0, 0, 0};
  for (const auto& m : models) {
    names.insert(m.name());
    ++per_family[static_cast<int>(m.family())];
    EXPECT_LE(m.parameter_count(), 8u);
    if (m.shape_kind()) EXPECT_LE(complexity(*m.shape_kind()), complexity(m.rate_kind()));
  }
  EXPECT_EQ(names.size(), 37u);
  EXPECT_EQ(per_family[0], 4);
  EXPECT_EQ(per_family[1], 11);
  EXPECT_EQ(per_family[2], 11);
  EXPECT_EQ(per_family[3], 11);
}

TEST(Enumerate, ComplexityRuleMembership) {
  std::set<std::string> names;
  for (const auto& m : enumerate_models()) names.insert(m.name());
  EXPECT_TRUE(names.count("Gamma.Lin.Const"));
  EXPECT_FALSE(names.count("Gamma.Const.Lin"));
  for (const char* f : {"Gamma", "GenGam", "GenF"}) {
    EXPECT_TRUE(names.count(std::string(f) + ".Quadr.Expon"));
    EXPECT_TRUE(names.count(std::string(f) + ".Expon.Quadr"));
  }
  EXPECT_TRUE(names.count("Exp.Expon"));
}

TEST(ModelSpec, NamesParseBack) {
  for (const auto& m : enumerate_models()) {
    const auto back = ModelSpec::parse(m.name());
    EXPECT_EQ(back, m);
    EXPECT_EQ(back.name(), m.name());
  }
}

TEST(ModelSpec, RejectsBadNames) {
  EXPECT_THROW(ModelSpec::parse("Gamma.Const.Lin"), std::invalid_argument);
  EXPECT_THROW(ModelSpec::parse("Exp.Const.Const"), std::invalid_argument);
  EXPECT_THROW(ModelSpec::parse("Gamma.Const"), std::invalid_argument);
  EXPECT_THROW(ModelSpec::parse("Weibull.Const.Const"), std::invalid_argument);
  EXPECT_THROW(ModelSpec::parse("Gamma.Cubic.Const"), std::invalid_argument);
}

TEST(ModelSpec, ParameterLayout) {
  const auto m = ModelSpec::parse("GenF.Expon.Lin");
  EXPECT_EQ(m.parameter_count(), 3u + 2u + 2u);
  EXPECT_EQ(m.shape_offset(), 3u);
  EXPECT_EQ(m.q_index(), 5u);
  EXPECT_EQ(m.p_index(), 6u);
  const auto e = ModelSpec::parse("Exp.Quadr");
  EXPECT_EQ(e.parameter_count(), 3u);
  EXPECT_FALSE(e.q_index());
  const auto g = ModelSpec::parse("GenGam.Const.Const");
  EXPECT_EQ(g.parameter_count(), 3u);
  EXPECT_EQ(g.q_index(), 2u);
  EXPECT_FALSE(g.p_index());
}

TEST(ModelSpec, Bounds) {
  const auto b = ModelSpec::parse("GenF.Lin.Const").bounds();
  ASSERT_EQ(b.size(), 5u);
  EXPECT_EQ(b[0].lower, 1e-6);
  EXPECT_EQ(b[0].upper, 1e6);
  EXPECT_EQ(b[1].lower, -1e4);
  EXPECT_EQ(b[1].upper, 1e4);
  EXPECT_EQ(b[3].lower, -5.0);
  EXPECT_EQ(b[3].upper, 5.0);
  EXPECT_EQ(b[4].lower, 0.0);
  EXPECT_EQ(b[4].upper, 50.0);
}

TEST(Instantiate, GammaWithUnitShapeIsExponential) {
  const auto spec = ModelSpec::parse("Gamma.Const.Const");
  const double theta[] = {3.0, 1.0};
  for (double t : {-3.0, -1.0}) {
    const auto p = std::get<dist::GammaParams>(instantiate(spec, theta, t));
    EXPECT_EQ(p.shape, 1.0);
    EXPECT_EQ(p.rate, 3.0);
    EXPECT_NEAR(dist::log_pdf(p, 0.4), dist::log_pdf(dist::ExpParams{3.0}, 0.4), 1e-14);
  }
}

TEST(Instantiate, GenGammaMapping) {
  const auto spec = ModelSpec::parse("GenGam.Const.Const");
  const double theta[] = {2.0, 4.0, 0.3};
  const auto p = std::get<dist::GenGammaParams>(instantiate(spec, theta, -2.0));
  EXPECT_NEAR(p.mu, std::log(2.0), 1e-15);
  EXPECT_NEAR(p.sigma, 0.5, 1e-15);
  EXPECT_EQ(p.q, 0.3);
}

TEST(Instantiate, ExponentialRateFunction) {
  const auto spec = ModelSpec::parse("Exp.Expon");
  const double theta[] = {0.5, 0.0, 1.0};
  EXPECT_EQ(std::get<dist::ExpParams>(instantiate(spec, theta, 0.0)).rate, 1.5);
}

TEST(Instantiate, ConstantModelIsTimeInvariant) {
  const auto spec = ModelSpec::parse("Exp.Const");
  const double theta[] = {7.5};
  EXPECT_EQ(std::get<dist::ExpParams>(instantiate(spec, theta, -3.0)).rate,
            std::get<dist::ExpParams>(instantiate(spec, theta, -0.6)).rate);
}

TEST(Instantiate, NonPositiveParameterIsInfeasible) {
  const auto spec = ModelSpec::parse("Gamma.Lin.Const");
  const double theta[] = {1.0, 1.0, 2.0};  // beta(t) = 1 + t
  EXPECT_NO_THROW(instantiate(spec, theta, -0.5));
  EXPECT_THROW(instantiate(spec, theta, -2.0), ParameterInfeasibleError);
  EXPECT_FALSE(try_instantiate(spec, theta, -2.0).has_value());
  EXPECT_FALSE(feasible_on_grid(spec, theta, -3.25, -0.5));
  const double ok[] = {5.0, 1.0, 2.0};
  EXPECT_TRUE(feasible_on_grid(spec, ok, -3.25, -0.5));
}

TEST(Instantiate, WrongLengthThrows) {
  const auto spec = ModelSpec::parse("Gamma.Lin.Const");
  const double theta[] = {1.0, 1.0};
  EXPECT_THROW(instantiate(spec, theta, -1.0), std::invalid_argument);
}

TEST(Instantiate, FeasibleThetaValidOnWholeGrid) {
  std::mt19937_64 rng(5);
  for (const auto& spec : enumerate_models()) {
    std::vector<double> theta;
    auto push_func = [&](FuncKind k, double level) {
      switch (k) {
        case FuncKind::Const: theta.push_back(level); break;
        case FuncKind::Lin: theta.insert(theta.end(), {level * 1.5, 0.1 * level}); break;
        case FuncKind::Quadr: theta.insert(theta.end(), {level, -0.05 * level, 0.01 * level}); break;
        case FuncKind::Expon: theta.insert(theta.end(), {0.2 * level, std::log(level), 0.3}); break;
      }
    };
    push_func(spec.rate_kind(), 80.0);
    if (spec.shape_kind()) push_func(*spec.shape_kind(), 0.7);
    if (spec.q_index()) theta.push_back(0.4);
    if (spec.p_index()) theta.push_back(0.8);
    ASSERT_TRUE(feasible_on_grid(spec, theta, -3.25, -0.5)) << spec.name();
    for (int j = 0; j <= 165; ++j) {
      const auto p = instantiate(spec, theta, -3.25 + j / 60.0);
      EXPECT_TRUE(dist::is_valid(p)) << spec.name();
    }
  }
}
