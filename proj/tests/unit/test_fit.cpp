#include "ida/fit.hpp"
#include "ida/sim.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace ida;
using tv::ModelSpec;

namespace {

const fit::FitWindow kWindow{};

ingest::InterArrivalSample iid_sample(const dist::DistParams& p, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  ingest::InterArrivalSample s;
  s.days = 1;
  double t = kWindow.start;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = dist::sample(p, rng);
    s.spells.push_back({x, t});
    t = std::fmod(t + x - kWindow.start, kWindow.end - kWindow.start) + kWindow.start;
  }
  return s;
}

// Days of arrivals from a known model, sliced like the backtest does.
ingest::InterArrivalSample model_sample(const ModelSpec& spec, std::vector<double> theta, int days,
                                        std::uint64_t seed) {
  const fit::FittedModel truth{spec, std::move(theta), 0.0, 0, 0, kWindow,
                               fit::ParamTime::SpellStart, {}, {}};
  ingest::InterArrivalSample all;
  for (int d = 0; d < days; ++d) {
    RngStream rng(derive_seed(seed, {static_cast<std::uint64_t>(d)}));
    ingest::ArrivalSeries series{ingest::Date{}, 1, {}, -9.0, kWindow.end};
    series.arrivals = sim::simulate_one(truth, -9.0, -9.0, kWindow.end, rng);
    all.append(ingest::slice_window(series, kWindow.start));
  }
  return all;
}

// One term at a time, straight from the kernels.
double naive_log_likelihood(const ModelSpec& spec, const std::vector<double>& theta,
                            const ingest::InterArrivalSample& s) {
  long double sum = 0.0L;
  for (const auto& sp : s.spells) {
    sum += dist::log_pdf(tv::instantiate(spec, theta, kWindow.clamp(sp.t)), sp.x);
  }
  return static_cast<double>(sum);
}

fit::FitOptions quick() {
  fit::FitOptions o;
  o.restarts = 1;
  return o;
}

}  // namespace

TEST(LogLikelihood, ExpAnalytic) {
  ingest::InterArrivalSample s{{{0.5, -3.0}, {0.5, -2.5}}, 1};
  const std::vector<double> theta{2.0};
  EXPECT_NEAR(fit::log_likelihood(ModelSpec::parse("Exp.Const"), theta, s, kWindow),
              2.0 * (std::log(2.0) - 1.0), 1e-12);
}

TEST(LogLikelihood, GammaWithUnitShapeIsExp) {
  const auto s = iid_sample(dist::ExpParams{7.0}, 300, 3);
  for (double lambda : {0.3, 7.0, 150.0}) {
    const std::vector<double> e{lambda};
    const std::vector<double> g{lambda, 1.0};
    EXPECT_NEAR(fit::log_likelihood(ModelSpec::parse("Gamma.Const.Const"), g, s, kWindow),
                fit::log_likelihood(ModelSpec::parse("Exp.Const"), e, s, kWindow), 1e-9);
  }
}

TEST(LogLikelihood, MatchesNaiveSummationForAllModels) {
  ida::testing::ParamGenerator gen(11);
  ingest::InterArrivalSample s;
  s.days = 1;
  for (int i = 0; i < 100; ++i) {
    s.spells.push_back({gen.log_uniform(1e-4, 0.5), gen.uniform(-5.0, -0.4)});
  }
  for (const auto& spec : tv::enumerate_models()) {
    for (auto pt : {fit::ParamTime::SpellStart, fit::ParamTime::SpellEnd}) {
      // Constants dominate so every draw is feasible over the window.
      std::vector<double> theta(spec.parameter_count());
      const auto fill = [&](std::size_t off, tv::FuncKind k, double c) {
        theta[off] = c;
        if (k == tv::FuncKind::Expon) {
          theta[off + 1] = gen.uniform(-1.0, 1.0);
          theta[off + 2] = gen.uniform(-0.5, 0.5);
        } else {
          for (int j = 1; j < tv::complexity(k); ++j) theta[off + j] = gen.uniform(-0.05, 0.05) * c;
        }
      };
      fill(spec.rate_offset(), spec.rate_kind(), gen.log_uniform(5.0, 200.0));
      if (spec.shape_kind()) fill(spec.shape_offset(), *spec.shape_kind(), gen.log_uniform(0.5, 3.0));
      if (spec.q_index()) theta[*spec.q_index()] = gen.uniform(-1.5, 1.5);
      if (spec.p_index()) theta[*spec.p_index()] = gen.log_uniform(0.05, 3.0);

      double oracle = 0.0;
      for (const auto& sp : s.spells) {
        const double t = pt == fit::ParamTime::SpellStart ? sp.t : sp.t + sp.x;
        oracle += dist::log_pdf(tv::instantiate(spec, theta, kWindow.clamp(t)), sp.x);
      }
      const double ll = fit::log_likelihood(spec, theta, s, kWindow, pt);
      EXPECT_NEAR(ll, oracle, 1e-10 * std::max(1.0, std::abs(oracle))) << spec.name();
    }
  }
}

TEST(LogLikelihood, InfeasibleThetaIsMinusInfinity) {
  ingest::InterArrivalSample s{{{0.1, -3.0}, {0.2, -1.0}}, 1};
  const std::vector<double> bad{1.0, 10.0};  // 1 + 10 t < 0 on the window
  EXPECT_EQ(fit::log_likelihood(ModelSpec::parse("Exp.Lin"), bad, s, kWindow),
            -std::numeric_limits<double>::infinity());
  const std::vector<double> wrong{1.0};
  EXPECT_THROW(fit::log_likelihood(ModelSpec::parse("Exp.Lin"), wrong, s, kWindow),
               std::invalid_argument);
}

TEST(Fit, ExpConstClosedForm) {
  ingest::InterArrivalSample s{{{0.5, -3.0}, {0.5, -2.5}, {0.5, -2.0}, {0.5, -1.5}}, 1};
  fit::FitOptions o;
  o.min_obs_per_param = 1.0;
  const auto m = fit::fit(ModelSpec::parse("Exp.Const"), s, kWindow, o);
  EXPECT_NEAR(m.theta[0], 2.0, 2e-6);
  EXPECT_EQ(fit::exp_const_rate(s), 2.0);
}

TEST(Fit, ExpConstMatchesClosedFormOnRandomSamples) {
  ida::testing::ParamGenerator gen(5);
  for (int r = 0; r < 10; ++r) {
    const auto s = iid_sample(dist::ExpParams{gen.log_uniform(1.0, 500.0)}, 200, 100 + r);
    const auto m = fit::fit(ModelSpec::parse("Exp.Const"), s, kWindow, {});
    EXPECT_NEAR(m.theta[0] / fit::exp_const_rate(s), 1.0, 1e-6);
  }
}

TEST(Fit, GammaRecovery) {
  const auto s = iid_sample(dist::GammaParams{2.0, 3.0}, 50000, 17);
  const auto m = fit::fit(ModelSpec::parse("Gamma.Const.Const"), s, kWindow, quick());
  // Layout is [rate | shape].
  EXPECT_NEAR(m.theta[1], 2.0, 0.1);
  EXPECT_NEAR(m.theta[0], 3.0, 0.15);
}

TEST(Fit, GenGamAtLeastMappedTruth) {
  const auto s = iid_sample(dist::GammaParams{4.0, 2.0}, 5000, 23);
  const auto spec = ModelSpec::parse("GenGam.Const.Const");
  const auto m = fit::fit(spec, s, kWindow, quick());
  double truth = 0.0;
  for (const auto& sp : s.spells) truth += dist::log_pdf(dist::GenGammaParams{std::log(2.0), 0.5, 0.5}, sp.x);
  EXPECT_GE(m.log_likelihood, truth - 2.0);
}

TEST(Fit, ReportedLikelihoodIsRecomputable) {
  const auto spec = ModelSpec::parse("Gamma.Expon.Lin");
  const auto s = model_sample(spec, {20, 4.5, 0.5, 0.8, 0.1}, 6, 1);
  fit::CascadeFitter fitter(s, kWindow, quick());
  const auto& m = fitter.get(spec);
  EXPECT_NEAR(m.log_likelihood, naive_log_likelihood(spec, m.theta, s),
              1e-8 * std::abs(m.log_likelihood));
  EXPECT_TRUE(tv::feasible_on_grid(spec, m.theta, kWindow.start, kWindow.end));
  EXPECT_EQ(m.observations, s.size());
  EXPECT_EQ(m.days, 6u);
}

TEST(Fit, Deterministic) {
  const auto spec = ModelSpec::parse("GenGam.Lin.Const");
  const auto s = model_sample(ModelSpec::parse("Gamma.Lin.Const"), {120, 20, 0.7}, 3, 2);
  const auto a = fit::fit(spec, s, kWindow, quick());
  const auto b = fit::fit(spec, s, kWindow, quick());
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.log_likelihood, b.log_likelihood);
}

TEST(Fit, InsufficientData) {
  ingest::InterArrivalSample s{{{0.1, -3.0}, {0.2, -2.0}, {0.3, -1.0}}, 1};
  EXPECT_THROW(fit::fit(ModelSpec::parse("Exp.Const"), s, kWindow, {}), fit::InsufficientDataError);
}

TEST(Cascade, NestedMaximaAreOrdered) {
  const auto s = model_sample(ModelSpec::parse("Gamma.Lin.Const"), {120, 20, 0.7}, 4, 9);
  fit::CascadeFitter fitter(s, kWindow, quick());
  for (const char* yz : {"Const.Const", "Lin.Const", "Lin.Lin"}) {
    const std::string y = std::string(yz).substr(0, std::string(yz).find('.'));
    const double exp_ll = fitter.get(ModelSpec::parse("Exp." + y)).log_likelihood;
    const double gamma = fitter.get(ModelSpec::parse(std::string("Gamma.") + yz)).log_likelihood;
    const double gengam = fitter.get(ModelSpec::parse(std::string("GenGam.") + yz)).log_likelihood;
    const double genf = fitter.get(ModelSpec::parse(std::string("GenF.") + yz)).log_likelihood;
    EXPECT_GE(gamma, exp_ll - 1e-4) << yz;
    EXPECT_GE(gengam, gamma - 1e-4) << yz;
    EXPECT_GE(genf, gengam - 1e-4) << yz;
  }
}

TEST(Cascade, RicherFunctionsNeverLoseLikelihood) {
  const auto s = model_sample(ModelSpec::parse("Exp.Expon"), {40, 4.0, 0.6}, 4, 4);
  fit::CascadeFitter fitter(s, kWindow, quick());
  const double c = fitter.get(ModelSpec::parse("Exp.Const")).log_likelihood;
  const double l = fitter.get(ModelSpec::parse("Exp.Lin")).log_likelihood;
  const double q = fitter.get(ModelSpec::parse("Exp.Quadr")).log_likelihood;
  const double e = fitter.get(ModelSpec::parse("Exp.Expon")).log_likelihood;
  EXPECT_GE(l, c - 1e-4);
  EXPECT_GE(q, l - 1e-4);
  EXPECT_GE(e, c - 1e-4);
  // Data from an exponential trend fit it better than a constant.
  EXPECT_GT(e, c + 10.0);
}

TEST(Cascade, FallsBackToDonorWhenDataAreShort) {
  const auto s = iid_sample(dist::ExpParams{50.0}, 50, 8);
  fit::CascadeFitter fitter(s, kWindow, quick());
  const auto& m = fitter.get(ModelSpec::parse("Gamma.Lin.Lin"));  // 4 params need 40
  EXPECT_FALSE(m.diagnostics.fallback);
  const auto& fb = fitter.get(ModelSpec::parse("GenF.Lin.Lin"));  // 6 params need 60
  EXPECT_TRUE(fb.diagnostics.fallback);
  EXPECT_FALSE(fb.diagnostics.donor.empty());
  EXPECT_TRUE(std::isfinite(fb.log_likelihood));
  EXPECT_NEAR(fb.log_likelihood, naive_log_likelihood(fb.spec, fb.theta, s), 1e-8 * std::abs(fb.log_likelihood));
  EXPECT_THROW(fit::CascadeFitter(iid_sample(dist::ExpParams{5.0}, 5, 1), kWindow, {})
                   .get(ModelSpec::parse("Exp.Const")),
               fit::InsufficientDataError);
}

TEST(Donors, CascadeEdges) {
  const auto names = [](const char* model) {
    std::vector<std::string> out;
    for (const auto& d : fit::donors(ModelSpec::parse(model))) out.push_back(d.name());
    return out;
  };
  EXPECT_TRUE(names("Exp.Const").empty());
  EXPECT_EQ(names("Exp.Quadr"), (std::vector<std::string>{"Exp.Lin"}));
  EXPECT_EQ(names("Exp.Expon"), (std::vector<std::string>{"Exp.Const"}));
  EXPECT_EQ(names("Gamma.Lin.Const"), (std::vector<std::string>{"Exp.Lin", "Gamma.Const.Const"}));
  EXPECT_EQ(names("Gamma.Quadr.Quadr"), (std::vector<std::string>{"Gamma.Quadr.Lin"}));
  EXPECT_EQ(names("GenGam.Lin.Lin"),
            (std::vector<std::string>{"Gamma.Lin.Lin", "GenGam.Lin.Const"}));
  EXPECT_EQ(names("GenF.Expon.Expon"), (std::vector<std::string>{"GenGam.Expon.Expon"}));
}

TEST(Embed, NestedModelsKeepTheDensity) {
  ida::testing::ParamGenerator gen(3);
  const struct {
    const char* from;
    std::vector<double> theta;
    const char* to;
  } cases[] = {
      {"Exp.Const", {30.0}, "Exp.Lin"},
      {"Exp.Lin", {30.0, 2.0}, "Exp.Quadr"},
      {"Exp.Const", {30.0}, "Gamma.Const.Const"},
      {"Exp.Lin", {30.0, 2.0}, "Gamma.Lin.Const"},
      {"Gamma.Lin.Const", {30.0, 2.0, 1.7}, "Gamma.Lin.Lin"},
      {"Gamma.Lin.Const", {30.0, 2.0, 1.7}, "GenGam.Lin.Const"},
      {"GenGam.Quadr.Lin", {30.0, 2.0, 0.1, 1.5, 0.05, 0.4}, "GenF.Quadr.Lin"},
      {"Gamma.Expon.Const", {30.0, 1.0, 0.2, 0.8}, "GenF.Expon.Const"},
  };
  for (const auto& c : cases) {
    const auto from = ModelSpec::parse(c.from);
    const auto to = ModelSpec::parse(c.to);
    auto theta = fit::embed(from, c.theta, to, kWindow);
    if (to.family() == dist::Family::GenF && from.family() != dist::Family::GenGam) {
      // Two hops: Gamma -> GenGam -> GenF.
      const ModelSpec mid(dist::Family::GenGam, from.rate_kind(), from.shape_kind());
      theta = fit::embed(mid, fit::embed(from, c.theta, mid, kWindow), to, kWindow);
    }
    ASSERT_EQ(theta.size(), to.parameter_count()) << c.from << " -> " << c.to;
    for (double t : {-3.25, -2.0, -0.6}) {
      for (double x : {1e-3, 0.02, 0.3}) {
        EXPECT_NEAR(dist::log_pdf(tv::instantiate(to, theta, t), x),
                    dist::log_pdf(tv::instantiate(from, c.theta, t), x), 1e-9)
            << c.from << " -> " << c.to;
      }
    }
  }
}

TEST(Embed, ConstToExponIsClose) {
  const auto theta = fit::embed(ModelSpec::parse("Exp.Const"), std::vector<double>{30.0},
                                ModelSpec::parse("Exp.Expon"), kWindow);
  ASSERT_EQ(theta.size(), 3u);
  for (double t : {-3.0, -1.0}) {
    EXPECT_NEAR(tv::eval_param(tv::FuncKind::Expon, theta, t), 30.0, 1e-9);
  }
  EXPECT_TRUE(fit::embed(ModelSpec::parse("Exp.Quadr"), std::vector<double>{1, 2, 3},
                         ModelSpec::parse("Exp.Lin"), kWindow)
                  .empty());
}

TEST(FittedModelJson, RoundTrip) {
  const auto spec = ModelSpec::parse("GenF.Lin.Const");
  const auto s = model_sample(ModelSpec::parse("Gamma.Lin.Const"), {120, 20, 0.7}, 2, 5);
  fit::CascadeFitter fitter(s, kWindow, quick());
  auto m = fitter.get(spec);
  m.fingerprint = "abc";
  const auto text = fit::to_json(m);
  const auto back = fit::fitted_model_from_json(text);
  EXPECT_EQ(back.spec.name(), spec.name());
  EXPECT_EQ(back.theta, m.theta);
  EXPECT_EQ(back.log_likelihood, m.log_likelihood);
  EXPECT_EQ(back.fingerprint, "abc");
  EXPECT_EQ(back.observations, m.observations);
  EXPECT_EQ(fit::to_json(back), text);
  EXPECT_THROW(fit::fitted_model_from_json(R"({"format":"ida.fitted_model","version":99})"),
               std::exception);
  EXPECT_THROW(fit::fitted_model_from_json("not json"), std::exception);
}
