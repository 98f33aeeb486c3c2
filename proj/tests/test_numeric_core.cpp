#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "das/grad_check.hpp"
#include "das/param_store.hpp"
#include "das/random.hpp"

using namespace das;

namespace {

Var weighted(const Var& y, std::vector<double> w) { return sum_all(mul(y, constant(Tensor(y.shape(), std::move(w))))); }

}  // namespace

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  Tensor t(Shape{2, 3});
  EXPECT_THROW(t.at(2, 0), ShapeError);
  EXPECT_THROW(t.reshaped(Shape{4}), ShapeError);
  EXPECT_EQ(t.reshaped(Shape{3, 2}).shape(), (Shape{3, 2}));
}

TEST(Ops, SoftplusOfZeroIsLn2) {
  EXPECT_NEAR(softplus(constant(Tensor::scalar(0.0))).value().item(), std::log(2.0), 1e-15);
  EXPECT_NEAR(softplus(constant(Tensor::scalar(800.0))).value().item(), 800.0, 1e-12);
  EXPECT_NEAR(softplus(constant(Tensor::scalar(-800.0))).value().item(), 0.0, 1e-300);
}

TEST(Ops, SoftmaxIsShiftInvariant) {
  for (double c : {-50.0, 0.0, 3.5, 700.0}) {
    const Tensor p = softmax(constant(Tensor::vector({c, c, c})), 0).value();
    for (double v : p.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  }
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
  try {
    add(constant(Tensor(Shape{2, 3})), constant(Tensor(Shape{4})));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4]"), std::string::npos) << msg;
  }
  EXPECT_THROW(matmul(constant(Tensor(Shape{2, 3})), constant(Tensor(Shape{2, 3}))), ShapeError);
}

TEST(Ops, NonFiniteResultIsANumericFault) {
  EXPECT_THROW(log(constant(Tensor::vector({1.0, 0.0}))), NumericFault);
  EXPECT_THROW(exp(constant(Tensor::scalar(1000.0))), NumericFault);
  EXPECT_THROW(div(constant(Tensor::scalar(1.0)), constant(Tensor::scalar(0.0))), NumericFault);
}

TEST(Ops, BroadcastValues) {
  const Tensor a(Shape{2, 1}, std::vector<double>{1, 2});
  const Tensor b(Shape{3}, std::vector<double>{10, 20, 30});
  const Tensor s = add(constant(a), constant(b)).value();
  EXPECT_EQ(s.shape(), (Shape{2, 3}));
  EXPECT_EQ(s.storage(), (std::vector<double>{11, 21, 31, 12, 22, 32}));
}

TEST(Ops, MatmulMatchesLoops) {
  RandomStream rs(7);
  const Tensor a = sample_normal(rs, Shape{2, 3, 4});
  const Tensor b = sample_normal(rs, Shape{4, 5});
  const Tensor c = matmul(constant(a), constant(b)).value();
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t q = 0; q < 5; ++q) {
        double s = 0.0;
        for (std::size_t m = 0; m < 4; ++m) s += a.at(i, r, m) * b.at(m, q);
        EXPECT_NEAR(c.at(i, r, q), s, 1e-12);
      }
}

TEST(Ops, ReductionsAndConcat) {
  const Tensor x(Shape{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(sum(constant(x), 0).value().storage(), (std::vector<double>{5, 7, 9}));
  EXPECT_EQ(mean(constant(x), 1, true).value().shape(), (Shape{2, 1}));
  EXPECT_DOUBLE_EQ(mean(constant(x), 1).value()[1], 5.0);
  EXPECT_DOUBLE_EQ(sum_all(constant(x)).value().item(), 21.0);
  const Tensor c = concat({constant(x), constant(x)}, 1).value();
  EXPECT_EQ(c.shape(), (Shape{2, 6}));
  EXPECT_EQ(c.storage(), (std::vector<double>{1, 2, 3, 1, 2, 3, 4, 5, 6, 4, 5, 6}));
}

TEST(Ops, DerivativesMatchFiniteDifferencesAtFixedPoint) {
  const Tensor point = Tensor::vector({0.3, -1.2, 2.0});
  const std::vector<double> w{0.7, -1.1, 0.4};
  EXPECT_LT(grad_check([&](const Var& x) { return weighted(softmax(x, 0), w); }, point), 1e-6);
  EXPECT_LT(grad_check([&](const Var& x) { return weighted(softplus(x), w); }, point), 1e-6);
  EXPECT_LT(grad_check([&](const Var& x) { return weighted(sigmoid(x), w); }, point), 1e-6);
}

TEST(Backward, SumGivesOnes) {
  Var x = parameter(Tensor::vector({1, 2, 3}));
  backward(sum_all(x));
  EXPECT_EQ(x.grad().storage(), (std::vector<double>{1, 1, 1}));
}

TEST(Backward, SumOfSquares) {
  Var x = parameter(Tensor::vector({1, 2, 3}));
  backward(sum_all(mul(x, x)));
  EXPECT_EQ(x.grad().storage(), (std::vector<double>{2, 4, 6}));
}

TEST(Backward, FanOutAccumulates) {
  Var x = parameter(Tensor::scalar(0.8));
  backward(add(x, x));
  EXPECT_EQ(x.grad().item(), 2.0);
}

TEST(Backward, DetachBlocksGradient) {
  Var x = parameter(Tensor::vector({1.5, -0.5}));
  backward(sum_all(add(mul(detach(x), x), detach(mul(x, x)))));
  // d/dx [stop(x) * x] = stop(x); the fully detached term contributes nothing.
  EXPECT_EQ(x.grad().storage(), (std::vector<double>{1.5, -0.5}));
  Var y = parameter(Tensor::scalar(2.0));
  backward(sum_all(detach(mul(y, y))));
  EXPECT_EQ(y.grad().item(), 0.0);
}

TEST(Backward, NonScalarRootIsAnError) {
  Var x = parameter(Tensor::vector({1, 2}));
  EXPECT_THROW(backward(mul(x, x)), ShapeError);
}

TEST(Backward, StraightThroughPassesSoftGradient) {
  Var soft = parameter(Tensor::vector({0.2, 0.5, 0.3}));
  const Tensor hard = Tensor::vector({0, 1, 0});
  Var st = straight_through(hard, soft);
  EXPECT_EQ(st.value(), hard);
  backward(weighted(st, {3, 5, 7}));
  EXPECT_EQ(soft.grad().storage(), (std::vector<double>{3, 5, 7}));
}

TEST(Backward, ThreeLayerMlpMatchesFiniteDifferences) {
  RandomStream rs(11);
  ParameterStore store;
  store.add("w1", sample_normal(rs, Shape{4, 5}, 0.5));
  store.add("b1", sample_normal(rs, Shape{5}, 0.1));
  store.add("w2", sample_normal(rs, Shape{5, 5}, 0.5));
  store.add("b2", sample_normal(rs, Shape{5}, 0.1));
  store.add("w3", sample_normal(rs, Shape{5, 1}, 0.5));
  const Tensor input = sample_normal(rs, Shape{3, 4});
  const double err = grad_check_store(
      [&](ParamBinding& p) {
        Var h1 = tanh(add(matmul(constant(input), p("w1")), p("b1")));
        Var h2 = sigmoid(add(matmul(h1, p("w2")), p("b2")));
        return mean_all(softplus(matmul(h2, p("w3"))));
      },
      store);
  EXPECT_LT(err, 1e-4);
}

TEST(GradCheck, QuadraticIsExact) {
  EXPECT_LT(grad_check([](const Var& x) { return sum_all(mul(x, x)); }, Tensor::vector({1, -2})), 1e-8);
}

TEST(GradCheck, SoftplusAtRandomPoint) {
  RandomStream rs(3);
  EXPECT_LT(grad_check([](const Var& x) { return sum_all(softplus(x)); }, sample_normal(rs, Shape{8}, 2.0)), 1e-6);
}

TEST(GradCheck, DetectsWrongVjp) {
  // Claims d/dx x^2 = x instead of 2x.
  auto bad_square = [](const Var& x) {
    Tensor v = x.value();
    for (double& e : v.data()) e *= e;
    const Var in = x;
    return make_op("bad_square", v, {x}, [in](Node& self) {
      Tensor& g = in.node()->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * in.value()[i];
    });
  };
  EXPECT_GT(grad_check([&](const Var& x) { return sum_all(bad_square(x)); }, Tensor::vector({1.0, 2.0, -3.0})), 1e-2);
}

TEST(GradCheck, NonFiniteFunctionValueIsANumericFault) {
  EXPECT_THROW(grad_check([](const Var& x) { return sum_all(log(x)); }, Tensor::vector({0.0})), NumericFault);
}

TEST(Adam, ZeroGradientLeavesValuesAndCountsStep) {
  ParameterStore s;
  s.add("p", Tensor::vector({1.0, -2.0}));
  adam_step(s, 0.001, 0.9, 0.999, 1e-8);
  EXPECT_EQ(s.at("p").value.storage(), (std::vector<double>{1.0, -2.0}));
  EXPECT_EQ(s.at("p").step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterStore s;
  s.add("theta", Tensor::scalar(0.0));
  s.at("theta").grad[0] = 1.0;
  adam_step(s, 0.001, 0.9, 0.999, 1e-8);
  // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(s.at("theta").value[0], -0.001 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(s.at("theta").grad[0], 0.0);
}

TEST(Adam, ConstantGradientMovesMonotonically) {
  ParameterStore s;
  s.add("theta", Tensor::scalar(0.5));
  double prev = 0.5;
  for (int i = 0; i < 2; ++i) {
    s.at("theta").grad[0] = -3.0;
    adam_step(s, 0.01, 0.9, 0.999, 1e-8);
    EXPECT_GT(s.at("theta").value[0], prev);
    prev = s.at("theta").value[0];
  }
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  ParameterStore s;
  s.add("layer.w", Tensor::scalar(0.0));
  s.at("layer.w").grad[0] = std::nan("");
  try {
    adam_step(s, 0.001, 0.9, 0.999, 1e-8);
    FAIL();
  } catch (const NumericFault& e) {
    EXPECT_NE(std::string(e.what()).find("layer.w"), std::string::npos);
  }
}

TEST(Adam, SkipsFrozenEntries) {
  ParameterStore s;
  s.add("frozen", Tensor::scalar(1.0), false);
  s.at("frozen").grad[0] = 5.0;
  adam_step(s, 0.1, 0.9, 0.999, 1e-8);
  EXPECT_EQ(s.at("frozen").value[0], 1.0);
  EXPECT_EQ(s.at("frozen").step, 0u);
}

TEST(Random, GumbelOfOneHalf) {
  EXPECT_NEAR(gumbel_from_uniform(0.5), -std::log(std::log(2.0)), 1e-15);
  EXPECT_NEAR(gumbel_from_uniform(0.5), 0.366513, 1e-6);
}

TEST(Random, SameSeedAndCounterRepeat) {
  RandomStream a(42, 17);
  RandomStream b(42, 17);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_EQ(a.counter(), 117u);
  RandomStream c(42);
  RandomStream d(42);
  EXPECT_EQ(sample_gumbel(c, Shape{5, 5}), sample_gumbel(d, Shape{5, 5}));
}

TEST(Random, DerivedStreamsDiffer) {
  RandomStream a = RandomStream::derive(1, "shuffle");
  RandomStream b = RandomStream::derive(1, "noise");
  RandomStream c = RandomStream::derive(2, "shuffle");
  EXPECT_NE(a.seed(), b.seed());
  EXPECT_NE(a.seed(), c.seed());
  EXPECT_NE(a.derive(std::uint64_t{0}).seed(), a.derive(std::uint64_t{1}).seed());
  EXPECT_EQ(RandomStream::derive(1, "shuffle").next_u64(), a.next_u64());
}

TEST(Random, UniformStaysInsideClampedInterval) {
  RandomStream rs(5);
  const Tensor u = sample_uniform(rs, Shape{100000});
  for (double v : u.data()) {
    ASSERT_GE(v, 1e-12);
    ASSERT_LE(v, 1.0 - 1e-12);
  }
  EXPECT_TRUE(std::isfinite(gumbel_from_uniform(1e-12)));
  EXPECT_TRUE(std::isfinite(gumbel_from_uniform(1.0 - 1e-12)));
}

TEST(Random, GumbelMeanIsEulerMascheroni) {
  RandomStream rs(2024);
  double total = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) total += rs.next_gumbel();
  EXPECT_NEAR(total / n, std::numbers::egamma, 0.005);
}

TEST(Random, NextBelowIsUnbiased) {
  RandomStream rs(9);
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 30000; ++i) ++counts[rs.next_below(3)];
  for (int c : counts) EXPECT_NEAR(c / 30000.0, 1.0 / 3.0, 0.015);
}

TEST(Checkpoint, RoundTripsBitExactly) {
  RandomStream rs(1);
  ParameterStore s;
  s.add("a.w", sample_normal(rs, Shape{3, 4}));
  s.add("a.b", Tensor::vector({0.1, std::nextafter(0.1, 1.0), -0.0}));
  s.add("stats", Tensor::vector({1e-300, 1e300}), false);
  s.at("a.w").grad = sample_normal(rs, Shape{3, 4});
  s.at("a.w").adam_m = sample_normal(rs, Shape{3, 4});
  s.at("a.w").adam_v = sample_uniform(rs, Shape{3, 4});
  s.at("a.w").step = 7;
  const nlohmann::json meta = {{"strategy", "das"}, {"seed", 3}};
  const io::Bytes bytes = encode_checkpoint(s, meta);
  const Checkpoint ck = decode_checkpoint(bytes);
  EXPECT_TRUE(ck.store == s);
  EXPECT_EQ(ck.meta, meta);
  EXPECT_EQ(encode_checkpoint(ck.store, ck.meta), bytes);
  EXPECT_TRUE(std::signbit(ck.store.at("a.b").value[2]));
}

TEST(Checkpoint, CorruptionIsReported) {
  ParameterStore s;
  s.add("w", Tensor::vector({1, 2, 3}));
  io::Bytes bytes = encode_checkpoint(s);

  io::Bytes bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(
      {
        try {
          decode_checkpoint(bad);
        } catch (const FormatError& e) {
          EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
          throw;
        }
      },
      FormatError);

  io::Bytes cut(bytes.begin(), bytes.end() - 8);
  try {
    decode_checkpoint(cut);
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected 96 bytes"), std::string::npos) << msg;
    EXPECT_NE(msg.find("found 88"), std::string::npos) << msg;
  }
  EXPECT_THROW(decode_checkpoint(io::Bytes(bytes.begin(), bytes.begin() + 12)), FormatError);
}
