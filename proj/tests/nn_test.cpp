#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hetplan/nn/checkpoint.hpp"
#include "hetplan/nn/layers.hpp"
#include "hetplan/nn/loss.hpp"
#include "hetplan/nn/optim.hpp"
#include "support/gradcheck.hpp"

using namespace hetplan;
using namespace hetplan::nn;
using hetplan::testing::max_grad_error;
using hetplan::testing::probe_loss;
using hetplan::testing::random_values;

namespace {

constexpr int kTrials = 50;

ParamTensor filled(const std::string& name, Shape shape, std::vector<double> v) {
  ParamTensor p(name, std::move(shape));
  p.values = std::move(v);
  return p;
}

}  // namespace

TEST(ForwardLayer, DenseIdentity) {
  ParamTensor w = filled("w", {3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  ParamTensor b("b", {3});
  Tensor out = forward_layer(Tensor({1, 3}, {1, 0, 0}), std::vector{w, b}, LayerKind::dense);
  EXPECT_EQ(out.shape, (Shape{1, 3}));
  EXPECT_EQ(out.data, (std::vector<double>{1, 0, 0}));
}

TEST(ForwardLayer, EluAsymptote) {
  Tensor out = forward_layer(Tensor({1, 1}, {-1e9}), {}, LayerKind::elu);
  EXPECT_NEAR(out[0], -1.0, 1e-12);
}

TEST(ForwardLayer, LeakyReluSlope) {
  Tensor out = forward_layer(Tensor({1, 2}, {-2.0, 3.0}), {}, LayerKind::leaky_relu);
  EXPECT_DOUBLE_EQ(out[0], -0.4);
  EXPECT_DOUBLE_EQ(out[1], 3.0);
}

TEST(ForwardLayer, EncoderChainShape) {
  // Conv3D(1,32,5) -> pool -> Conv3D(32,32,3) -> pool on a 32^3 grid.
  Rng rng(3);
  Tensor x({1, 32, 32, 32}, random_values(rng, 32 * 32 * 32));
  ParamTensor w1("w1", {32, 1, 5, 5, 5}), b1("b1", {32});
  w1.init_glorot(rng, 125, 32 * 125);
  ParamTensor w2("w2", {32, 32, 3, 3, 3}), b2("b2", {32});
  w2.init_glorot(rng, 32 * 27, 32 * 27);
  Tensor h = forward_layer(x, std::vector{w1, b1}, LayerKind::conv3d);
  EXPECT_EQ(h.shape, (Shape{32, 28, 28, 28}));
  h = forward_layer(h, {}, LayerKind::maxpool3d);
  h = forward_layer(h, std::vector{w2, b2}, LayerKind::conv3d);
  EXPECT_EQ(h.shape, (Shape{32, 12, 12, 12}));
  h = forward_layer(h, {}, LayerKind::maxpool3d);
  EXPECT_EQ(h.shape, (Shape{32, 6, 6, 6}));
  EXPECT_EQ(numel(h.shape), 32u * 6 * 6 * 6);
}

TEST(ForwardLayer, ShapeMismatchReportsDimensions) {
  ParamTensor w("w", {2, 4}), b("b", {2});
  try {
    forward_layer(Tensor({1, 3}, {1, 2, 3}), std::vector{w, b}, LayerKind::dense);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2x4]"), std::string::npos) << msg;
  }
  EXPECT_THROW(forward_layer(Tensor({1, 3}, {1, 2, 3}), {}, LayerKind::dense), ShapeError);
  EXPECT_THROW(forward_layer(Tensor({4, 4}, std::vector<double>(16)), {}, LayerKind::maxpool3d),
               ShapeError);
}

TEST(SoftmaxRows, SumsToOneAndShiftInvariant) {
  Rng rng(11);
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t n = 1 + rng.below(5), m = 1 + rng.below(7);
    Tensor x({n, m}, random_values(rng, n * m, -30, 30));
    Tensor y = forward_layer(x, {}, LayerKind::softmax_rows);
    Tensor xs = x;
    for (std::size_t i = 0; i < n; ++i) {
      const double shift = rng.uniform(-100, 100);
      for (std::size_t j = 0; j < m; ++j) xs[i * m + j] += shift;
    }
    Tensor ys = forward_layer(xs, {}, LayerKind::softmax_rows);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < m; ++j) {
        s += y[i * m + j];
        EXPECT_NEAR(y[i * m + j], ys[i * m + j], 1e-9);
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Loss, BceValues) {
  EXPECT_NEAR(loss_bce(1.0 - kProbEps, 1).value, 0.0, 1e-6);
  EXPECT_NEAR(loss_bce(0.5, 1).value, std::numbers::ln2, 1e-9);
  EXPECT_NEAR(loss_bce(0.5, 0).value, std::numbers::ln2, 1e-9);
  EXPECT_TRUE(std::isfinite(loss_bce(0.0, 1).value));
  EXPECT_THROW(loss_bce(1.2, 1), DomainError);
  EXPECT_THROW(loss_bce(-0.1, 0), DomainError);
}

TEST(Loss, HuberValues) {
  EXPECT_DOUBLE_EQ(loss_huber(0.0, 0.5).value, 0.125);
  EXPECT_NEAR(loss_huber(0.0, 2.0, 1.15).value, 1.63875, 1e-9);
  EXPECT_NEAR(loss_huber(2.0, 0.0, 1.15).value, 1.63875, 1e-9);
  EXPECT_EQ(loss_huber(0.7, 0.7).value, 0.0);
  EXPECT_THROW(loss_huber(0, 1, 0.0), DomainError);
}

TEST(Loss, HuberContinuousAndSmoothAtDelta) {
  for (double delta : {0.3, 1.0, kHuberDelta, 2.5}) {
    const double inner = 0.5 * delta * delta;
    const double outer = delta * (delta - 0.5 * delta);
    EXPECT_NEAR(inner, outer, 1e-9);
    // Slopes of the two branches at |r| = delta: r and delta.
    const double h = 1e-7;
    const double left = (loss_huber(0, delta - h, delta).value -
                         loss_huber(0, delta - 2 * h, delta).value) / h;
    const double right = (loss_huber(0, delta + 2 * h, delta).value -
                          loss_huber(0, delta + h, delta).value) / h;
    EXPECT_NEAR(left, delta, 1e-6);
    EXPECT_NEAR(right, delta, 1e-6);
    // Branch formulas evaluated exactly at the joint.
    EXPECT_NEAR(delta, delta * 1.0, 1e-9);
  }
}

TEST(Loss, Combined) {
  EXPECT_NEAR(loss_combined({1.0, LossKind::object}, {1.0, LossKind::action}).value, 1.65, 1e-12);
  EXPECT_EQ(loss_combined({0, LossKind::object}, {0, LossKind::action}).value, 0.0);
  const auto c = loss_combined(loss_huber(0, 0.5), loss_bce(0.5, 1), 0.65);
  EXPECT_NEAR(c.value, 0.125 + 0.65 * std::numbers::ln2, 1e-12);
  EXPECT_NEAR(c.value, 0.575546, 1e-6);
  EXPECT_EQ(c.kind, LossKind::combined);
}

TEST(Backprop, DenseAnalyticGradient) {
  // y = W x, L = 0.5 |y|^2  =>  dL/dW = y x^T.
  Rng rng(5);
  ParamTensor w("w", {3, 4});
  w.values = random_values(rng, 12);
  const std::vector<double> x = random_values(rng, 4);
  Tape tape;
  Var xv = tape.constant({1, 4}, x);
  Var y = tape.matmul_nt(xv, tape.param(w));
  Var loss = tape.scale(tape.sum(tape.mul(y, y)), 0.5);
  tape.backward(loss);
  const auto& yv = tape.value(y);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(w.grad[i * 4 + j], yv[i] * x[j], 1e-12);
}

TEST(Backprop, UnusedParameterGetsZeroGrad) {
  ParamTensor used("u", {2}), unused("v", {2});
  used.values = {1, 2};
  unused.values = {3, 4};
  Tape tape;
  tape.param(unused);
  tape.backward(tape.sum(tape.param(used)));
  EXPECT_EQ(used.grad, (std::vector<double>{1, 1}));
  EXPECT_EQ(unused.grad, (std::vector<double>{0, 0}));
}

// ---------------------------------------------------------------------------
// Finite-difference checks: >= 50 random shapes per layer kind.

class GradCheck : public ::testing::Test {
 protected:
  Rng rng{2024};
  double worst = 0.0;
  void record(double e) { worst = std::max(worst, e); }
  void TearDown() override { EXPECT_LE(worst, hetplan::testing::kGradTolerance); }
};

TEST_F(GradCheck, Dense) {
  for (int t = 0; t < kTrials; ++t) {
    const std::size_t n = 1 + rng.below(4), in = 1 + rng.below(5), out = 1 + rng.below(5);
    ParamTensor x("x", {n, in}), w("w", {out, in}), b("b", {out});
    x.values = random_values(rng, x.size());
    w.values = random_values(rng, w.size());
    b.values = random_values(rng, b.size());
    const auto c = random_values(rng, n * out);
    record(max_grad_error({&x, &w, &b}, [&](Tape& tp, std::vector<Var>& v) {
      return probe_loss(tp, tp.dense(v[0], v[1], v[2]), c);
    }));
  }
}

TEST_F(GradCheck, Conv3d) {
  for (int t = 0; t < kTrials; ++t) {
    const std::size_t C = 1 + rng.below(2), O = 1 + rng.below(2), K = 1 + rng.below(3);
    const std::size_t pad = rng.below(2);
    const std::size_t D = K + rng.below(3), H = K + rng.below(3), W = K + rng.below(3);
    ParamTensor x("x", {C, D, H, W}), w("w", {O, C, K, K, K}), b("b", {O});
    x.values = random_values(rng, x.size());
    w.values = random_values(rng, w.size());
    b.values = random_values(rng, b.size());
    const std::size_t outn = O * (D + 2 * pad - K + 1) * (H + 2 * pad - K + 1) * (W + 2 * pad - K + 1);
    const auto c = random_values(rng, outn);
    record(max_grad_error({&x, &w, &b}, [&](Tape& tp, std::vector<Var>& v) {
      return probe_loss(tp, tp.conv3d(v[0], v[1], v[2], pad), c);
    }));
  }
}

TEST_F(GradCheck, Maxpool3d) {
  for (int t = 0; t < kTrials; ++t) {
    const std::size_t C = 1 + rng.below(2), D = 2 + rng.below(3), H = 2 + rng.below(3),
                      W = 2 + rng.below(3);
    ParamTensor x("x", {C, D, H, W});
    // Distinct values 0.01 apart so a 1e-3 probe never flips an argmax.
    for (std::size_t i = 0; i < x.size(); ++i) x.values[i] = 0.01 * static_cast<double>(i);
    rng.shuffle(x.values);
    const auto c = random_values(rng, C * (D / 2) * (H / 2) * (W / 2));
    record(max_grad_error({&x}, [&](Tape& tp, std::vector<Var>& v) {
      return probe_loss(tp, tp.maxpool3d(v[0]), c);
    }));
  }
}

TEST_F(GradCheck, Upsample3d) {
  for (int t = 0; t < kTrials; ++t) {
    const std::size_t C = 1 + rng.below(2), D = 1 + rng.below(3);
    ParamTensor x("x", {C, D, D, D});
    x.values = random_values(rng, x.size());
    const auto c = random_values(rng, x.size() * 8);
    record(max_grad_error({&x}, [&](Tape& tp, std::vector<Var>& v) {
      return probe_loss(tp, tp.upsample3d(v[0]), c);
    }));
  }
}

TEST_F(GradCheck, Activations) {
  for (int t = 0; t < kTrials; ++t) {
    const std::size_t n = 1 + rng.below(12);
    ParamTensor x("x", {n});
    x.values = hetplan::testing::away_from_zero(rng, n);
    const auto c = random_values(rng, n);
    record(max_grad_error({&x}, [&](Tape& tp, std::vector<Var>& v) {
      return probe_loss(tp, tp.elu(v[0]), c);
    }));
    record(max_grad_error({&x}, [&](Tape& tp, std::vector<Var>& v) {
      return probe_loss(tp, tp.leaky_relu(v[0]), c);
    }));
    record(max_grad_error({&x}, [&](Tape& tp, std::vector<Var>& v) {
      return probe_loss(tp, tp.sigmoid(v[0]), c);
    }));
  }
}

TEST_F(GradCheck, SoftmaxRowsAndSegments) {
  for (int t = 0; t < kTrials; ++t) {
    const std::size_t n = 1 + rng.below(4), m = 1 + rng.below(5);
    ParamTensor x("x", {n, m});
    x.values = random_values(rng, n * m, -3, 3);
    const auto c = random_values(rng, n * m);
    record(max_grad_error({&x}, [&](Tape& tp, std::vector<Var>& v) {
      return probe_loss(tp, tp.softmax_rows(v[0]), c);
    }));
    const std::size_t e = 1 + rng.below(10), segs = 1 + rng.below(4);
    std::vector<std::size_t> seg(e);
    for (auto& s : seg) s = rng.below(segs);
    ParamTensor l("l", {e});
    l.values = random_values(rng, e, -3, 3);
    const auto c2 = random_values(rng, e);
    record(max_grad_error({&l}, [&](Tape& tp, std::vector<Var>& v) {
      return probe_loss(tp, tp.segment_softmax(v[0], seg, segs), c2);
    }));
  }
}

TEST_F(GradCheck, GatherScatterScale) {
  for (int t = 0; t < kTrials; ++t) {
    const std::size_t n = 1 + rng.below(4), d = 1 + rng.below(4), e = 1 + rng.below(8);
    std::vector<std::size_t> idx(e);
    for (auto& i : idx) i = rng.below(n);
    ParamTensor x("x", {n, d}), s("s", {e});
    x.values = random_values(rng, x.size());
    s.values = random_values(rng, e);
    const auto c = random_values(rng, n * 2 * d);
    record(max_grad_error({&x, &s}, [&](Tape& tp, std::vector<Var>& v) {
      Var g = tp.gather_rows(v[0], idx);
      Var back = tp.scatter_add_rows(tp.scale_rows(g, v[1]), idx, n);
      return probe_loss(tp, tp.concat_cols({back, v[0]}), c);
    }));
    const auto c2 = random_values(rng, 2 * n * d);
    record(max_grad_error({&x}, [&](Tape& tp, std::vector<Var>& v) {
      return probe_loss(tp, tp.concat_rows({v[0], tp.scale(v[0], 2.0)}), c2);
    }));
  }
}

TEST_F(GradCheck, Losses) {
  for (int t = 0; t < kTrials; ++t) {
    const std::size_t n = 1 + rng.below(6);
    ParamTensor p("p", {n});
    p.values = random_values(rng, n, 0.2, 0.8);
    std::vector<double> y(n);
    for (auto& v : y) v = static_cast<double>(rng.below(2));
    record(max_grad_error({&p}, [&](Tape& tp, std::vector<Var>& v) { return tp.bce(v[0], y); }));

    const double delta = rng.uniform(0.5, 2.0);
    std::vector<double> target(n);
    ParamTensor q("q", {n});
    for (std::size_t i = 0; i < n; ++i) {
      target[i] = rng.uniform(-2, 2);
      double r;
      do {
        r = rng.uniform(-3, 3);
      } while (std::abs(std::abs(r) - delta) < 0.01);
      q.values[i] = target[i] - r;
    }
    record(max_grad_error({&q}, [&](Tape& tp, std::vector<Var>& v) {
      return tp.huber(v[0], target, delta);
    }));
    record(max_grad_error({&q}, [&](Tape& tp, std::vector<Var>& v) {
      return tp.mse(v[0], target);
    }));
  }
}

// ---------------------------------------------------------------------------

TEST(Optimizer, SgdStep) {
  ParamTensor p = filled("p", {1}, {1.0});
  p.grad = {1.0};
  ASSERT_TRUE(Sgd(0.1).step({&p}));
  EXPECT_DOUBLE_EQ(p.values[0], 0.9);
}

TEST(Optimizer, ZeroLearningRateIsBitIdentical) {
  Rng rng(9);
  ParamTensor p("p", {20});
  p.values = random_values(rng, 20);
  p.grad = random_values(rng, 20);
  const auto before = p.values;
  ASSERT_TRUE(Sgd(0.0).step({&p}));
  EXPECT_EQ(p.values, before);
  Adam adam(0.0);
  ASSERT_TRUE(adam.step({&p}));
  EXPECT_EQ(p.values, before);
}

TEST(Optimizer, NonFiniteGradientRejected) {
  ParamTensor p = filled("p", {2}, {1.0, 2.0});
  p.grad = {0.5, std::nan("")};
  EXPECT_FALSE(Sgd(0.1).step({&p}));
  Adam adam(0.1);
  EXPECT_FALSE(adam.step({&p}));
  EXPECT_EQ(p.values, (std::vector<double>{1.0, 2.0}));
}

TEST(Optimizer, SeededRunsHaveIdenticalTrajectories) {
  auto run = [] {
    Rng rng(77);
    ParamTensor w("w", {4, 3}), b("b", {4});
    w.init_glorot(rng, 3, 4);
    Adam opt(0.01);
    std::vector<std::vector<double>> traj;
    for (int step = 0; step < 20; ++step) {
      zero_grads({&w, &b});
      Tape tape;
      Var x = tape.constant({2, 3}, random_values(rng, 6));
      Var y = tape.sigmoid(tape.dense(x, tape.param(w), tape.param(b)));
      tape.backward(tape.bce(tape.reshape(y, {8}), {1, 0, 1, 0, 0, 1, 1, 0}));
      opt.step({&w, &b});
      traj.push_back(w.values);
    }
    return traj;
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripAndByteStable) {
  Rng rng(1);
  Checkpoint ck;
  ck.header = {{"kind", "test"}, {"layers", {"dense", "elu"}}, {"lr", 1e-3}};
  ParamTensor a("a", {2, 3});
  a.values = random_values(rng, 6);
  ParamTensor b("b", {1});
  b.values = {std::numbers::pi};
  ck.tensors = {a, b};
  const std::string bytes = serialize_checkpoint(ck);
  const Checkpoint back = deserialize_checkpoint(bytes);
  EXPECT_EQ(back.header, ck.header);
  EXPECT_EQ(back.find("a").values, a.values);
  EXPECT_EQ(back.find("b").shape, (Shape{1}));
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(deserialize_checkpoint("nope"), FormatError);
}
