#include <gtest/gtest.h>

#include <cmath>

#include "advnav/cost/cost_ops.hpp"
#include "advnav/diff/checkpoint.hpp"
#include "advnav/diff/grad_check.hpp"
#include "advnav/diff/optim.hpp"
#include "advnav/diff/tape.hpp"

using namespace advnav;
using diff::Mat;
using diff::Node;
using diff::ParamStore;
using diff::Tape;

namespace {

Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0,
               double kink_margin = 0.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) {
      double v = rng.uniform(-scale, scale);
      // Keep relu/max inputs away from their kinks.
      while (kink_margin > 0.0 && std::abs(v) < kink_margin)
        v = rng.uniform(-scale, scale);
      m(i, j) = v;
    }
  return m;
}

// Central-difference check of d(sum of weights * op(x)) / dx for a single
// primitive, using a fixed random weighting as the downstream gradient.
template <typename OpFn>
void check_primitive(const std::string& name, Rng& rng, Eigen::Index r,
                     Eigen::Index c, OpFn&& op, double kink_margin = 0.0,
                     double tol = 1e-6) {
  ParamStore store(rng.next_u64());
  store.add("x", random_mat(rng, r, c, 1.0, kink_margin));
  const auto report = diff::grad_check(
      [&](Tape& tape, ParamStore& s) {
        const Node x = tape.param(s, "x");
        return tape.sum(op(tape, x));
      },
      store, tol);
  EXPECT_TRUE(report.pass) << name << ": max rel err " << report.max_rel_error;
}

}  // namespace

// ---- forward values -----------------------------------------------------------

TEST(TapeForward, SquareDerivativeAtThree) {
  ParamStore store(1);
  store.add("x", Mat::Constant(1, 1, 3.0));
  Tape tape;
  const Node y = tape.square(tape.param(store, "x"));
  EXPECT_DOUBLE_EQ(tape.scalar(y), 9.0);
  tape.backward(y);
  EXPECT_DOUBLE_EQ(store.grad("x")(0, 0), 6.0);
}

TEST(TapeForward, SoftmaxUniformLogits) {
  Tape tape;
  const Node x = tape.constant(Mat::Constant(3, 4, 0.7));
  const Node p = tape.softmax_rows(x);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(tape.value(p).row(i).sum(), 1.0, 1e-12);
    for (Eigen::Index j = 0; j < 4; ++j)
      EXPECT_NEAR(tape.value(p)(i, j), 0.25, 1e-12);
  }
}

TEST(TapeForward, MaskedSoftmaxZeroesMaskedColumns) {
  Tape tape;
  Mat logits(2, 3);
  logits << 1, 5, 2, 0, 0, 0;
  Mat mask(2, 3);
  mask << 1, 0, 1, 1, 1, 1;
  const Node p = tape.softmax_rows(tape.constant(logits), &mask);
  EXPECT_EQ(tape.value(p)(0, 1), 0.0);
  EXPECT_NEAR(tape.value(p).row(0).sum(), 1.0, 1e-12);
  EXPECT_NEAR(tape.value(p)(1, 0), 1.0 / 3.0, 1e-12);
}

TEST(TapeForward, ShapeMismatchNamesOp) {
  Tape tape;
  const Node a = tape.constant(Mat::Zero(2, 3));
  const Node b = tape.constant(Mat::Zero(3, 3));
  try {
    tape.add(a, b);
    FAIL() << "expected shape error";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("add"), std::string::npos);
    EXPECT_NE(msg.find("2x3"), std::string::npos);
  }
}

TEST(TapeForward, ReplayIsIdentical) {
  Rng rng(404);
  const Mat x = random_mat(rng, 4, 4);
  const auto run = [&]() {
    Tape tape;
    const Node n = tape.tanh_(tape.matmul(tape.constant(x), tape.constant(x)));
    return tape.value(tape.sum(n))(0, 0);
  };
  EXPECT_EQ(run(), run());
}

// ---- per-primitive gradients ----------------------------------------------------

TEST(TapeGrad, PrimitivesMatchFiniteDifferences) {
  Rng rng(20240917);
  for (int rep = 0; rep < 3; ++rep) {
    const Eigen::Index r = 2 + static_cast<Eigen::Index>(rng.below(3));
    const Eigen::Index c = 2 + static_cast<Eigen::Index>(rng.below(3));
    check_primitive("tanh", rng, r, c,
                    [](Tape& t, Node x) { return t.tanh_(x); });
    check_primitive("sigmoid", rng, r, c,
                    [](Tape& t, Node x) { return t.sigmoid(x); });
    check_primitive("relu", rng, r, c,
                    [](Tape& t, Node x) { return t.relu(x); }, 1e-3);
    check_primitive("square", rng, r, c,
                    [](Tape& t, Node x) { return t.square(x); });
    check_primitive("scale", rng, r, c,
                    [](Tape& t, Node x) { return t.scale(x, -2.5); });
    check_primitive("add_scalar", rng, r, c,
                    [](Tape& t, Node x) { return t.add_scalar(x, 0.7); });
    check_primitive("cumsum", rng, r, c,
                    [](Tape& t, Node x) { return t.cumsum_rows(x); });
    check_primitive("softmax", rng, r, c,
                    [](Tape& t, Node x) { return t.softmax_rows(x); });
    check_primitive("transpose", rng, r, c,
                    [](Tape& t, Node x) { return t.transpose(x); });
    check_primitive("reshape", rng, r, c, [&](Tape& t, Node x) {
      return t.reshape_rowmajor(x, c, r);
    });
    check_primitive("max", rng, r, c,
                    [](Tape& t, Node x) { return t.max_all(x); }, 1e-3);
    check_primitive("mean", rng, r, c,
                    [](Tape& t, Node x) { return t.mean(x); });
    check_primitive("slice", rng, r, c, [&](Tape& t, Node x) {
      return t.slice_cols(x, 0, c - 1);
    });
  }
}

TEST(TapeGrad, MatmulMatchesFiniteDifferences) {
  Rng rng(7311);
  ParamStore store(rng.next_u64());
  store.add("a", random_mat(rng, 4, 5));
  store.add("b", random_mat(rng, 5, 3));
  const auto report = diff::grad_check(
      [](Tape& tape, ParamStore& s) {
        return tape.sum(tape.matmul(tape.param(s, "a"), tape.param(s, "b")));
      },
      store, 1e-6);
  EXPECT_TRUE(report.pass) << report.max_rel_error;
}

TEST(TapeGrad, AffineAndCompositeChain) {
  Rng rng(99182);
  ParamStore store(rng.next_u64());
  store.add("w", random_mat(rng, 3, 4));
  store.add("b", random_mat(rng, 1, 4));
  store.add("x", random_mat(rng, 2, 3));
  const auto report = diff::grad_check(
      [](Tape& tape, ParamStore& s) {
        const Node h = tape.tanh_(
            tape.affine(tape.param(s, "x"), tape.param(s, "w"), tape.param(s, "b")));
        return tape.mean(tape.square(h));
      },
      store, 1e-6);
  EXPECT_TRUE(report.pass) << report.max_rel_error;
}

TEST(TapeGrad, ChompPairCostMatchesFiniteDifferences) {
  Rng rng(5112);
  CostParams p;
  for (int rep = 0; rep < 5; ++rep) {
    ParamStore store(rng.next_u64());
    // Positions spread so clearances avoid the cost seams.
    store.add("r", random_mat(rng, 6, 2, 1.5));
    store.add("h", random_mat(rng, 6, 2, 1.5));
    const auto report = diff::grad_check(
        [&](Tape& tape, ParamStore& s) {
          return chomp_pair_cost_node(tape, tape.param(s, "r"),
                                      tape.param(s, "h"), 0.3, 0.25, p);
        },
        store, 1e-4);
    EXPECT_TRUE(report.pass) << report.max_rel_error;
  }
}

// ---- backward contract -----------------------------------------------------------

TEST(Backward, AccumulatesWithoutZeroing) {
  ParamStore store(1);
  store.add("x", Mat::Constant(1, 1, 2.0));
  const auto run_backward = [&]() {
    Tape tape;
    const Node y = tape.square(tape.param(store, "x"));
    tape.backward(y);
  };
  run_backward();
  EXPECT_DOUBLE_EQ(store.grad("x")(0, 0), 4.0);
  run_backward();  // no zero_grads in between: gradients double
  EXPECT_DOUBLE_EQ(store.grad("x")(0, 0), 8.0);
  store.zero_grads();
  run_backward();
  EXPECT_DOUBLE_EQ(store.grad("x")(0, 0), 4.0);
}

TEST(Backward, DisconnectedParameterGetsZeroGradient) {
  ParamStore store(1);
  store.add("used", Mat::Constant(1, 1, 1.5));
  store.add("unused", Mat::Constant(1, 1, -3.0));
  Tape tape;
  const Node y = tape.square(tape.param(store, "used"));
  tape.backward(y);
  EXPECT_DOUBLE_EQ(store.grad("used")(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(store.grad("unused")(0, 0), 0.0);
}

TEST(Backward, NonScalarRootRejected) {
  Tape tape;
  const Node x = tape.constant(Mat::Zero(2, 2));
  EXPECT_THROW(tape.backward(x), std::invalid_argument);
}

TEST(Backward, ChainRuleMatchesNumerically) {
  // f(g(x)) with f = mean square, g = tanh(affine): product rule through two
  // nested nonlinearity layers.
  Rng rng(31337);
  ParamStore store(rng.next_u64());
  store.add("x", random_mat(rng, 1, 4));
  const Mat w1 = random_mat(rng, 4, 4), w2 = random_mat(rng, 4, 2);
  const auto report = diff::grad_check(
      [&](Tape& tape, ParamStore& s) {
        const Node g = tape.tanh_(tape.matmul(tape.param(s, "x"), tape.constant(w1)));
        const Node f = tape.matmul(g, tape.constant(w2));
        return tape.mean(tape.square(f));
      },
      store, 1e-6);
  EXPECT_TRUE(report.pass) << report.max_rel_error;
}

// ---- grad_check itself -------------------------------------------------------------

TEST(GradCheck, QuadraticFormIsExact) {
  Rng rng(2718);
  ParamStore store(rng.next_u64());
  store.add("x", random_mat(rng, 1, 5));
  const Mat q = random_mat(rng, 5, 5);
  const auto report = diff::grad_check(
      [&](Tape& tape, ParamStore& s) {
        const Node x = tape.param(s, "x");
        return tape.sum(tape.mul(x, tape.matmul(x, tape.constant(q))));
      },
      store, 1e-8);
  EXPECT_TRUE(report.pass) << report.max_rel_error;
}

TEST(GradCheck, SignFlipFails) {
  // Negative control: a custom op whose backward deliberately flips the
  // gradient sign must be caught.
  ParamStore store(7);
  store.add("x", Mat::Constant(1, 1, 1.2));
  const auto report = diff::grad_check(
      [](Tape& tape, ParamStore& s) {
        const Node x = tape.param(s, "x");
        return tape.custom_binary(
            x, x, tape.value(x),
            [](const Mat& g, Mat& ga, Mat& gb) { ga = -g; (void)gb; });
      },
      store, 1e-4);
  EXPECT_FALSE(report.pass);
}

// ---- optimizers --------------------------------------------------------------------

TEST(Optim, SgdSingleStepOnSquare) {
  ParamStore store(1);
  store.add("x", Mat::Constant(1, 1, 1.0));
  Tape tape;
  const Node y = tape.square(tape.param(store, "x"));
  tape.backward(y);
  diff::SgdOptimizer opt{0.1};
  opt.step(store);
  EXPECT_DOUBLE_EQ(store.value("x")(0, 0), 0.8);
  EXPECT_EQ(store.step, 1u);
}

TEST(Optim, ZeroGradientLeavesParamsUnchanged) {
  ParamStore store(1);
  store.add("x", Mat::Constant(2, 2, 0.5));
  diff::SgdOptimizer sgd{0.1};
  sgd.step(store);
  EXPECT_EQ(store.value("x")(1, 1), 0.5);
  diff::AdamOptimizer adam;
  adam.step(store);
  EXPECT_EQ(store.value("x")(1, 1), 0.5);
}

TEST(Optim, AdamFirstStepMagnitudeIsLr) {
  // Bias correction makes the first update lr * g / (|g| + eps) for any g.
  for (const double g : {1e-6, 1.0, 1e6}) {
    ParamStore store(1);
    store.add("x", Mat::Constant(1, 1, 0.0));
    store.grad("x")(0, 0) = g;
    diff::AdamOptimizer adam;
    adam.lr = 1e-3;
    adam.step(store);
    EXPECT_NEAR(std::abs(store.value("x")(0, 0)), adam.lr, adam.lr * 1e-2)
        << "g=" << g;
  }
}

TEST(Optim, DeterministicXavierInit) {
  ParamStore a(42), b(42), c(43);
  a.add_xavier("w", 8, 8);
  b.add_xavier("w", 8, 8);
  c.add_xavier("w", 8, 8);
  EXPECT_EQ(a.value_hash(), b.value_hash());
  EXPECT_NE(a.value_hash(), c.value_hash());
  const double bound = std::sqrt(6.0 / 16.0);
  EXPECT_LE(a.value("w").cwiseAbs().maxCoeff(), bound);
}

// ---- checkpoints -------------------------------------------------------------------

TEST(Checkpoint, RoundTripPreservesEverything) {
  Rng rng(808);
  diff::Checkpoint ckpt;
  ckpt.store = ParamStore(99);
  ckpt.store.add("b.bias", random_mat(rng, 1, 3));
  ckpt.store.add("a.weight", random_mat(rng, 3, 3));
  ckpt.store.step = 1234;
  ckpt.tag = "mle-forecaster";
  ckpt.meta = {{"note", "round trip"}};

  const std::string bytes = diff::checkpoint_to_string(ckpt);
  const diff::Checkpoint back = diff::checkpoint_from_string(bytes);
  EXPECT_EQ(back.tag, "mle-forecaster");
  EXPECT_EQ(back.store.step, 1234u);
  EXPECT_EQ(back.store.seed(), 99u);
  EXPECT_EQ(back.store.value_hash(), ckpt.store.value_hash());
  EXPECT_EQ(back.meta.at("note"), "round trip");
  // Serialization is itself deterministic.
  EXPECT_EQ(diff::checkpoint_to_string(back), bytes);
}

TEST(Checkpoint, AdamStateRoundTrips) {
  Rng rng(809);
  diff::Checkpoint ckpt;
  ckpt.store = ParamStore(5);
  ckpt.store.add("w", random_mat(rng, 2, 2));
  ckpt.store.grad("w") = random_mat(rng, 2, 2);
  ckpt.has_adam = true;
  ckpt.adam.lr = 0.01;
  ckpt.adam.step(ckpt.store);

  const diff::Checkpoint back = diff::checkpoint_from_string(diff::checkpoint_to_string(ckpt));
  ASSERT_TRUE(back.has_adam);
  EXPECT_EQ(back.adam.t, 1u);
  EXPECT_EQ(back.adam.m.at("w"), ckpt.adam.m.at("w"));
  EXPECT_EQ(back.adam.v.at("w"), ckpt.adam.v.at("w"));
}

TEST(Checkpoint, TruncatedPayloadRejected) {
  diff::Checkpoint ckpt;
  ckpt.store = ParamStore(1);
  ckpt.store.add("w", Mat::Ones(4, 4));
  const std::string bytes = diff::checkpoint_to_string(ckpt);
  EXPECT_THROW(diff::checkpoint_from_string(bytes.substr(0, bytes.size() - 8)),
               std::runtime_error);
  EXPECT_THROW(diff::checkpoint_from_string(bytes + "xx"), std::runtime_error);
}

TEST(Checkpoint, UnsupportedVersionRejected) {
  const std::string bogus = R"({"params":[],"version":9})" "\n";
  EXPECT_THROW(diff::checkpoint_from_string(bogus), std::runtime_error);
}
