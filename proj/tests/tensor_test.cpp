#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <gtest/gtest.h>

#include "srlgnn/tensor/adam.hpp"
#include "srlgnn/tensor/checkpoint.hpp"
#include "srlgnn/tensor/gradcheck.hpp"
#include "srlgnn/tensor/ops.hpp"

namespace srlgnn {
namespace {

using T64 = Tensor<double>;
using V64 = Var<double>;
using Fn = std::function<V64(Tape<double>&, V64)>;

T64 random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  T64 t = T64::matrix(r, c);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Random linear functional of an op's output, so no gradient entry is
// trivially uniform.
Fn probe(std::function<V64(Tape<double>&, V64)> op, std::uint64_t seed) {
  return [op, seed](Tape<double>& tape, V64 x) {
    V64 y = op(tape, x);
    V64 w = tape.constant(random_matrix(y.rows(), y.cols(), seed));
    return ops::sum(ops::mul(y, w));
  };
}

TEST(Ops, MatmulByIdentityIsIdentity) {
  Tape<double> tape;
  auto a = tape.constant(T64::from_rows({{1, 2}, {3, 4}}));
  auto c = ops::matmul(a, tape.constant(T64::identity(2)));
  EXPECT_EQ(c.value(), T64::from_rows({{1, 2}, {3, 4}}));
}

TEST(Ops, SoftmaxOfZerosIsUniform) {
  Tape<double> tape;
  auto y = ops::softmax(tape.constant(T64::row({0, 0, 0})));
  for (double v : y.value().values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Ops, BceAtZeroLogitIsLn2) {
  Tape<double> tape;
  auto loss = ops::bce_with_logits(tape.constant(T64({1, 1}, {0.0})), 1.0);
  EXPECT_NEAR(loss.value()[0], std::log(2.0), 1e-15);
  EXPECT_NEAR(loss.value()[0], 0.6931, 1e-4);
}

TEST(Ops, BceMatchesClosedFormAcrossRange) {
  for (double z : {-30.0, -2.5, -0.1, 0.7, 3.0, 40.0}) {
    for (double y : {0.0, 1.0}) {
      Tape<double> tape;
      auto loss = ops::bce_with_logits(tape.constant(T64({1, 1}, {z})), y);
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double expected = -(y * std::log(p) + (1 - y) * std::log1p(-p));
      if (std::isfinite(expected)) {
        EXPECT_NEAR(loss.value()[0], expected, 1e-9 * std::max(1.0, std::abs(expected))) << z;
      }
    }
  }
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
  Tape<double> tape;
  auto a = tape.constant(T64::matrix(2, 3));
  auto b = tape.constant(T64::matrix(2, 3));
  try {
    ops::matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2, 3] and [2, 3]"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ops::add(a, tape.constant(T64::matrix(3, 2))), ShapeError);
  EXPECT_THROW(ops::add(a, tape.constant(T64::matrix(1, 2))), ShapeError);
  EXPECT_NO_THROW(ops::add(a, tape.constant(T64::matrix(1, 3))));
}

TEST(Ops, NonFiniteResultRaises) {
  Tape<double> tape;
  auto a = tape.constant(T64::row({1.0, 2.0}));
  EXPECT_THROW(ops::scale(a, std::numeric_limits<double>::infinity()), NumericError);
  EXPECT_THROW(tape.constant(T64::row({std::nan("")})), NumericError);
}

TEST(Ops, SoftmaxRowsArePositiveAndSumToOne) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Tape<double> tape;
    auto y = ops::softmax(tape.constant(random_matrix(3, 7, seed, -20, 20)));
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (double v : y.value().row_values(r)) {
        EXPECT_GT(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Ops, LayerNormRowsAreStandardized) {
  Tape<double> tape;
  auto y = ops::layer_norm(tape.constant(random_matrix(4, 8, 3, -5, 5)),
                           tape.constant(T64({1, 8}, 1.0)), tape.constant(T64({1, 8}, 0.0)));
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0, sq = 0;
    for (double v : y.value().row_values(r)) mean += v;
    mean /= 8;
    for (double v : y.value().row_values(r)) sq += (v - mean) * (v - mean);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(sq / 8, 1.0, 1e-4);
  }
}

TEST(GradCheck, SumOfSquares) {
  Fn f = [](Tape<double>&, V64 x) { return ops::sum(ops::mul(x, x)); };
  auto r = grad_check(f, random_matrix(3, 4, 11));
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradCheck, SumOfSquaresAnalyticGradientIsTwoX) {
  Tape<double> tape;
  const T64 x0 = random_matrix(2, 3, 12);
  auto x = tape.variable(x0);
  tape.backward(ops::sum(ops::mul(x, x)));
  const T64 g = tape.grad(x);
  for (std::size_t i = 0; i < x0.size(); ++i) EXPECT_DOUBLE_EQ(g[i], 2 * x0[i]);
}

TEST(GradCheck, ReluAwayFromKink) {
  T64 x = random_matrix(4, 5, 13);
  for (auto& v : x.values()) v = (v >= 0 ? 0.1 : -0.1) + v;
  auto r = grad_check(probe([](Tape<double>&, V64 v) { return ops::relu(v); }, 99), x);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradCheck, ReluGradientAtZeroIsZero) {
  Tape<double> tape;
  auto x = tape.variable(T64::row({0.0, 1.0, -1.0}));
  tape.backward(ops::sum(ops::relu(x)));
  EXPECT_EQ(tape.grad(x), T64::row({0.0, 1.0, 0.0}));
}

struct OpCase {
  const char* name;
  std::size_t rows, cols;
  Fn op;
};

class EveryOp : public ::testing::TestWithParam<OpCase> {};

TEST_P(EveryOp, PassesFiniteDifferenceCheck) {
  const auto& c = GetParam();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto r = grad_check(probe(c.op, seed + 100), random_matrix(c.rows, c.cols, seed, 0.2, 1.5));
    EXPECT_LT(r.max_rel_error, 1e-6) << c.name << " seed " << seed << " worst " << r.worst_index
                                     << " analytic " << r.analytic << " numeric " << r.numeric;
  }
}

const T64& other_operand() {
  static const T64 m = random_matrix(4, 3, 777);
  return m;
}

INSTANTIATE_TEST_SUITE_P(
    Ops, EveryOp,
    ::testing::Values(
        OpCase{"matmul_left", 2, 4,
               [](Tape<double>& t, V64 x) { return ops::matmul(x, t.constant(other_operand())); }},
        OpCase{"matmul_right", 3, 2,
               [](Tape<double>& t, V64 x) { return ops::matmul(t.constant(other_operand()), x); }},
        OpCase{"matmul_nt", 2, 3,
               [](Tape<double>& t, V64 x) { return ops::matmul_nt(x, t.constant(other_operand())); }},
        OpCase{"matmul_nt_right", 5, 3,
               [](Tape<double>& t, V64 x) { return ops::matmul_nt(t.constant(other_operand()), x); }},
        OpCase{"transpose", 3, 4, [](Tape<double>&, V64 x) { return ops::transpose(x); }},
        OpCase{"add_row_bias", 1, 3,
               [](Tape<double>& t, V64 x) { return ops::add(t.constant(other_operand()), x); }},
        OpCase{"scale", 3, 3, [](Tape<double>&, V64 x) { return ops::scale(x, -2.5); }},
        OpCase{"concat", 4, 2,
               [](Tape<double>& t, V64 x) {
                 return ops::concat<double>({t.constant(other_operand()), x, x});
               }},
        OpCase{"slice_cols", 3, 5, [](Tape<double>&, V64 x) { return ops::slice_cols(x, 1, 4); }},
        OpCase{"gather_rows", 4, 3,
               [](Tape<double>&, V64 x) { return ops::gather_rows(x, {3, 0, 3, 1}); }},
        OpCase{"row_mean", 5, 3, [](Tape<double>&, V64 x) { return ops::row_mean(x); }},
        OpCase{"tanh", 3, 3, [](Tape<double>&, V64 x) { return ops::tanh(x); }},
        OpCase{"sigmoid", 3, 3, [](Tape<double>&, V64 x) { return ops::sigmoid(x); }},
        OpCase{"softmax", 3, 4, [](Tape<double>&, V64 x) { return ops::softmax(x); }},
        OpCase{"normalize_sum", 1, 5, [](Tape<double>&, V64 x) { return ops::normalize_sum(x); }},
        OpCase{"layer_norm_input", 3, 6,
               [](Tape<double>& t, V64 x) {
                 return ops::layer_norm(x, t.constant(random_matrix(1, 6, 5)),
                                        t.constant(random_matrix(1, 6, 6)));
               }},
        OpCase{"layer_norm_gain", 1, 3,
               [](Tape<double>& t, V64 g) {
                 return ops::layer_norm(t.constant(other_operand()), g,
                                        t.constant(random_matrix(1, 3, 6)));
               }},
        OpCase{"bce_target1", 1, 1,
               [](Tape<double>&, V64 x) { return ops::bce_with_logits(x, 1.0); }},
        OpCase{"bce_target0", 1, 1,
               [](Tape<double>&, V64 x) { return ops::bce_with_logits(x, 0.0); }}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(GradCheck, ReusedTensorAccumulatesBothPaths) {
  // x appears in a product with itself and again through a matmul with its
  // own transpose; the tape must sum every path.
  Fn f = [](Tape<double>&, V64 x) {
    return ops::add(ops::sum(ops::mul(x, ops::tanh(x))), ops::sum(ops::matmul(x, ops::transpose(x))));
  };
  auto r = grad_check(f, random_matrix(3, 3, 21));
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradCheck, BackwardTwiceResetsGradients) {
  Tape<double> tape;
  auto x = tape.variable(T64::row({1.0, 2.0}));
  auto y = ops::sum(ops::mul(x, x));
  tape.backward(y);
  tape.backward(y);
  EXPECT_EQ(tape.grad(x), T64::row({2.0, 4.0}));
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  std::vector<T64> params = {T64::row({1.0, -2.0})};
  const auto before = params;
  AdamState<double> state(AdamConfig{0.1}, params);
  for (int i = 0; i < 3; ++i) adam_step(params, {T64::row({0.0, 0.0})}, state);
  EXPECT_EQ(params, before);
  EXPECT_EQ(state.step, 3u);
}

TEST(Adam, ZeroGradientDecaysMoments) {
  std::vector<T64> params = {T64::row({0.0})};
  AdamState<double> state(AdamConfig{0.1}, params);
  state.first_moment[0] = T64::row({0.5});
  state.second_moment[0] = T64::row({0.25});
  adam_step(params, {T64::row({0.0})}, state);
  EXPECT_DOUBLE_EQ(state.first_moment[0][0], 0.9 * 0.5);
  EXPECT_DOUBLE_EQ(state.second_moment[0][0], 0.999 * 0.25);
}

TEST(Adam, SingleScalarStep) {
  std::vector<T64> p = {T64({1, 1}, {1.0})};
  AdamState<double> state(AdamConfig{0.1}, p);
  adam_step(p, {T64({1, 1}, {1.0})}, state);
  // m_hat = v_hat = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(p[0][0], 1.0 - 0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p[0][0], 0.9, 1e-8);
}

TEST(Adam, ConvergesOnQuadratic) {
  std::vector<T64> p = {T64({1, 1}, {0.0})};
  AdamState<double> state(AdamConfig{0.1}, p);
  for (int i = 0; i < 100; ++i) {
    Tape<double> tape;
    auto x = tape.variable(p[0]);
    auto d = ops::add(x, tape.constant(T64({1, 1}, {-3.0})));
    tape.backward(ops::sum(ops::mul(d, d)));
    adam_step(p, {tape.grad(x)}, state);
  }
  EXPECT_LT(std::abs(p[0][0] - 3.0), 0.05);
}

TEST(Adam, ShapeMismatchThrows) {
  std::vector<T64> p = {T64::row({1.0, 2.0})};
  AdamState<double> state(AdamConfig{}, p);
  EXPECT_THROW(adam_step(p, {T64::row({1.0})}, state), ShapeError);
}

TEST(Adam, RepeatedRunsAreBitwiseIdentical) {
  auto run = [] {
    std::vector<T64> p = {random_matrix(3, 3, 5)};
    AdamState<double> state(AdamConfig{0.01}, p);
    for (int i = 0; i < 50; ++i) {
      Tape<double> tape;
      auto x = tape.variable(p[0]);
      tape.backward(ops::sum(ops::tanh(ops::matmul(x, x))));
      adam_step(p, {tape.grad(x)}, state);
    }
    return p;
  };
  EXPECT_EQ(run(), run());
}

class CheckpointTest : public ::testing::Test {
 protected:
  std::filesystem::path path_ =
      std::filesystem::temp_directory_path() / ("srlgnn_ck_" + std::to_string(::getpid()) + ".bin");
  void TearDown() override { std::filesystem::remove(path_); }
};

TEST_F(CheckpointTest, RoundTripsBothPrecisions) {
  ParamStore<double> store;
  store.add("enc.a", random_matrix(2, 3, 1));
  store.add("head.b", random_matrix(1, 1, 2));
  save_checkpoint(path_.string(), store, {{"note", "x"}});
  auto back = load_checkpoint<double>(path_.string());
  EXPECT_EQ(back.params, store);
  EXPECT_EQ(back.header["note"], "x");
  EXPECT_EQ(back.header["precision"], "f64");

  ParamStore<float> narrow;
  narrow.add("w", random_matrix(2, 2, 3).cast<float>());
  save_checkpoint(path_.string(), narrow);
  EXPECT_EQ(load_checkpoint<float>(path_.string()).params, narrow);
  EXPECT_EQ(std::filesystem::file_size(path_),
            load_checkpoint<float>(path_.string()).header.dump().size() + 1 + 4 * 4);
}

TEST_F(CheckpointTest, HeaderListsNamesAndShapes) {
  ParamStore<float> store;
  store.add("gnn.w_init", Tensor<float>::matrix(4, 2));
  save_checkpoint(path_.string(), store);
  std::ifstream in(path_);
  std::string line;
  std::getline(in, line);
  auto header = nlohmann::json::parse(line);
  EXPECT_EQ(header["version"], 1);
  EXPECT_EQ(header["precision"], "f32");
  EXPECT_EQ(header["params"][0]["name"], "gnn.w_init");
  EXPECT_EQ(header["params"][0]["shape"], nlohmann::json::array({4, 2}));
}

TEST_F(CheckpointTest, TruncatedFileIsRejected) {
  ParamStore<double> store;
  store.add("w", random_matrix(3, 3, 1));
  save_checkpoint(path_.string(), store);
  std::filesystem::resize_file(path_, std::filesystem::file_size(path_) - 8);
  EXPECT_THROW(load_checkpoint<double>(path_.string()), ParseError);
}

}  // namespace
}  // namespace srlgnn
