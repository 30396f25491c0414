#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "grad_check.hpp"
#include "ipnet/autodiff.hpp"

using namespace ipnet;

namespace {

Tensor make_tensor(std::size_t batch, std::size_t features,
                   std::uint64_t seed) {
  // Inputs bounded in [-2, 2].
  Xoshiro256pp rng(seed);
  Tensor t(batch, features);
  for (double& v : t.values) v = 4.0 * rng.uniform01() - 2.0;
  return t;
}

/// L = 0.5 * sum y^2 over the output tensor; returns (loss, dL/dy).
double half_sq(const Tensor& y, Tensor* grad) {
  double loss = 0.0;
  for (double v : y.values) loss += 0.5 * v * v;
  if (grad) *grad = y;
  return loss;
}

}  // namespace

TEST_CASE("dense forward: identity weights pass the input through") {
  DenseLayer d(3, 3, "dense");
  auto w = d.weight();
  for (std::size_t i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  Tensor x = make_tensor(2, 3, 1);
  Tensor y = d.forward(x, Mode::kInference);
  for (std::size_t i = 0; i < x.values.size(); ++i)
    CHECK(y.values[i] == x.values[i]);
}

TEST_CASE("relu and tanh pointwise values") {
  ReluLayer relu("relu");
  Tensor x(1, 3);
  x.values = {-1.0, 0.0, 2.0};
  Tensor y = relu.forward(x, Mode::kInference);
  CHECK(y.values == std::vector<double>{0.0, 0.0, 2.0});

  TanhLayer tanh("tanh");
  Tensor t(1, 3);
  t.values = {0.0, 30.0, -30.0};
  Tensor ty = tanh.forward(t, Mode::kInference);
  CHECK(ty.values[0] == 0.0);
  CHECK(std::abs(ty.values[1] - 1.0) < 1e-12);
  CHECK(std::abs(ty.values[2] + 1.0) < 1e-12);
}

TEST_CASE("dense backward reproduces the analytic linear-case gradient") {
  // loss = ||W x||^2 / 2 with fixed x  =>  dloss/dW = (W x) x^T
  DenseLayer d(3, 2, "dense");
  auto w = d.weight();
  const double wv[6] = {0.5, -1.0, 2.0, 1.5, 0.25, -0.75};
  for (int i = 0; i < 6; ++i) w[i] = wv[i];
  Tensor x(1, 3);
  x.values = {1.0, -2.0, 0.5};
  Tensor y = d.forward(x, Mode::kTraining);
  Tensor dy;
  half_sq(y, &dy);
  Tensor dx = d.backward(dy);

  std::vector<ParamView> ps;
  d.collect_params(ps);
  const double* wgrad = ps[0].grad;
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(wgrad[o * 3 + i] == y.values[o] * x.values[i]);
  // dx = W^T (W x)
  for (std::size_t i = 0; i < 3; ++i) {
    double expect = 0.0;
    for (std::size_t o = 0; o < 2; ++o) expect += wv[o * 3 + i] * y.values[o];
    CHECK(dx.values[i] == expect);
  }
}

TEST_CASE("relu blocks gradient at strictly negative pre-activations") {
  ReluLayer relu("relu");
  Tensor x(1, 2);
  x.values = {-0.5, 0.5};
  relu.forward(x, Mode::kTraining);
  Tensor dy(1, 2);
  dy.values = {1.0, 1.0};
  Tensor dx = relu.backward(dy);
  CHECK(dx.values[0] == 0.0);
  CHECK(dx.values[1] == 1.0);
}

TEST_CASE("batchnorm training normalizes to zero mean unit variance") {
  BatchNormLayer bn(2, "bn");
  Tensor x(4, 2);
  // feature 0: mean 5, variance 4; feature 1: already standardized
  const double f0[4] = {3.0, 7.0, 3.0, 7.0};
  const double f1[4] = {-1.0, 1.0, 1.0, -1.0};
  for (int b = 0; b < 4; ++b) {
    x.at(b, 0) = f0[b];
    x.at(b, 1) = f1[b];
  }
  Tensor y = bn.forward(x, Mode::kTraining);
  for (int f = 0; f < 2; ++f) {
    double mean = 0.0, var = 0.0;
    for (int b = 0; b < 4; ++b) mean += y.at(b, f);
    mean /= 4;
    for (int b = 0; b < 4; ++b) var += (y.at(b, f) - mean) * (y.at(b, f) - mean);
    var /= 4;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::abs(var - 1.0) < 1e-3);  // epsilon shifts it slightly
  }
}

TEST_CASE("batchnorm applies gamma and beta") {
  BatchNormLayer bn(1, "bn");
  std::vector<ParamView> ps;
  bn.collect_params(ps);
  ps[0].value[0] = 2.0;  // gamma
  ps[1].value[0] = 3.0;  // beta
  Tensor x(4, 1);
  x.values = {-1.0, 1.0, -1.0, 1.0};
  Tensor y = bn.forward(x, Mode::kTraining);
  double mean = 0.0;
  for (double v : y.values) mean += v;
  mean /= 4;
  double sd = 0.0;
  for (double v : y.values) sd += (v - mean) * (v - mean);
  sd = std::sqrt(sd / 4);
  CHECK(std::abs(mean - 3.0) < 1e-12);
  CHECK(std::abs(sd - 2.0) < 2e-3);
}

TEST_CASE("batchnorm rejects training batches of one") {
  BatchNormLayer bn(2, "bn");
  Tensor x(1, 2);
  CHECK_THROWS_AS(bn.forward(x, Mode::kTraining), ValidationError);
  CHECK_NOTHROW(bn.forward(x, Mode::kInference));
}

TEST_CASE("batchnorm running statistics converge to the stream moments") {
  const double mu = 2.5, sd = 3.0;
  BatchNormLayer bn(1, "bn");
  Xoshiro256pp rng(99);
  for (int step = 0; step < 200; ++step) {
    Tensor x(2000, 1);
    for (double& v : x.values) v = mu + sd * rng.gaussian();
    bn.forward(x, Mode::kTraining);
  }
  CHECK(std::abs(bn.running_mean()[0] - mu) < 0.02 * mu);
  CHECK(std::abs(bn.running_var()[0] - sd * sd) < 0.05 * sd * sd);
}

TEST_CASE("batchnorm non-trainable statistics expose no gradient slot") {
  BatchNormLayer bn(3, "bn");
  std::vector<ParamView> ps;
  bn.collect_params(ps);
  REQUIRE(ps.size() == 4);
  CHECK(ps[0].trainable);
  CHECK(ps[1].trainable);
  CHECK_FALSE(ps[2].trainable);
  CHECK_FALSE(ps[3].trainable);
  CHECK(ps[2].grad == nullptr);
  CHECK(ps[3].grad == nullptr);
  CHECK(bn.trainable_params() == 6);
  CHECK(bn.non_trainable_params() == 6);
}

TEST_CASE("finite differences: dense / batchnorm / tanh / row-normalize") {
  FeedForward net;
  net.add(std::make_unique<DenseLayer>(5, 7, "dense1"));
  net.add(std::make_unique<BatchNormLayer>(7, "bn1"));
  net.add(std::make_unique<ReluLayer>("relu1"));
  net.add(std::make_unique<DenseLayer>(7, 4, "dense2"));
  net.add(std::make_unique<BatchNormLayer>(4, "bn2"));
  net.add(std::make_unique<TanhLayer>("tanh"));
  net.add(std::make_unique<RowNormalizeLayer>(2.0, "pn"));
  net.init(123);
  Tensor x = make_tensor(4, 5, 7);

  net.zero_grads();
  Tensor y = net.forward(x, Mode::kTraining);
  Tensor dy;
  half_sq(y, &dy);
  net.backward(dy);

  auto loss_fn = [&] {
    Tensor out = net.forward(x, Mode::kTraining);
    return half_sq(out, nullptr);
  };
  auto result = gradcheck::check_params(net.params(), loss_fn);
  INFO("worst " << result.worst_param << " rel " << result.worst_rel);
  CHECK(result.checked == 96);
  CHECK(result.worst_rel < 1e-5);
}

TEST_CASE("backward before forward is a state error") {
  FeedForward net;
  net.add(std::make_unique<DenseLayer>(2, 2, "dense"));
  Tensor dy(1, 2);
  CHECK_THROWS_AS(net.backward(dy), StateError);
}

TEST_CASE("forward rejects shape mismatches and non-finite values") {
  FeedForward net;
  net.add(std::make_unique<DenseLayer>(3, 2, "dense"));
  Tensor wrong(1, 4);
  CHECK_THROWS_AS(net.forward(wrong, Mode::kInference), ShapeError);
  Tensor bad(1, 3);
  bad.values[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(net.forward(bad, Mode::kInference), NumericError);
}

TEST_CASE("adam: first step moves each coordinate by about the lr") {
  std::vector<double> param(3, 1.0), grad(3);
  grad = {0.3, -2.0, 10.0};
  std::vector<ParamView> ps{{"p", param.data(), grad.data(), 3, true}};
  Adam adam(ps);
  adam.step(0.01);
  for (int i = 0; i < 3; ++i) {
    const double move = std::abs(param[i] - 1.0);
    CHECK(std::abs(move - 0.01) < 1e-6);
    CHECK((grad[i] > 0) == (param[i] < 1.0));
  }
}

TEST_CASE("adam: zero gradients leave parameters untouched") {
  std::vector<double> param{1.0, -2.0}, grad{0.0, 0.0};
  std::vector<ParamView> ps{{"p", param.data(), grad.data(), 2, true}};
  Adam adam(ps);
  for (int i = 0; i < 100; ++i) adam.step(0.1);
  CHECK(param[0] == 1.0);
  CHECK(param[1] == -2.0);
}

TEST_CASE("adam: converges on a quadratic bowl") {
  double x = 5.0, g = 0.0;
  std::vector<ParamView> ps{{"x", &x, &g, 1, true}};
  Adam adam(ps);
  for (int i = 0; i < 5000; ++i) {
    g = x;  // d/dx of x^2/2
    adam.step(0.01);
  }
  CHECK(std::abs(x) < 1e-3);
}

TEST_CASE("plateau schedule: spec traces") {
  const double hist1[] = {10.0, 9.0, 9.0, 9.0};
  CHECK(plateau_schedule(hist1, 0.01) == Catch::Approx(0.001));

  const double hist2[] = {1.0, 2.0, 3.0, 4.0, 5.0};
  CHECK(plateau_schedule(hist2, 0.01) == 0.01);

  const double hist3[] = {10.0, 9.0, 9.0, 10.1, 8.0, 8.0, 8.0};
  CHECK(plateau_schedule(hist3, 0.01) == Catch::Approx(0.001));

  // Two full plateaus -> two reductions.
  const double hist4[] = {10.0, 9.0, 9.0, 9.0, 8.0, 8.0, 8.0};
  CHECK(plateau_schedule(hist4, 0.01) == Catch::Approx(0.0001));

  CHECK_THROWS_AS(plateau_schedule({}, 0.01), ValidationError);
}

TEST_CASE("training steps are bitwise deterministic") {
  auto run = [&] {
    FeedForward net;
    net.add(std::make_unique<DenseLayer>(4, 6, "dense1"));
    net.add(std::make_unique<BatchNormLayer>(6, "bn1"));
    net.add(std::make_unique<ReluLayer>("relu1"));
    net.add(std::make_unique<DenseLayer>(6, 2, "dense2"));
    net.init(2718);
    Adam adam(net.params());
    for (int step = 0; step < 20; ++step) {
      Tensor x = make_tensor(8, 4, 100 + step);
      net.zero_grads();
      Tensor y = net.forward(x, Mode::kTraining);
      Tensor dy;
      half_sq(y, &dy);
      net.backward(dy);
      adam.step(0.01);
    }
    return net.export_state();
  };
  CHECK(run() == run());
}

TEST_CASE("inference passes are pure") {
  FeedForward net;
  net.add(std::make_unique<DenseLayer>(3, 5, "dense"));
  net.add(std::make_unique<BatchNormLayer>(5, "bn"));
  net.add(std::make_unique<TanhLayer>("tanh"));
  net.init(55);
  // Build non-trivial running stats first.
  for (int i = 0; i < 5; ++i)
    net.forward(make_tensor(6, 3, 600 + i), Mode::kTraining);
  Tensor x = make_tensor(4, 3, 777);
  Tensor y1 = net.forward(x, Mode::kInference);
  Tensor y2 = net.forward(x, Mode::kInference);
  CHECK(y1.values == y2.values);
}

TEST_CASE("parameter accounting sums per-layer declared counts") {
  FeedForward net;
  net.add(std::make_unique<DenseLayer>(10, 20, "dense1"));
  net.add(std::make_unique<BatchNormLayer>(20, "bn1"));
  net.add(std::make_unique<ReluLayer>("relu1"));
  net.add(std::make_unique<DenseLayer>(20, 4, "dense2"));
  CHECK(net.trainable_params() == (10 * 20 + 20) + 2 * 20 + (20 * 4 + 4));
  CHECK(net.non_trainable_params() == 2 * 20);
}
